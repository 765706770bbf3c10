import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from cmf.losses import (LossComponents, LossWeights, dice_loss, focal_loss, objectness_bce,
                        pixel_bce, total_loss)

import oracles


def _fd_rel_err(analytic, numeric):
    scale = max(float(np.max(np.abs(numeric))), 1e-12)
    return float(np.max(np.abs(np.asarray(analytic) - numeric))) / scale


def _instance(rng, shape=(3, 3)):
    return rng.uniform(0.05, 0.95, shape), (rng.random(shape) > 0.5).astype(float)


class TestDice:
    def test_all_ones(self):
        assert dice_loss(np.ones((4, 4)), np.ones((4, 4)))[0] == 0.0

    def test_no_overlap(self):
        n = 12
        assert dice_loss(np.zeros(n), np.ones(n))[0] == pytest.approx(1 - 1 / (n + 1), abs=1e-15)

    def test_formula_and_gradient(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            p, g = _instance(rng)
            val, grad = dice_loss(p, g)
            assert val == pytest.approx(oracles.dice_formula(p, g), abs=1e-6)
            num = oracles.central_difference(lambda x: oracles.dice_formula(x, g), p)
            assert _fd_rel_err(grad, num) < 1e-4

    @given(st.integers(0, 2**32 - 1))
    def test_pixel_permutation_invariant(self, seed):
        rng = np.random.default_rng(seed)
        p, g = _instance(rng, (16,))
        perm = rng.permutation(16)
        assert dice_loss(p[perm], g[perm])[0] == pytest.approx(dice_loss(p, g)[0], abs=1e-12)

    def test_rejects_non_probabilities(self):
        with pytest.raises(ValueError):
            dice_loss(np.array([1.5]), np.array([1.0]))
        with pytest.raises(ValueError):
            dice_loss(np.zeros(3), np.zeros(4))


class TestPixelBce:
    def test_half(self):
        assert pixel_bce(np.full((3, 3), 0.5), np.ones((3, 3)))[0] == pytest.approx(math.log(2), abs=1e-15)

    def test_perfect_is_near_zero(self):
        g = (np.arange(9).reshape(3, 3) % 2).astype(float)
        assert 0 <= pixel_bce(g, g)[0] <= 1e-6 * abs(math.log(1e-7))

    def test_formula_and_gradient(self):
        rng = np.random.default_rng(1)
        for _ in range(50):
            p, g = _instance(rng)
            val, grad = pixel_bce(p, g)
            assert val == pytest.approx(oracles.bce_formula(p, g), abs=1e-6)
            num = oracles.central_difference(lambda x: oracles.bce_formula(x, g), p)
            assert _fd_rel_err(grad, num) < 1e-4

    def test_clamped_gradient_is_zero(self):
        _, grad = pixel_bce(np.array([0.0, 1.0, 0.5]), np.array([1.0, 0.0, 1.0]))
        assert grad[0] == 0.0 and grad[1] == 0.0 and grad[2] != 0.0

    @given(st.integers(0, 2**32 - 1))
    def test_pixel_permutation_invariant(self, seed):
        rng = np.random.default_rng(seed)
        p, g = _instance(rng, (16,))
        perm = rng.permutation(16)
        assert pixel_bce(p[perm], g[perm])[0] == pytest.approx(pixel_bce(p, g)[0], abs=1e-12)


class TestFocal:
    def test_confident_correct_is_zero(self):
        assert focal_loss(np.array([0.0, 1.0, 0.0]), 1)[0] == pytest.approx(0.0, abs=1e-12)

    def test_gamma_zero_is_weighted_bce(self):
        rng = np.random.default_rng(2)
        s = rng.uniform(0.05, 0.95, 5)
        y = np.zeros(5)
        y[3] = 1.0
        val = focal_loss(s, 3, alpha=0.25, gamma=0.0)[0]
        pos = pixel_bce(s[3:4], y[3:4])[0]
        neg = pixel_bce(np.delete(s, 3), np.delete(y, 3))[0] * 4
        assert val == pytest.approx((0.25 * pos + 0.75 * neg) / 5, abs=1e-12)

    def test_formula_and_gradient(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            s = rng.uniform(0.05, 0.95, int(rng.integers(2, 6)))
            k = int(rng.integers(s.size))
            val, grad = focal_loss(s, k)
            assert val == pytest.approx(oracles.focal_formula(s, k), abs=1e-6)
            num = oracles.central_difference(lambda x: oracles.focal_formula(x, k), s)
            assert _fd_rel_err(grad, num) < 1e-4

    def test_bad_class(self):
        with pytest.raises(ValueError):
            focal_loss(np.array([0.5, 0.5]), 2)


class TestObjectness:
    def test_half(self):
        assert objectness_bce(0.5, 1)[0] == pytest.approx(math.log(2), abs=1e-15)

    @given(st.floats(0.001, 0.999))
    def test_symmetry(self, p):
        assert objectness_bce(p, 1)[0] == pytest.approx(objectness_bce(1 - p, 0)[0], rel=1e-9)

    def test_gradient(self):
        rng = np.random.default_rng(4)
        for _ in range(50):
            p, t = float(rng.uniform(0.05, 0.95)), int(rng.integers(2))
            _, grad = objectness_bce(p, t)
            num = oracles.central_difference(lambda x: oracles.bce_formula(x, [t]), [p])[0]
            assert _fd_rel_err(grad, num) < 1e-4

    def test_bad_target(self):
        with pytest.raises(ValueError):
            objectness_bce(0.5, 2)


class TestTotal:
    def test_paper_weights_unit_components(self):
        assert total_loss(LossComponents(1.0, 1.0, 1.0, 1.0)) == 12.0

    def test_zero(self):
        assert total_loss(LossComponents(0.0, 0.0, 0.0, 0.0)) == 0.0

    @given(st.lists(st.floats(0, 100), min_size=4, max_size=4),
           st.lists(st.floats(0, 10), min_size=4, max_size=4))
    def test_weighted_sum(self, comps, lams):
        w = LossWeights(*lams)
        c = LossComponents(*comps)
        ref = lams[2] * comps[0] + lams[3] * comps[1] + lams[0] * comps[2] + lams[1] * comps[3]
        assert total_loss(c, w) == pytest.approx(ref, rel=1e-12, abs=1e-12)

    def test_parse(self):
        assert LossWeights.parse("2,3,2,5") == LossWeights()
        with pytest.raises(ValueError):
            LossWeights.parse("1,2")
        with pytest.raises(ValueError):
            LossWeights(-1.0)

    def test_non_finite_rejected(self):
        with pytest.raises(ValueError):
            total_loss(LossComponents(float("nan"), 0, 0, 0))
