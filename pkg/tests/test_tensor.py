import numpy as np
import pytest
from hypothesis import given, strategies as st

from cmf import _backend
from cmf.tensor import (Conv3dSpec, ShapeError, as_tensor, conv3d, hadamard, leaky_relu,
                        pointwise_conv2d, sigmoid, transposed_conv3d)

import oracles


def _random_conv(rng, transposed=False):
    ci, co = rng.integers(1, 4), rng.integers(1, 20)
    k = tuple(int(v) for v in rng.integers(1, 4, size=3))
    s = tuple(int(v) for v in rng.integers(1, 3, size=3))
    p = tuple(int(rng.integers(0, kk)) for kk in k)
    dims = tuple(int(v) for v in rng.integers(2, 6, size=3))
    spec = Conv3dSpec.init(ci, co, k, s, p, rng=rng, zero_bias=False)
    x = rng.standard_normal((ci,) + dims).astype(np.float32)
    return x, spec


def _rel_err(a, b):
    return float(np.max(np.abs(a - b)) / max(1.0, float(np.max(np.abs(b)))))


class TestConv3d:
    def test_matches_loop_oracle(self, backend):
        rng = np.random.default_rng(1)
        for _ in range(25):
            x, spec = _random_conv(rng)
            if min(spec.conv_output_dims(x.shape[1:])) < 1:
                continue
            ref = oracles.conv3d_loops(x, spec.weights, spec.bias, spec.stride, spec.padding)
            assert _rel_err(conv3d(x, spec), ref) < 1e-5

    def test_output_dims(self):
        spec = Conv3dSpec.init(2, 3, 3, stride=2, padding=1)
        out = conv3d(np.zeros((2, 8, 9, 10), np.float32), spec)
        assert out.shape == (3, 4, 5, 5)

    def test_zero_input_gives_bias(self, backend):
        rng = np.random.default_rng(2)
        spec = Conv3dSpec.init(3, 17, 3, padding=1, rng=rng, zero_bias=False)
        out = conv3d(np.zeros((3, 4, 5, 6), np.float32), spec)
        assert np.array_equal(out, np.broadcast_to(spec.bias[:, None, None, None], out.shape))

    def test_delta_kernel_is_identity(self, backend):
        w = np.zeros((1, 1, 3, 3, 3), np.float32)
        w[0, 0, 1, 1, 1] = 1.0
        spec = Conv3dSpec(1, 1, 3, 1, 1, w, np.zeros(1))
        x = np.random.default_rng(3).standard_normal((1, 4, 5, 6)).astype(np.float32)
        assert np.array_equal(conv3d(x, spec), x)

    def test_channel_mismatch(self):
        spec = Conv3dSpec.init(2, 3, 3)
        with pytest.raises(ShapeError, match="channels"):
            conv3d(np.zeros((3, 4, 4, 4), np.float32), spec)

    def test_too_small_input(self):
        spec = Conv3dSpec.init(1, 1, 3)
        with pytest.raises(ShapeError, match="non-positive"):
            conv3d(np.zeros((1, 2, 4, 4), np.float32), spec)

    def test_bad_weight_dims(self):
        with pytest.raises(ShapeError):
            Conv3dSpec(1, 2, 3, 1, 0, np.zeros((2, 1, 3, 3, 2)), np.zeros(2))

    def test_thread_count_does_not_change_result(self, backend):
        rng = np.random.default_rng(4)
        spec = Conv3dSpec.init(4, 16, 3, padding=1, rng=rng)
        x = rng.standard_normal((4, 6, 7, 9)).astype(np.float32)
        assert np.array_equal(conv3d(x, spec, threads=1), conv3d(x, spec, threads=4))

    @given(st.integers(0, 2**32 - 1), st.floats(-4, 4).filter(lambda a: a != 0))
    def test_linear_in_input(self, seed, alpha):
        rng = np.random.default_rng(seed)
        spec = Conv3dSpec.init(2, 3, 3, padding=1, rng=rng)
        x = rng.standard_normal((2, 3, 4, 4)).astype(np.float32)
        a = conv3d(np.float32(alpha) * x, spec)
        b = np.float32(alpha) * conv3d(x, spec)
        np.testing.assert_allclose(a, b, rtol=1e-4, atol=1e-5)


class TestTransposedConv3d:
    def test_matches_scatter_oracle(self, backend):
        rng = np.random.default_rng(5)
        for _ in range(25):
            x, spec = _random_conv(rng, transposed=True)
            if min(spec.transposed_output_dims(x.shape[1:])) < 1:
                continue
            ref = oracles.tconv3d_scatter(x, spec.weights, spec.bias, spec.stride, spec.padding)
            assert _rel_err(transposed_conv3d(x, spec), ref) < 1e-5

    def test_doubles_with_stride_two(self):
        spec = Conv3dSpec.init(2, 3, 4, stride=2, padding=1)
        assert transposed_conv3d(np.zeros((2, 4, 5, 6), np.float32), spec).shape == (3, 8, 10, 12)

    def test_adjoint_of_conv(self, backend):
        """<conv(x), y> == <x, tconv(y)> with shared weights and no bias."""
        rng = np.random.default_rng(6)
        w = rng.standard_normal((3, 2, 3, 3, 3)).astype(np.float32)
        fwd = Conv3dSpec(2, 3, 3, 2, 1, w, np.zeros(3))
        adj = Conv3dSpec(3, 2, 3, 2, 1, w.transpose(1, 0, 2, 3, 4), np.zeros(2))
        x = rng.standard_normal((2, 7, 7, 7)).astype(np.float32)
        y = rng.standard_normal((3,) + fwd.conv_output_dims(x.shape[1:])).astype(np.float32)
        lhs = float(np.sum(conv3d(x, fwd).astype(np.float64) * y))
        rhs = float(np.sum(x.astype(np.float64) * transposed_conv3d(y, adj)))
        assert lhs == pytest.approx(rhs, rel=1e-5)

    def test_depth_collapse_kernel(self, backend):
        # kernel (D,1,1), padding (D-1,0,0) takes depth D to 1; tap k meets slice D-1-k
        d = 5
        rng = np.random.default_rng(7)
        spec = Conv3dSpec.init(3, 2, (d, 1, 1), 1, (d - 1, 0, 0), rng=rng)
        x = rng.standard_normal((3, d, 4, 4)).astype(np.float32)
        out = transposed_conv3d(x, spec)
        assert out.shape == (2, 1, 4, 4)
        w = spec.weights[:, :, ::-1, 0, 0].astype(np.float64)
        ref = np.einsum("ocd,cdhw->ohw", w, x)
        np.testing.assert_allclose(out[:, 0], ref, rtol=1e-5, atol=1e-6)


class TestPointwise:
    def test_matches_loop_oracle(self):
        rng = np.random.default_rng(8)
        for _ in range(25):
            c, o = rng.integers(1, 6, size=2)
            x = rng.standard_normal((c, 3, 4)).astype(np.float32)
            w, b = rng.standard_normal((o, c)), rng.standard_normal(o)
            assert _rel_err(pointwise_conv2d(x, w, b), oracles.pointwise_loops(x, w, b)) < 1e-5

    def test_identity_weights_exact(self):
        x = np.random.default_rng(9).standard_normal((4, 5, 6)).astype(np.float32)
        assert np.array_equal(pointwise_conv2d(x, np.eye(4), np.zeros(4)), x)

    def test_bad_dims(self):
        with pytest.raises(ShapeError):
            pointwise_conv2d(np.zeros((3, 2, 2)), np.zeros((2, 4)), np.zeros(2))
        with pytest.raises(ShapeError):
            pointwise_conv2d(np.zeros((3, 2, 2)), np.zeros((2, 3)), np.zeros(3))


class TestElementwise:
    def test_sigmoid_zero_is_half(self):
        assert sigmoid(np.zeros(3)).tolist() == [0.5] * 3

    def test_sigmoid_stable_at_extremes(self):
        out = sigmoid(np.array([-1e4, 1e4]))
        assert out.tolist() == [0.0, 1.0]

    @given(st.floats(-50, 50))
    def test_sigmoid_symmetry(self, v):
        assert float(sigmoid(v)) + float(sigmoid(-v)) == pytest.approx(1.0, abs=1e-6)

    def test_hadamard_broadcasts_over_depth(self):
        a = np.ones((2, 3, 4, 5), np.float32)
        b = np.arange(40, dtype=np.float32).reshape(2, 4, 5)
        out = hadamard(a, b)
        assert all(np.array_equal(out[:, d], b) for d in range(3))

    def test_hadamard_rejects_mismatch(self):
        with pytest.raises(ShapeError):
            hadamard(np.ones((2, 3, 4, 5)), np.ones((3, 4, 5)))

    def test_leaky_relu(self):
        assert leaky_relu(np.array([-2.0, 0.0, 3.0])).tolist() == pytest.approx([-0.02, 0.0, 3.0])

    def test_as_tensor_rank_limits(self):
        with pytest.raises(ShapeError):
            as_tensor(np.zeros((1,) * 6))
        with pytest.raises(ShapeError):
            as_tensor(np.zeros((2, 2)), ndim=3)
        assert as_tensor([1, 2]).dtype == np.float32


def test_backends_agree():
    if not _backend.native_available():
        pytest.skip("native extension not built")
    rng = np.random.default_rng(10)
    spec = Conv3dSpec.init(8, 16, 3, 2, 1, rng=rng)
    x = rng.standard_normal((8, 8, 10, 12)).astype(np.float32)
    with _backend.use_backend("native"):
        a = conv3d(x, spec)
    with _backend.use_backend("python"):
        b = conv3d(x, spec)
    np.testing.assert_allclose(a, b, rtol=1e-5, atol=1e-6)
