import numpy as np
import pytest
from hypothesis import given, strategies as st

from cmf.geometry import (Intrinsics, RigidPose, SampleGrid, bilinear_sample, load_camera,
                          project_plane, project_planes, rotation_about, save_camera,
                          warp_feature_plane)
from cmf.scene import SceneSpec, default_intrinsics, generate
from cmf.tensor import ShapeError

import oracles

K = Intrinsics(40.0, 42.0, 15.5, 11.5, 32, 24)


def _smooth_map(c, h, w, seed=0, fmax=0.25):
    rng = np.random.default_rng(seed)
    v, u = np.mgrid[0:h, 0:w].astype(np.float64)
    out = np.zeros((c, h, w))
    for ch in range(c):
        for _ in range(3):
            fx, fy, ph = rng.uniform(0.02, fmax), rng.uniform(0.02, fmax), rng.uniform(0, 6.3)
            out[ch] += np.sin(fx * u + fy * v + ph) / 3
    return out.astype(np.float32)


class TestIntrinsics:
    def test_rejects_bad_values(self):
        with pytest.raises(ValueError):
            Intrinsics(0, 1, 0, 0, 4, 4)
        with pytest.raises(ValueError):
            Intrinsics(1, 1, 4, 0, 4, 4)

    def test_scaled(self):
        k = Intrinsics(100, 80, 50, 30, 200, 120).scaled(0.25)
        assert (k.fx, k.fy, k.cx, k.cy, k.width, k.height) == (25, 20, 12.5, 7.5, 50, 30)

    def test_matrix(self):
        assert K.matrix.tolist() == [[40, 0, 15.5], [0, 42, 11.5], [0, 0, 1]]


class TestRigidPose:
    def test_rejects_non_rotation(self):
        with pytest.raises(ValueError):
            RigidPose(np.diag([1, 1, 2]), np.zeros(3))
        with pytest.raises(ValueError):
            RigidPose(np.diag([1, 1, -1]), np.zeros(3))

    @given(st.floats(-3, 3), st.floats(-3, 3), st.floats(-3, 3), st.floats(-3.1, 3.1))
    def test_inverse_composes_to_identity(self, a, b, c, angle):
        pose = RigidPose(rotation_about([1, 2, 3], angle), [a, b, c])
        both = pose.compose(pose.inverse())
        np.testing.assert_allclose(both.rotation, np.eye(3), atol=1e-12)
        np.testing.assert_allclose(both.translation, 0, atol=1e-12)

    def test_values_round_trip(self):
        pose = RigidPose(rotation_about([0, 1, 0], 0.3), [1, 2, 3])
        assert RigidPose.from_values(pose.values()).values() == pose.values()

    def test_from_values_length(self):
        with pytest.raises(ValueError, match="12"):
            RigidPose.from_values(range(11))


class TestProjectPlane:
    @given(st.floats(0.01, 1e4))
    def test_identity_is_pixel_grid(self, depth):
        g = project_plane(depth, RigidPose.identity(), K)
        v, u = np.mgrid[0:K.height, 0:K.width]
        assert np.array_equal(g.x, u) and np.array_equal(g.y, v) and g.valid.all()

    @given(st.floats(-0.5, 0.5), st.floats(0.5, 20))
    def test_lateral_translation_shift(self, tx, depth):
        g = project_plane(depth, RigidPose(np.eye(3), [tx, 0, 0]), K)
        v, u = np.mgrid[0:K.height, 0:K.width]
        np.testing.assert_allclose(g.x, u + K.fx * tx / depth, atol=1e-9)
        np.testing.assert_allclose(g.y, v, atol=1e-9)

    def test_half_turn_mirrors_through_principal_point(self):
        g = project_plane(2.0, RigidPose(rotation_about([0, 0, 1], np.pi), np.zeros(3)),
                          Intrinsics(40, 40, 15.5, 11.5, 32, 24))
        v, u = np.mgrid[0:24, 0:32]
        np.testing.assert_allclose(g.x, 2 * 15.5 - u, atol=1e-9)
        np.testing.assert_allclose(g.y, 2 * 11.5 - v, atol=1e-9)
        # border pixels can land a rounding error outside the frame
        assert g.valid[1:-1, 1:-1].all()

    def test_matches_scalar_oracle(self):
        rng = np.random.default_rng(0)
        r = rotation_about(rng.standard_normal(3), 0.1)
        t = rng.uniform(-0.3, 0.3, 3)
        g = project_plane(3.0, RigidPose(r, t), K)
        for v, u in [(0, 0), (5, 7), (23, 31), (12, 16)]:
            ref = oracles.project_pixel(u, v, 3.0, r.tolist(), t.tolist(), K.fx, K.fy, K.cx, K.cy)
            assert g.x[v, u] == pytest.approx(ref[0], abs=1e-9)
            assert g.y[v, u] == pytest.approx(ref[1], abs=1e-9)

    def test_valid_implies_inside(self):
        g = project_plane(1.5, RigidPose(rotation_about([0, 1, 0], 0.1), [0.3, 0.1, 0.2]), K)
        assert g.valid.any() and not g.valid.all()
        x, y = g.x[g.valid], g.y[g.valid]
        assert (x >= 0).all() and (x <= K.width - 1).all() and (y >= 0).all() and (y <= K.height - 1).all()

    def test_behind_camera_is_invalid(self):
        g = project_plane(1.0, RigidPose(np.eye(3), [0, 0, -2.0]), K)
        assert not g.valid.any()

    def test_scaling_doubles_coordinates(self):
        pose = RigidPose(rotation_about([0.2, 1, 0], 0.05), [0.3, 0.05, 0.1])
        k2 = Intrinsics(K.fx * 2, K.fy * 2, K.cx * 2, K.cy * 2, K.width * 2, K.height * 2)
        a = project_plane(2.5, pose, K)
        b = project_plane(2.5, pose, k2)
        np.testing.assert_allclose(b.x[::2, ::2], 2 * a.x, rtol=0, atol=1e-9)
        np.testing.assert_allclose(b.y[::2, ::2], 2 * a.y, rtol=0, atol=1e-9)

    def test_valid_monotone_under_forward_translation(self):
        pose = RigidPose(np.eye(3), [0.0, 0.0, -0.5])  # source sits ahead of the target
        _, _, valid = project_planes(np.linspace(0.6, 10, 30), pose, K)
        # far planes approach the identity grid, so valid only grows with depth
        assert (valid[1:] >= valid[:-1]).all()

    def test_rejects_nonpositive_depth(self):
        with pytest.raises(ValueError):
            project_plane(0.0, RigidPose.identity(), K)
        with pytest.raises(ValueError):
            project_planes([1.0, -1.0], RigidPose.identity(), K)


class TestBilinearSample:
    def test_integer_grid_is_exact_gather(self, backend):
        src = np.random.default_rng(1).standard_normal((2, 5, 6)).astype(np.float32)
        v, u = np.mgrid[0:5, 0:6]
        uu, vv = (u + 1) % 6, v[::-1]
        out = bilinear_sample(src, SampleGrid(uu.astype(float), vv.astype(float), np.ones((5, 6), bool)))
        assert np.array_equal(out, src[:, vv, uu])

    def test_midpoint(self, backend):
        src = np.zeros((1, 2, 2), np.float32)
        src[0, 0] = [2.0, 4.0]
        g = SampleGrid(np.full((2, 2), 0.5), np.zeros((2, 2)), np.ones((2, 2), bool))
        assert bilinear_sample(src, g)[0, 0, 0] == 3.0

    def test_four_corner_oracle(self, backend):
        rng = np.random.default_rng(2)
        for _ in range(20):
            src = rng.standard_normal((2, 5, 5)).astype(np.float32)
            gx, gy = rng.uniform(0, 4, (5, 5)), rng.uniform(0, 4, (5, 5))
            out = bilinear_sample(src, SampleGrid(gx, gy, np.ones((5, 5), bool)))
            for v in range(5):
                for u in range(5):
                    np.testing.assert_allclose(out[:, v, u], oracles.bilinear_four_corner(src, gx[v, u], gy[v, u]),
                                               rtol=1e-5, atol=1e-6)

    def test_invalid_zero_filled(self, backend):
        src = np.ones((1, 3, 3), np.float32)
        valid = np.ones((3, 3), bool)
        valid[1, 1] = False
        out = bilinear_sample(src, SampleGrid(np.zeros((3, 3)), np.zeros((3, 3)), valid))
        assert out[0, 1, 1] == 0.0 and out.sum() == 8.0

    def test_grid_dims_must_match(self):
        with pytest.raises(ShapeError):
            bilinear_sample(np.zeros((1, 3, 3)), SampleGrid(np.zeros((2, 2)), np.zeros((2, 2)), np.ones((2, 2), bool)))


class TestWarp:
    def test_identity_bit_exact(self, backend):
        src = _smooth_map(3, K.height, K.width)
        assert np.array_equal(warp_feature_plane(src, 1.7, RigidPose.identity(), K), src)

    @given(st.floats(-1, 1), st.floats(0.5, 5))
    def test_constant_source(self, level, depth):
        src = np.full((2, K.height, K.width), level, np.float32)
        pose = RigidPose(rotation_about([0, 1, 0], 0.05), [0.2, 0.0, 0.1])
        out = warp_feature_plane(src, depth, pose, K)
        valid = project_plane(depth, pose, K).valid
        np.testing.assert_allclose(out[:, valid], np.float32(level), rtol=1e-6, atol=1e-7)
        assert (out[:, ~valid] == 0).all()

    def test_round_trip(self, backend):
        k = Intrinsics(60, 60, 31.5, 23.5, 64, 48)
        src = _smooth_map(2, 48, 64, seed=3, fmax=0.15)
        pose = RigidPose(np.eye(3), [0.05, -0.03, 0.1])
        d = 2.0
        there = warp_feature_plane(src, d, pose, k)
        back = warp_feature_plane(there, d + 0.1, pose.inverse(), k)
        interior = (slice(None), slice(8, -8), slice(8, -8))
        assert np.mean(np.abs(back[interior] - src[interior])) <= 2e-3

    def test_rendered_plane_reconstruction(self, backend):
        k = default_intrinsics(192, 64)
        pose = RigidPose(rotation_about([0, 1, 0], 0.004), [0.3, 0.01, 0.05])
        b = generate(SceneSpec(k, pose, background_depth=4.0, periods=(48, 128)), seed=5)
        warped = warp_feature_plane(b.frame_prev, 4.0, pose, k)
        valid = project_plane(4.0, pose, k).valid
        assert np.mean(np.abs(warped - b.frame_next)[:, valid]) < 1e-3

    def test_intrinsics_must_match_source(self):
        with pytest.raises(ShapeError):
            warp_feature_plane(np.zeros((1, 5, 5)), 1.0, RigidPose.identity(), K)


def test_camera_file_round_trip(tmp_path):
    pose = RigidPose(rotation_about([0, 1, 0], 0.1), [0.3, -0.1, 0.05])
    save_camera(tmp_path / "cam.txt", K, pose)
    k2, p2 = load_camera(tmp_path / "cam.txt")
    assert k2 == K and p2.values() == pose.values()


def test_camera_file_missing_key(tmp_path):
    (tmp_path / "cam.txt").write_text("fx = 1\n")
    with pytest.raises(ValueError, match="missing key"):
        load_camera(tmp_path / "cam.txt")
