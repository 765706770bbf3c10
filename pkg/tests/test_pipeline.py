import numpy as np
import pytest

from cmf import cmft, features, scene
from cmf.costvolume import linear_depth_samples
from cmf.depthrange import DepthRange
from cmf.geometry import RigidPose
from cmf.metrics import InstanceSet
from cmf.pipeline import (PipelineConfig, StageError, overlay, run_pipeline, upsample_nearest)

SMALL = dict(d_min=1.0, d_max=4.0, bins=16, channels=16, maps=8)


@pytest.fixture(scope="module")
def small_scene():
    return scene.generate(scene.random_spec(2, width=128, height=64, movers=1, statics=1), 2)


class TestConfig:
    def test_preset_default(self):
        cfg = PipelineConfig().resolved()
        assert (cfg.preset, cfg.d_min, cfg.d_max, cfg.bins) == ("vcas-320x960", 0.091, 2.646, 64)
        s = linear_depth_samples(cfg.depth_range, cfg.bins)
        assert len(s) == 64 and s.values[0] == 0.091 and s.values[-1] == 2.646

    def test_explicit_range_overrides_preset(self):
        cfg = PipelineConfig(preset="kitti", d_min=1.0, d_max=2.0).resolved()
        assert cfg.preset is None and (cfg.d_min, cfg.d_max) == (1.0, 2.0)

    def test_resolved_is_explicit(self):
        cfg = PipelineConfig(threads=None).resolved()
        assert all(v is not None for k, v in vars(cfg).items()
                   if k not in ("preset", "net_weights", "decoder_weights", "out_dir"))

    @pytest.mark.parametrize("kwargs", [dict(d_min=1.0), dict(bins=10), dict(threshold=1.0),
                                        dict(decoder_init="ones"), dict(dump=True)])
    def test_invalid(self, kwargs):
        with pytest.raises(ValueError):
            PipelineConfig(**kwargs).resolved()

    def test_config_lines_skip_runtime(self):
        lines = PipelineConfig(threads=3, out_dir="x").resolved().lines(runtime=False)
        assert not any(line.startswith(("threads", "out_dir")) for line in lines)


class TestRun:
    def test_identical_frames(self):
        img = np.random.default_rng(0).random((3, 32, 64)).astype(np.float32)
        k = scene.default_intrinsics(64, 32)
        res = run_pipeline(img, img, RigidPose.identity(), k, PipelineConfig(decoder_init="zero", **SMALL))
        assert not res.intermediates["volume"].any()
        assert len(res.instances) == 0
        assert res.motion_features.shape == (64, 8, 16)

    def test_with_ground_truth(self, small_scene, tmp_path):
        b = small_scene
        gt = InstanceSet(b.motion_masks, None, b.depth_next.shape)
        cfg = PipelineConfig(out_dir=str(tmp_path), dump=True, threshold=0.4, **SMALL)
        res = run_pipeline(b.frame_prev, b.frame_next, b.pose, b.intrinsics, cfg, gt)
        assert res.report is not None and res.report.caq == res.report.sq * res.report.rq
        assert res.instances.shape == (64, 128)
        for name in ("pred.pgm", "motion_features.cmft", "config.txt", "instances.csv", "metrics.csv",
                     "argmin.cmft", "argmin.pgm", "volume.cmft", "f2.cmft"):
            assert (tmp_path / name).exists(), name
        for name, arr in res.intermediates.items():
            assert np.array_equal(cmft.read(tmp_path / f"{name}.cmft"), arr), name

    def test_deterministic(self, small_scene):
        b = small_scene
        a = run_pipeline(b.frame_prev, b.frame_next, b.pose, b.intrinsics, PipelineConfig(threads=1, **SMALL))
        c = run_pipeline(b.frame_prev, b.frame_next, b.pose, b.intrinsics, PipelineConfig(threads=4, **SMALL))
        assert np.array_equal(a.motion_features, c.motion_features)
        assert np.array_equal(a.soft_masks, c.soft_masks)
        assert np.array_equal(a.instances.label_map(), c.instances.label_map())

    def test_stage_error_names_stage(self):
        img = np.zeros((3, 40, 64), np.float32)  # 1/4 resolution height 10
        k = scene.default_intrinsics(64, 40)
        with pytest.raises(StageError) as err:
            run_pipeline(img, img, RigidPose.identity(), k, PipelineConfig(**SMALL))
        assert err.value.stage == "motionnet" and "divisible" in str(err.value)
        with pytest.raises(StageError) as err:
            run_pipeline(img, img, RigidPose.identity(), scene.default_intrinsics(96, 40), PipelineConfig(**SMALL))
        assert err.value.stage == "costvol"

    def test_external_features(self, small_scene):
        b = small_scene
        fp, fn = features.extract_features(b.frame_prev, 16, 5), features.extract_features(b.frame_next, 16, 5)
        a = run_pipeline(b.frame_prev, b.frame_next, b.pose, b.intrinsics, PipelineConfig(**SMALL), features=(fp, fn))
        c = run_pipeline(b.frame_prev, b.frame_next, b.pose, b.intrinsics, PipelineConfig(feature_seed=5, **SMALL))
        assert np.array_equal(a.motion_features, c.motion_features)

    def test_static_scene_argmin(self, tmp_path):
        """Full-size static scene: the dumped argmin map is within half a bin
        of the true depth on the evaluation mask."""
        b = scene.generate(scene.random_spec(1), 1)
        cfg = PipelineConfig(d_min=1.0, d_max=4.0, out_dir=str(tmp_path), dump_argmin=True)
        run_pipeline(b.frame_prev, b.frame_next, b.pose, b.intrinsics, cfg)
        argmin = cmft.read(tmp_path / "argmin.cmft")
        spacing = linear_depth_samples(DepthRange(1.0, 4.0), 64).spacing
        ev = features.feature_depth(scene.evaluation_mask(b))
        err = np.abs(argmin - features.feature_depth(b.depth_next))
        assert ((err <= spacing / 2)[ev]).mean() >= 0.95


def test_upsample_nearest():
    m = np.array([[1, 0], [0, 1]])
    up = upsample_nearest(m, 4, (8, 7))
    assert up.shape == (8, 7)
    assert up[1, 1] == 1 and up[3, 0] == 0 and up[6, 6] == 1 and up[7, 0] == 0
    # every full-res pixel at a sampling site keeps that site's value
    assert np.array_equal(up[::4, ::4], m)


def test_overlay_leaves_background():
    frame = np.full((3, 4, 4), 0.2)
    lab = np.zeros((4, 4), int)
    lab[0, 0] = 1
    out = overlay(frame, lab)
    assert np.array_equal(out[:, 1:, :], frame[:, 1:, :])
    assert not np.array_equal(out[:, 0, 0], frame[:, 0, 0])
