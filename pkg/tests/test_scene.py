import numpy as np
import pytest

from cmf.geometry import RigidPose, rotation_about
from cmf.scene import (SceneObject, SceneSpec, default_intrinsics, evaluation_mask, generate,
                       load_spec, random_spec, save_spec)

K = default_intrinsics(96, 48)


class TestSpecValidation:
    def test_object_must_be_in_front(self):
        with pytest.raises(ValueError, match="in front"):
            SceneSpec(K, background_depth=2.0, objects=(SceneObject(0, 0, 10, 10, 3.0),))

    def test_empty_rectangle(self):
        with pytest.raises(ValueError):
            SceneObject(5, 0, 5, 10, 1.0)

    def test_depth_limits(self):
        with pytest.raises(ValueError):
            SceneSpec(K, background_depth=2000.0)

    def test_object_values_round_trip(self):
        ob = SceneObject(1, 2, 3, 4, 1.5, (0.1, 0.0, 0.2), 7)
        assert SceneObject.from_values(ob.values()) == ob
        with pytest.raises(ValueError):
            SceneObject.from_values([1, 2, 3])


class TestGenerate:
    def test_identity_static_frames_equal(self):
        b = generate(SceneSpec(K, objects=(SceneObject(10, 10, 40, 30, 1.5),)), seed=1)
        assert np.array_equal(b.frame_prev, b.frame_next)
        assert b.motion_masks == []

    def test_depth_map_and_surfaces(self):
        spec = SceneSpec(K, background_depth=3.0, objects=(SceneObject(10, 10, 40, 30, 1.5),))
        b = generate(spec)
        assert b.depth_next[20, 20] == 1.5 and b.surface_next[20, 20] == 1
        assert b.depth_next[0, 0] == 3.0 and b.surface_next[0, 0] == 0
        assert b.frame_next.shape == (3, 48, 96) and 0 <= b.frame_next.min() and b.frame_next.max() <= 1

    def test_mover_mask(self):
        mover = SceneObject(10, 10, 40, 30, 1.5, velocity=(0.2, 0, 0))
        b = generate(SceneSpec(K, objects=(mover,)))
        assert len(b.motion_masks) == 1
        assert b.motion_masks[0].sum() == (b.surface_next == 1).sum()
        assert not b.covisible[b.motion_union].any()

    def test_seeded(self):
        spec = random_spec(3, width=96, height=48, movers=1)
        a, b = generate(spec, 3), generate(spec, 3)
        assert np.array_equal(a.frame_prev, b.frame_prev)
        assert not np.array_equal(a.frame_prev, generate(spec, 4).frame_prev)

    def test_evaluation_mask_excludes_edges_and_movers(self):
        b = generate(random_spec(1, width=192, height=64, movers=1), 1)
        m = evaluation_mask(b, margin=4)
        assert m.any()
        assert not (m & b.motion_union).any()
        assert not (m & ~b.covisible).any()


def test_spec_file_round_trip(tmp_path):
    spec = SceneSpec(K, RigidPose(rotation_about([0, 1, 0], 0.01), [0.3, 0, 0.02]), 2.5,
                     (SceneObject(1.5, 2, 30, 20, 1.2, (0.1, 0, 0.05), 9),), periods=(30.0, 90.0))
    save_spec(tmp_path / "s.cfg", spec)
    back = load_spec(tmp_path / "s.cfg")
    assert back.objects == spec.objects and back.pose.values() == spec.pose.values()
    assert back.intrinsics == spec.intrinsics and back.periods == spec.periods


def test_spec_file_minimal(tmp_path):
    (tmp_path / "s.cfg").write_text("width = 64\nheight = 32\nobject0 = 1 1 10 10 1.0 0 0 0 3\n")
    spec = load_spec(tmp_path / "s.cfg")
    assert spec.intrinsics == default_intrinsics(64, 32) and spec.pose.is_identity()
    assert len(spec.objects) == 1
