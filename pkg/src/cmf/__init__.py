"""Channel-wise motion features: plane-sweep cost volumes, a 3D motion
network, depth-range policies, losses and motion-segmentation metrics."""

from ._backend import backend_name, native_available, set_backend, set_threads, use_backend
from .costvolume import (CostVolume4D, DepthSamples, build_cost_volume, channel_mean_volume,
                         depth_argmin_map, linear_depth_samples)
from .depthrange import DepthRange, ema_update, object_mean_depths, percentile_range, preset
from .geometry import Intrinsics, RigidPose, SampleGrid, bilinear_sample, project_plane, warp_feature_plane
from .metrics import InstanceSet, MetricReport, caq, evaluate, match_instances
from .motionnet import MotionFeatures, MotionNetConfig, MotionNetParams, forward, guided_excitation
from .pipeline import PipelineConfig, run_pipeline
from .tensor import Conv3dSpec, ShapeError, conv3d, pointwise_conv2d, transposed_conv3d

__version__ = "0.1.0"

__all__ = [
    "backend_name", "native_available", "set_backend", "set_threads", "use_backend",
    "CostVolume4D", "DepthSamples", "build_cost_volume", "channel_mean_volume", "depth_argmin_map",
    "linear_depth_samples", "DepthRange", "ema_update", "object_mean_depths", "percentile_range", "preset",
    "Intrinsics", "RigidPose", "SampleGrid", "bilinear_sample", "project_plane", "warp_feature_plane",
    "InstanceSet", "MetricReport", "caq", "evaluate", "match_instances",
    "MotionFeatures", "MotionNetConfig", "MotionNetParams", "forward", "guided_excitation",
    "PipelineConfig", "run_pipeline", "Conv3dSpec", "ShapeError", "conv3d", "pointwise_conv2d",
    "transposed_conv3d",
]
