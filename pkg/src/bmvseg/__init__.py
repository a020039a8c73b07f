"""Video segmentation acceleration with block motion vectors.

Keyframe features are carried to intermediate frames by warping them with
block motion fields, either forward only (propagation) or from both
enclosing keyframes with weighted fusion (interpolation).
"""
from .evaluate import (IntervalReport, fusion_ablation, intermediate_cost_reduction, min_accuracy,
                       miou, per_offset_miou, speedup, sweep, throughput_model)
from .fusion import FeatureFuser, FusionWeights, alpha_for, fit_conv_fusion, fuse
from .model import FeatureNetwork, TaskNetwork, ToyModel, toy_features, toy_task
from .motion import BlockMotionEstimator, MatchParams, estimate_motion, estimate_stream, negate, to_warp_field
from .pipeline import StreamResult, VideoSegmenter, run_baseline, run_inter, run_prop
from .io import load_frames, load_segmaps, read_sidecar, save_frames, save_segmaps, write_sidecar
from .scene import SceneSpec, SyntheticScene, bundled_scene, fit_scene_model, load_spec, make_scene
from .types import (IGNORE_LABEL, FeatureMap, Frame, MotionField, PipelineConfig, SegMap,
                    WarpField)
from .warp import bilinear_warp, propagate_chain, warp_displacement

__version__ = "0.1.0"
