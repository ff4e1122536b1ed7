"""Supervision toolkit for unsupervised multi-frame optical flow."""

from .types import ConfidenceMap, FlowField, Image, Sequence, VisibilityMask
from .errors import (ConfigError, DimensionError, FlowsupError, FormatError,
                     ParameterError, PlacementError, UndefinedMetricError)
from .fileio import (read_flo, read_flo_file, read_image_file, read_kitti_png,
                     read_kitti_png_file, write_flo, write_flo_file,
                     write_image_file, write_kitti_png, write_kitti_png_file)
from .viz import flow_to_color
from .warp import (ConfidenceParams, FbCheckParams, bilinear_sample,
                   confidence_map, fb_occlusion_mask, inverse_warp, warp_flow)
from .losses import (DistillPass, DoePass, LossConfig, LossValue, census_loss,
                     charbonnier, distill_loss, doe_loss, edge_aware_smoothness,
                     photometric_loss, self_distill_total, sequence_loss,
                     ssim_loss, temporal_smoothness)
from .metrics import epe, f1_all, split_metrics
from .synth import BoxSceneParams, SynthScene, export_scene, generate_box_scene
from .netref import (HIDDEN_CHANNELS, WeightSet, avg_pool2, conv_gru_cell,
                     conv2d_same, correlation_volume, feature_pyramid,
                     load_weights, pyramid_shapes, save_weights, sgw_block,
                     upsample2, validate_hidden_state)
from .enhancers import (AffineParams, AffineScheduleParams, CveFrameParams,
                        CveSchedule, CveScheduleParams, DoeParams, DoeResult,
                        MotionState, Occluder, apply_cve, apply_doe, apply_sve,
                        markov_trajectory, sample_affine_schedule,
                        sample_cve_schedule, sample_initial_state,
                        slic_superpixels)
from .config import RunConfig, default_config, load_config, parse_config

__version__ = "0.1.0"
