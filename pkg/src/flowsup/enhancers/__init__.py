"""Dynamic training enhancers: occlusion, spatial and content variation."""

from .slic import slic_superpixels
from .motion import MotionState, markov_trajectory, sample_initial_state
from .spatial import (AffineParams, AffineScheduleParams, apply_sve,
                      sample_affine_schedule)
from .content import (CveFrameParams, CveSchedule, CveScheduleParams, apply_cve,
                      sample_cve_schedule)
from .occlusion import DoeParams, DoeResult, Occluder, apply_doe

__all__ = [
    "slic_superpixels",
    "MotionState", "markov_trajectory", "sample_initial_state",
    "AffineParams", "AffineScheduleParams", "apply_sve", "sample_affine_schedule",
    "CveFrameParams", "CveSchedule", "CveScheduleParams", "apply_cve",
    "sample_cve_schedule",
    "DoeParams", "DoeResult", "Occluder", "apply_doe",
]
