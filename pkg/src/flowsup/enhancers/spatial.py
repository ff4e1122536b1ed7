"""Spatial variation: per-frame affine resampling with consistent flow labels."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DimensionError, ParameterError
from ..types import FlowField, Image
from ..warp import sample_with_jacobian

MIN_DET = 1e-6


@dataclass(frozen=True)
class AffineParams:
    """Pixel-coordinate map tau(p) = linear @ (x, y) + offset."""

    linear: np.ndarray   # 2x2
    offset: np.ndarray   # 2

    def __init__(self, linear, offset):
        lin = np.array(linear, dtype=np.float64).reshape(2, 2)
        off = np.array(offset, dtype=np.float64).reshape(2)
        if abs(np.linalg.det(lin)) <= MIN_DET:
            raise ParameterError("affine linear part is singular")
        lin.flags.writeable = False
        off.flags.writeable = False
        object.__setattr__(self, "linear", lin)
        object.__setattr__(self, "offset", off)

    @classmethod
    def identity(cls) -> "AffineParams":
        return cls(np.eye(2), np.zeros(2))

    def apply(self, xy: np.ndarray) -> np.ndarray:
        """Map an (..., 2) array of (x, y) points."""
        return xy @ self.linear.T + self.offset

    def inverse(self) -> "AffineParams":
        inv = np.linalg.inv(self.linear)
        return AffineParams(inv, -inv @ self.offset)


@dataclass(frozen=True)
class AffineScheduleParams:
    """Gaussian random-walk steps for rotation, log-scale, shear, translation."""

    sigma_rot: float = 0.01
    sigma_log_scale: float = 0.005
    sigma_shear: float = 0.005
    sigma_trans: float = 0.5
    init_rot: float = 0.0
    init_log_scale: float = 0.0
    init_shear: float = 0.0
    init_trans: tuple = (0.0, 0.0)

    def __post_init__(self):
        for name in ("sigma_rot", "sigma_log_scale", "sigma_shear", "sigma_trans"):
            if getattr(self, name) < 0:
                raise ParameterError(f"{name} must be >= 0")


def _compose_about_center(rot, log_scale, shear, trans, center):
    c, s = np.cos(rot), np.sin(rot)
    linear = (np.array([[c, -s], [s, c]])
              @ (np.exp(log_scale) * np.eye(2))
              @ np.array([[1.0, shear], [0.0, 1.0]]))
    offset = np.asarray(center) - linear @ np.asarray(center) + np.asarray(trans)
    return linear, offset


def sample_affine_schedule(n_frames: int, height: int, width: int,
                           params: AffineScheduleParams,
                           rng: np.random.Generator) -> list:
    """Smoothly-varying per-frame affines (random walk about the image center)."""
    if n_frames < 1:
        raise ParameterError("n_frames must be >= 1")
    center = ((width - 1) / 2.0, (height - 1) / 2.0)
    rot, log_scale, shear = params.init_rot, params.init_log_scale, params.init_shear
    trans = np.array(params.init_trans, dtype=np.float64)
    schedule = []
    for _ in range(n_frames):
        for _attempt in range(100):
            linear, offset = _compose_about_center(rot, log_scale, shear, trans, center)
            if abs(np.linalg.det(linear)) > MIN_DET:
                break
            shear = rng.normal(shear, max(params.sigma_shear, 1e-3))
        schedule.append(AffineParams(linear, offset))
        rot = rng.normal(rot, params.sigma_rot)
        log_scale = rng.normal(log_scale, params.sigma_log_scale)
        shear = rng.normal(shear, params.sigma_shear)
        trans = rng.normal(trans, params.sigma_trans)
    return schedule


def _pixel_grid(h, w):
    ys, xs = np.mgrid[0:h, 0:w]
    return np.stack([xs, ys], axis=-1).astype(np.float64)


def _sample_at(arr, coords):
    values, _, _ = sample_with_jacobian(arr, coords[..., 0], coords[..., 1])
    return values


def apply_sve(frames, pseudo_flows, affines) -> tuple:
    """Resample a sequence through per-frame affines and retarget its labels.

    Images become I_t(tau_t(p)). The pseudo-label of pair (t, t+1) is rebuilt
    so it stays the true flow of the transformed pair: per lattice point the
    new endpoint is pushed through the inverse of tau_{t+1}, the start point
    through the inverse of tau_t, and the resulting field is resampled at
    tau_t(p).
    """
    frames = list(frames)
    pseudo_flows = list(pseudo_flows)
    affines = list(affines)
    if len(affines) != len(frames):
        raise DimensionError("need one affine per frame")
    if len(pseudo_flows) != len(frames) - 1:
        raise DimensionError("need N-1 pseudo flows")

    h, w = frames[0].height, frames[0].width
    grid = _pixel_grid(h, w)
    warped_coords = [affines[t].apply(grid) for t in range(len(frames))]
    out_frames = [Image(np.clip(_sample_at(frames[t].data, warped_coords[t]), 0.0, 1.0))
                  for t in range(len(frames))]

    out_flows = []
    for t in range(len(pseudo_flows)):
        inv_t = affines[t].inverse()
        inv_t1 = affines[t + 1].inverse()
        endpoint = grid + pseudo_flows[t].data
        flow_new = inv_t1.apply(endpoint) - inv_t.apply(grid)
        out_flows.append(FlowField(_sample_at(flow_new, warped_coords[t])))
    return out_frames, out_flows
