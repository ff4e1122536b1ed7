"""Bilinear sampling, inverse warping, occlusion checks and confidence maps.

Sampling clamps coordinates to the image border (clamp-to-edge): border
pixels are repeated rather than fabricating zeros, which would corrupt
photometric losses near the frame boundary. All functions are pure.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, ParameterError
from .types import ConfidenceMap, FlowField, Image, VisibilityMask

# Keeps the confidence ratio defined when both flows vanish.
CONFIDENCE_GUARD = 1e-6


@dataclass(frozen=True)
class FbCheckParams:
    """Thresholds of the forward-backward inequality |F+B|^2 > a1(|F|^2+|B|^2) + a2."""

    alpha1: float = 0.01
    alpha2: float = 0.5

    def __post_init__(self):
        if self.alpha1 <= 0 or self.alpha2 < 0:
            raise ParameterError("require alpha1 > 0 and alpha2 >= 0")


@dataclass(frozen=True)
class ConfidenceParams:
    """Scale delta of the exponential confidence mapping plus a hard displacement cutoff."""

    delta: float = 0.01
    max_displacement: float = 250.0

    def __post_init__(self):
        if self.delta <= 0 or self.max_displacement <= 0:
            raise ParameterError("require delta > 0 and max_displacement > 0")


def _as_array(field) -> np.ndarray:
    if isinstance(field, (Image, FlowField)):
        return field.data
    arr = np.asarray(field, dtype=np.float64)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    return arr


def sample_with_jacobian(field: np.ndarray, x: np.ndarray, y: np.ndarray):
    """Bilinearly sample an (H, W, C) array at real coordinates.

    Returns ``(values, d/dx, d/dy)``, each shaped like ``x`` plus a trailing
    channel axis. Coordinates are clamped to [0, W-1] x [0, H-1]; the spatial
    derivative is zero where the clamp is active.
    """
    h, w = field.shape[:2]
    xc = np.clip(x, 0.0, w - 1.0)
    yc = np.clip(y, 0.0, h - 1.0)
    x0 = np.floor(xc).astype(np.intp)
    y0 = np.floor(yc).astype(np.intp)
    if w > 1:
        np.minimum(x0, w - 2, out=x0)
    if h > 1:
        np.minimum(y0, h - 2, out=y0)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = (xc - x0)[..., None]
    fy = (yc - y0)[..., None]

    v00 = field[y0, x0]
    v01 = field[y0, x1]
    v10 = field[y1, x0]
    v11 = field[y1, x1]

    # Convex form: exact at lattice points (fx, fy in {0, 1}).
    top = (1.0 - fx) * v00 + fx * v01
    bot = (1.0 - fx) * v10 + fx * v11
    values = (1.0 - fy) * top + fy * bot

    dx = (1.0 - fy) * (v01 - v00) + fy * (v11 - v10)
    dy = (1.0 - fx) * (v10 - v00) + fx * (v11 - v01)
    inside_x = ((x > 0.0) & (x < w - 1.0))[..., None]
    inside_y = ((y > 0.0) & (y < h - 1.0))[..., None]
    return values, dx * inside_x, dy * inside_y


def bilinear_sample(field, at) -> np.ndarray:
    """Sample an Image or FlowField at one (x, y) point or an array of points."""
    arr = _as_array(field)
    pts = np.asarray(at, dtype=np.float64)
    single = pts.ndim == 1
    pts = np.atleast_2d(pts)
    values, _, _ = sample_with_jacobian(arr, pts[:, 0], pts[:, 1])
    return values[0] if single else values


def _grid(h, w):
    ys, xs = np.mgrid[0:h, 0:w]
    return xs.astype(np.float64), ys.astype(np.float64)


def _check_same_shape(a, b, what):
    if a.shape[:2] != b.shape[:2]:
        raise DimensionError(f"{what}: shapes {a.shape} vs {b.shape} differ")


def warp_array_with_jacobian(source: np.ndarray, flow: np.ndarray):
    """Warp an (H, W, C) array by a flow array; also return d(out)/du, d(out)/dv."""
    _check_same_shape(source, flow, "warp")
    h, w = flow.shape[:2]
    xs, ys = _grid(h, w)
    return sample_with_jacobian(source, xs + flow[:, :, 0], ys + flow[:, :, 1])


def warp_array(source: np.ndarray, flow: np.ndarray) -> np.ndarray:
    return warp_array_with_jacobian(source, flow)[0]


def inverse_warp(source: Image, flow: FlowField) -> Image:
    """Reconstruct the earlier frame: out(p) = source(p + flow(p)), per channel."""
    warped = warp_array(source.data, flow.data)
    return Image(np.clip(warped, 0.0, 1.0))


def warp_flow(target_frame_flow: FlowField, carrier: FlowField) -> FlowField:
    """Align a neighboring-frame flow: out(p) = target_frame_flow(p + carrier(p))."""
    return FlowField(warp_array(target_frame_flow.data, carrier.data))


def _fb_mismatch(forward: np.ndarray, backward: np.ndarray):
    """Squared forward-backward residual and the two squared magnitudes."""
    _check_same_shape(forward, backward, "fb check")
    sampled_bwd = warp_array(backward, forward)
    residual = ((forward + sampled_bwd) ** 2).sum(axis=2)
    mag = (forward ** 2).sum(axis=2) + (sampled_bwd ** 2).sum(axis=2)
    return residual, mag


def fb_occlusion_mask(forward: FlowField, backward: FlowField,
                      params: FbCheckParams = FbCheckParams()) -> VisibilityMask:
    """Forward-backward check: 0 where the consistency inequality fails, else 1."""
    residual, mag = _fb_mismatch(forward.data, backward.data)
    occluded = residual > params.alpha1 * mag + params.alpha2
    return VisibilityMask(np.where(occluded, 0.0, 1.0))


def confidence_map(forward: FlowField, backward: FlowField,
                   params: ConfidenceParams = ConfidenceParams()) -> ConfidenceMap:
    """Soft reliability exp(-|F+B|^2 / ((|F|^2+|B|^2) * delta + eps)).

    Locations whose forward displacement exceeds ``max_displacement`` get
    confidence 0 outright.
    """
    residual, mag = _fb_mismatch(forward.data, backward.data)
    ratio = residual / (mag * params.delta + CONFIDENCE_GUARD)
    conf = np.exp(-ratio)
    conf[forward.magnitude() > params.max_displacement] = 0.0
    return ConfidenceMap(conf)
