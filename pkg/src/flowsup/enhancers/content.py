"""Content variation: photometric drift/jitter, blur families, dynamic noise.

Per frame the operations run in a fixed order: brightness, saturation, hue,
gamma, then the scheduled blur, then additive Gaussian noise, with a final
clamp to [0, 1]. Pixel positions never change, so pseudo-labels need no
transformation. Identity parameters leave the frame bit-identical.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import ndimage

from .._color import hsv_to_rgb, rgb_to_hsv
from ..errors import DimensionError, ParameterError
from ..losses import LUMA_WEIGHTS
from ..types import Image

BLUR_KINDS = ("box", "gaussian", "defocus", "motion", "psf")


@dataclass(frozen=True)
class CveFrameParams:
    brightness: float = 1.0
    saturation: float = 1.0
    hue: float = 0.0          # hue rotation in turns, [-0.5, 0.5]
    gamma: float = 1.0
    blur_kind: Optional[str] = None
    blur_params: dict = field(default_factory=dict)
    noise_sigma: float = 0.0

    def __post_init__(self):
        if self.gamma <= 0:
            raise ParameterError("gamma must be positive")
        if self.noise_sigma < 0:
            raise ParameterError("noise sigma must be >= 0")
        if self.blur_kind is not None:
            if self.blur_kind not in BLUR_KINDS:
                raise ParameterError(f"unknown blur kind {self.blur_kind!r}")
            _build_kernel(self.blur_kind, self.blur_params)  # validates


@dataclass(frozen=True)
class CveSchedule:
    frames: tuple

    def __init__(self, frames):
        object.__setattr__(self, "frames", tuple(frames))

    def __len__(self):
        return len(self.frames)


@dataclass(frozen=True)
class CveScheduleParams:
    """Sampling ranges for schedules; 'drift' interpolates, 'jitter' draws iid."""

    mode: str = "drift"
    brightness_range: tuple = (0.7, 1.3)
    saturation_range: tuple = (0.7, 1.3)
    hue_range: tuple = (-0.1, 0.1)
    gamma_range: tuple = (0.8, 1.25)
    blur_kinds: tuple = BLUR_KINDS
    max_kernel: int = 7
    noise_sigma_max: float = 0.02

    def __post_init__(self):
        if self.mode not in ("drift", "jitter"):
            raise ParameterError("mode must be 'drift' or 'jitter'")
        if self.max_kernel % 2 != 1:
            raise ParameterError("max_kernel must be odd")


def _check_odd(size):
    size = int(size)
    if size < 1 or size % 2 != 1:
        raise ParameterError(f"kernel size must be odd and >= 1, got {size}")
    return size


def _build_kernel(kind, params):
    if kind == "box":
        k = _check_odd(params.get("size", 3))
        return np.full((k, k), 1.0 / (k * k))
    if kind == "gaussian":
        k = _check_odd(params.get("size", 5))
        sigma = float(params.get("sigma", max(k / 4.0, 0.5)))
        if sigma <= 0:
            raise ParameterError("gaussian sigma must be positive")
        ax = np.arange(k) - k // 2
        g1 = np.exp(-0.5 * (ax / sigma) ** 2)
        kernel = np.outer(g1, g1)
        return kernel / kernel.sum()
    if kind == "defocus":
        radius = int(params.get("radius", 2))
        if radius < 1:
            raise ParameterError("defocus radius must be >= 1")
        k = 2 * radius + 1
        ax = np.arange(k) - radius
        disk = (ax[:, None] ** 2 + ax[None, :] ** 2) <= radius ** 2
        return disk / disk.sum()
    if kind == "motion":
        length = _check_odd(params.get("length", 5))
        angle = float(params.get("angle", 0.0))
        kernel = np.zeros((length, length))
        c = length // 2
        for i in range(length):
            t = i - c
            x = int(round(c + t * np.cos(angle)))
            y = int(round(c + t * np.sin(angle)))
            kernel[y, x] = 1.0
        return kernel / kernel.sum()
    if kind == "psf":
        kernel = np.asarray(params.get("kernel"), dtype=np.float64)
        if kernel.ndim != 2 or kernel.shape[0] % 2 != 1 or kernel.shape[1] % 2 != 1:
            raise ParameterError("psf kernel must be odd-sized 2-D")
        if kernel.min() < 0 or kernel.sum() <= 0:
            raise ParameterError("psf kernel must be non-negative with positive mass")
        return kernel / kernel.sum()
    raise ParameterError(f"unknown blur kind {kind!r}")


def _apply_frame(arr: np.ndarray, fp: CveFrameParams,
                 rng: np.random.Generator) -> np.ndarray:
    out = arr
    touched = False
    if fp.brightness != 1.0:
        out = out * fp.brightness
        touched = True
    if fp.saturation != 1.0 and out.shape[2] == 3:
        gray = (out @ LUMA_WEIGHTS)[:, :, None]
        out = gray + fp.saturation * (out - gray)
        touched = True
    if fp.hue != 0.0 and out.shape[2] == 3:
        h, s, v = rgb_to_hsv(np.clip(out, 0.0, 1.0))
        out = hsv_to_rgb((h + fp.hue) % 1.0, s, v)
        touched = True
    if fp.gamma != 1.0:
        out = np.clip(out, 0.0, 1.0) ** fp.gamma
        touched = True
    if fp.blur_kind is not None:
        kernel = _build_kernel(fp.blur_kind, fp.blur_params)
        out = np.stack([ndimage.convolve(out[:, :, c], kernel, mode="nearest")
                        for c in range(out.shape[2])], axis=-1)
        touched = True
    if fp.noise_sigma > 0.0:
        out = out + rng.normal(0.0, fp.noise_sigma, size=out.shape)
        touched = True
    return np.clip(out, 0.0, 1.0) if touched else arr


def apply_cve(frames, schedule: CveSchedule, rng: np.random.Generator) -> list:
    """Apply the per-frame content schedule; noise draws spawn from ``rng``."""
    frames = list(frames)
    if len(schedule) != len(frames):
        raise DimensionError("schedule length must equal the frame count")
    # One child stream per frame keeps results independent of render order.
    seeds = rng.bit_generator.seed_seq.spawn(len(frames))
    out = []
    for t, frame in enumerate(frames):
        frame_rng = np.random.default_rng(seeds[t])
        out.append(Image(_apply_frame(frame.data, schedule.frames[t], frame_rng)))
    return out


def sample_cve_schedule(n_frames: int, rng: np.random.Generator,
                        params: CveScheduleParams = CveScheduleParams()) -> CveSchedule:
    """Draw a schedule: monotone drift or per-frame jitter plus one blur family."""
    if n_frames < 1:
        raise ParameterError("n_frames must be >= 1")

    def series(rng_range):
        lo, hi = rng_range
        if params.mode == "drift":
            start, end = rng.uniform(lo, hi, size=2)
            return np.linspace(start, end, n_frames)
        return rng.uniform(lo, hi, size=n_frames)

    brightness = series(params.brightness_range)
    saturation = series(params.saturation_range)
    hue = series(params.hue_range)
    gamma = series(params.gamma_range)

    kind = str(rng.choice(list(params.blur_kinds))) if params.blur_kinds else None
    frames = []
    for t in range(n_frames):
        blur_params = {}
        if kind == "box" or kind == "gaussian":
            size = int(rng.integers(1, params.max_kernel // 2 + 1)) * 2 + 1
            blur_params = {"size": size}
            if kind == "gaussian":
                blur_params["sigma"] = float(rng.uniform(0.5, size / 2.0))
        elif kind == "defocus":
            blur_params = {"radius": int(rng.integers(1, params.max_kernel // 2 + 1))}
        elif kind == "motion":
            length = int(rng.integers(1, params.max_kernel // 2 + 1)) * 2 + 1
            blur_params = {"length": length, "angle": float(rng.uniform(0, np.pi))}
        elif kind == "psf":
            k = params.max_kernel
            blur_params = {"kernel": rng.uniform(0.0, 1.0, size=(k, k)).tolist()}
        frames.append(CveFrameParams(
            brightness=float(brightness[t]), saturation=float(saturation[t]),
            hue=float(hue[t]), gamma=float(gamma[t]), blur_kind=kind,
            blur_params=blur_params, noise_sigma=float(rng.uniform(0.0, params.noise_sigma_max))))
    return CveSchedule(frames)
