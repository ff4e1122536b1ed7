"""Core dense data types: images, flow fields, masks and frame sequences.

All types copy their payload into a read-only float64 array at construction
and are safe to share across threads. Coordinates follow the image convention:
p = (x, y) with x growing rightward and y downward, row-major storage, and a
flow vector (u, v) displaces a pixel by u columns and v rows.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence as TySequence

import numpy as np

from .errors import DimensionError, ParameterError


def _frozen(data, shape) -> np.ndarray:
    arr = np.array(data, dtype=np.float64, copy=True)
    if arr.shape != shape:
        try:
            arr = arr.reshape(shape)
        except ValueError as exc:
            raise DimensionError(f"expected shape {shape}, got {arr.shape}") from exc
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class Image:
    """H x W x C intensity grid with every value in [0, 1]."""

    data: np.ndarray

    def __init__(self, data):
        arr = np.asarray(data, dtype=np.float64)
        if arr.ndim == 2:
            arr = arr[:, :, None]
        if arr.ndim != 3 or arr.shape[2] not in (1, 3):
            raise DimensionError(f"image must be HxWx1 or HxWx3, got {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise DimensionError("image must be non-empty")
        if not np.all(np.isfinite(arr)):
            raise ParameterError("image contains non-finite values")
        if arr.min() < 0.0 or arr.max() > 1.0:
            raise ParameterError("image intensities must lie in [0, 1]")
        object.__setattr__(self, "data", _frozen(arr, arr.shape))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]


@dataclass(frozen=True)
class FlowField:
    """H x W x 2 per-pixel displacement map (u, v), in pixels, all finite."""

    data: np.ndarray

    def __init__(self, data):
        arr = np.asarray(data, dtype=np.float64)
        if arr.ndim != 3 or arr.shape[2] != 2:
            raise DimensionError(f"flow must be HxWx2, got {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ParameterError("flow contains NaN or Inf")
        object.__setattr__(self, "data", _frozen(arr, arr.shape))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def u(self) -> np.ndarray:
        return self.data[:, :, 0]

    @property
    def v(self) -> np.ndarray:
        return self.data[:, :, 1]

    def magnitude(self) -> np.ndarray:
        return np.hypot(self.u, self.v)


@dataclass(frozen=True)
class VisibilityMask:
    """H x W map in {0, 1}; 1 marks a pixel that stays visible (non-occluded)."""

    data: np.ndarray

    def __init__(self, data):
        arr = np.asarray(data, dtype=np.float64)
        if arr.ndim == 3 and arr.shape[2] == 1:
            arr = arr[:, :, 0]
        if arr.ndim != 2:
            raise DimensionError(f"mask must be HxW, got {arr.shape}")
        if not np.all((arr == 0.0) | (arr == 1.0)):
            raise ParameterError("mask values must be exactly 0 or 1")
        object.__setattr__(self, "data", _frozen(arr, arr.shape))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class ConfidenceMap:
    """H x W map of soft reliability weights in [0, 1]."""

    data: np.ndarray

    def __init__(self, data):
        arr = np.asarray(data, dtype=np.float64)
        if arr.ndim == 3 and arr.shape[2] == 1:
            arr = arr[:, :, 0]
        if arr.ndim != 2:
            raise DimensionError(f"confidence must be HxW, got {arr.shape}")
        if not np.all(np.isfinite(arr)) or arr.min() < 0.0 or arr.max() > 1.0:
            raise ParameterError("confidence values must lie in [0, 1]")
        object.__setattr__(self, "data", _frozen(arr, arr.shape))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class Sequence:
    """Ordered frames plus optional per-pair flows and visibility masks.

    With N frames there are N-1 forward flows (frame t -> t+1) and N-1
    backward flows (frame t+1 -> t) when present. All members must share
    the same spatial size.
    """

    frames: tuple
    forward_flows: Optional[tuple] = None
    backward_flows: Optional[tuple] = None
    masks: Optional[tuple] = None

    def __init__(self, frames: TySequence[Image], forward_flows=None,
                 backward_flows=None, masks=None):
        frames = tuple(frames)
        if len(frames) < 2:
            raise ParameterError("a sequence needs at least 2 frames")
        h, w = frames[0].height, frames[0].width
        for f in frames:
            if (f.height, f.width) != (h, w):
                raise DimensionError("all frames must share height/width")

        def check_flows(flows, name):
            if flows is None:
                return None
            flows = tuple(flows)
            if len(flows) != len(frames) - 1:
                raise DimensionError(f"{name} must have N-1 entries")
            for fl in flows:
                if (fl.height, fl.width) != (h, w):
                    raise DimensionError(f"{name} size mismatch")
            return flows

        forward_flows = check_flows(forward_flows, "forward_flows")
        backward_flows = check_flows(backward_flows, "backward_flows")
        if masks is not None:
            masks = tuple(masks)
            for m in masks:
                if (m.height, m.width) != (h, w):
                    raise DimensionError("mask size mismatch")
        object.__setattr__(self, "frames", frames)
        object.__setattr__(self, "forward_flows", forward_flows)
        object.__setattr__(self, "backward_flows", backward_flows)
        object.__setattr__(self, "masks", masks)

    def __len__(self) -> int:
        return len(self.frames)

    @property
    def height(self) -> int:
        return self.frames[0].height

    @property
    def width(self) -> int:
        return self.frames[0].width
