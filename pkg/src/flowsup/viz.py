"""Flow visualization: direction as hue, magnitude as saturation."""

from __future__ import annotations

import numpy as np

from ._color import hsv_to_rgb
from .errors import ParameterError
from .types import FlowField, Image

MIN_AUTO_MAGNITUDE = 1e-6


def flow_to_color(flow: FlowField, max_magnitude: float | None = None) -> Image:
    """Render a flow field on the color wheel.

    Hue encodes the flow direction (angle of (u, v), red at angle 0),
    saturation the magnitude relative to ``max_magnitude`` (clamped to 1),
    so zero flow renders white. ``max_magnitude=None`` scales by the field's
    maximum norm, floored at 1e-6 to keep all-zero fields well defined.
    """
    if max_magnitude is None:
        max_magnitude = max(float(flow.magnitude().max()), MIN_AUTO_MAGNITUDE)
    if max_magnitude <= 0:
        raise ParameterError("max_magnitude must be positive")
    mag = flow.magnitude()
    angle = np.arctan2(flow.v, flow.u)
    hue = (angle / (2.0 * np.pi)) % 1.0
    sat = np.clip(mag / max_magnitude, 0.0, 1.0)
    val = np.ones_like(sat)
    return Image(hsv_to_rgb(hue, sat, val))
