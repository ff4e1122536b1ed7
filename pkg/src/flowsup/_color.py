"""Vectorized RGB/HSV conversions on float arrays in [0, 1]."""

from __future__ import annotations

import numpy as np


def hsv_to_rgb(h, s, v):
    h6 = (h % 1.0) * 6.0
    sector = np.floor(h6).astype(int) % 6
    f = h6 - np.floor(h6)
    p = v * (1.0 - s)
    q = v * (1.0 - s * f)
    t = v * (1.0 - s * (1.0 - f))
    table = np.stack([
        np.stack([v, t, p], axis=-1),
        np.stack([q, v, p], axis=-1),
        np.stack([p, v, t], axis=-1),
        np.stack([p, q, v], axis=-1),
        np.stack([t, p, v], axis=-1),
        np.stack([v, p, q], axis=-1),
    ], axis=0)
    return np.take_along_axis(table, sector[None, ..., None], axis=0)[0]


def rgb_to_hsv(rgb):
    r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
    maxc = rgb.max(axis=-1)
    minc = rgb.min(axis=-1)
    delta = maxc - minc
    safe = np.where(delta == 0.0, 1.0, delta)
    h = np.zeros_like(maxc)
    h = np.where(maxc == r, ((g - b) / safe) % 6.0, h)
    h = np.where((maxc == g) & (maxc != r), (b - r) / safe + 2.0, h)
    h = np.where((maxc == b) & (maxc != r) & (maxc != g), (r - g) / safe + 4.0, h)
    h = np.where(delta == 0.0, 0.0, h / 6.0)
    s = np.where(maxc == 0.0, 0.0, delta / np.where(maxc == 0.0, 1.0, maxc))
    return h, s, maxc
