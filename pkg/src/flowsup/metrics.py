"""Flow evaluation metrics: endpoint error, KITTI F1, occlusion splits."""

from __future__ import annotations

import numpy as np

from .errors import DimensionError, UndefinedMetricError
from .types import FlowField, VisibilityMask

F1_ABS_THRESHOLD = 3.0
F1_REL_THRESHOLD = 0.05


def _endpoint_errors(pred: FlowField, gt: FlowField) -> np.ndarray:
    if pred.data.shape != gt.data.shape:
        raise DimensionError("pred/gt shape mismatch")
    d = pred.data - gt.data
    return np.sqrt((d ** 2).sum(axis=2))


def _mask_array(mask, shape):
    if mask is None:
        return np.ones(shape, dtype=bool)
    arr = mask.data.astype(bool)
    if arr.shape != shape:
        raise DimensionError("mask shape mismatch")
    return arr


def epe(pred: FlowField, gt: FlowField, mask: VisibilityMask | None = None) -> float:
    """Mean Euclidean endpoint error over the masked pixels."""
    err = _endpoint_errors(pred, gt)
    m = _mask_array(mask, err.shape)
    if not m.any():
        raise UndefinedMetricError("EPE over an empty mask")
    return float(err[m].mean())


def f1_all(pred: FlowField, gt: FlowField, mask: VisibilityMask | None = None) -> float:
    """Percentage of pixels wrong by both > 3 px and > 5% of |gt| (KITTI rule)."""
    err = _endpoint_errors(pred, gt)
    m = _mask_array(mask, err.shape)
    if not m.any():
        raise UndefinedMetricError("F1 over an empty mask")
    gt_mag = gt.magnitude()
    bad = (err > F1_ABS_THRESHOLD) & (err > F1_REL_THRESHOLD * gt_mag)
    return float(bad[m].mean() * 100.0)


def split_metrics(pred: FlowField, gt: FlowField, occ_mask: VisibilityMask) -> dict:
    """EPE over all pixels plus the non-occluded / occluded partitions.

    An empty partition is reported as absent (key missing from the result).
    """
    err = _endpoint_errors(pred, gt)
    vis = _mask_array(occ_mask, err.shape)
    out = {"all": float(err.mean())}
    if vis.any():
        out["noc"] = float(err[vis].mean())
    if (~vis).any():
        out["occ"] = float(err[~vis].mean())
    return out
