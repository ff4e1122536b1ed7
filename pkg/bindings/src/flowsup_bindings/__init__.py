"""Flat array-in/array-out mirrors of the flowsup supervision operations.

Every function takes and returns plain numpy arrays so the results can be
wired into a training framework's custom-gradient mechanism. float64
C-contiguous inputs are viewed zero-copy; anything else (including float32)
is upcast with one documented copy. Results are numerically identical to the
native API: the bindings call straight into the same code paths, and seeded
enhancer outputs are bitwise reproducible.

Losses return ``(value, gradient)`` (or a tuple of gradients where noted);
pseudo-labels and aligned references are gradient-stopped exactly as in the
native API. Native flowsup exceptions propagate unchanged.
"""

from __future__ import annotations

import numpy as np

import flowsup as _fs

__version__ = _fs.__version__

__all__ = [
    "photometric_loss", "edge_aware_smoothness", "temporal_smoothness",
    "doe_loss", "distill_loss", "fb_occlusion_mask", "confidence_map",
    "apply_doe", "apply_sve", "apply_cve", "epe", "f1_all",
]


def _as_f64(arr, name):
    out = np.asarray(arr)
    if out.dtype not in (np.float32, np.float64):
        raise TypeError(f"{name}: expected a 32- or 64-bit real array, "
                        f"got {out.dtype}")
    return np.ascontiguousarray(out, dtype=np.float64)


def _image(arr, name="image"):
    return _fs.Image(_as_f64(arr, name))


def _flow(arr, name="flow"):
    return _fs.FlowField(_as_f64(arr, name))


def _mask(arr, name="mask"):
    return _fs.VisibilityMask(_as_f64(arr, name))


def photometric_loss(frame, next_frame, flow, mask, kind="charbonnier",
                     **config):
    """Warp loss; returns (value, d value / d flow) with flow-shaped gradient."""
    cfg = _fs.LossConfig(**config) if config else _fs.LossConfig()
    lv = _fs.photometric_loss(_image(frame, "frame"),
                              _image(next_frame, "next_frame"),
                              _flow(flow), _mask(mask), kind, cfg)
    return lv.value, lv.gradients["flow"]


def edge_aware_smoothness(flow, image, order=1, edge_lambda=150.0):
    lv = _fs.edge_aware_smoothness(_flow(flow), _image(image), order,
                                   edge_lambda)
    return lv.value, lv.gradients["flow"]


def temporal_smoothness(flow_prev, flow_cur, flow_next, flow_cur_bwd,
                        mask_prev, mask_next, eps_d=1e-2, eps=0.01, q=0.4):
    """Returns (value, d value / d flow_cur); the reference flows are
    gradient-stopped, so their gradients are identically zero."""
    lv = _fs.temporal_smoothness(
        _flow(flow_prev, "flow_prev"), _flow(flow_cur, "flow_cur"),
        _flow(flow_next, "flow_next"), _flow(flow_cur_bwd, "flow_cur_bwd"),
        _mask(mask_prev, "mask_prev"), _mask(mask_next, "mask_next"),
        eps_d, eps, q)
    return lv.value, lv.gradients["flow_c"]


def doe_loss(flow, pseudo, mask, frame, next_frame, mode="mixed", **config):
    cfg = _fs.LossConfig(**config) if config else _fs.LossConfig()
    lv = _fs.doe_loss(_flow(flow), _flow(pseudo, "pseudo"), _mask(mask),
                      _image(frame, "frame"), _image(next_frame, "next_frame"),
                      mode, cfg)
    return lv.value, lv.gradients["flow"]


def distill_loss(flow_pred, pseudo, confidence=None, eps=0.01, q=0.4):
    conf = None if confidence is None else \
        _fs.ConfidenceMap(_as_f64(confidence, "confidence"))
    lv = _fs.distill_loss(_flow(flow_pred, "flow_pred"),
                          _flow(pseudo, "pseudo"), conf, eps, q)
    return lv.value, lv.gradients["flow"]


def fb_occlusion_mask(forward, backward, alpha1=0.01, alpha2=0.5):
    """Returns the {0,1} visibility map as a float array."""
    mask = _fs.fb_occlusion_mask(_flow(forward, "forward"),
                                 _flow(backward, "backward"),
                                 _fs.FbCheckParams(alpha1, alpha2))
    return np.array(mask.data)


def confidence_map(forward, backward, delta=0.01, max_displacement=250.0):
    conf = _fs.confidence_map(_flow(forward, "forward"),
                              _flow(backward, "backward"),
                              _fs.ConfidenceParams(delta, max_displacement))
    return np.array(conf.data)


def apply_doe(frames, pseudo_flows, seed, **params):
    """Occlusion enhancer over an (N, H, W, C) stack and (N-1, H, W, 2) labels.

    Returns (frames, pseudo_flows, masks) as stacked arrays; bitwise
    reproducible for a fixed seed.
    """
    frame_stack = _as_f64(frames, "frames")
    flow_stack = _as_f64(pseudo_flows, "pseudo_flows")
    doe_params = _fs.DoeParams(seed=seed, **params)
    result = _fs.apply_doe([_fs.Image(f) for f in frame_stack],
                           [_fs.FlowField(f) for f in flow_stack], doe_params)
    return (np.stack([f.data for f in result.frames]),
            np.stack([f.data for f in result.pseudo_flows]),
            np.stack([m.data for m in result.masks]))


def apply_sve(frames, pseudo_flows, affines):
    """Affine enhancer; ``affines`` is (N, 2, 3) with [linear | offset]."""
    frame_stack = _as_f64(frames, "frames")
    flow_stack = _as_f64(pseudo_flows, "pseudo_flows")
    mats = _as_f64(affines, "affines")
    if mats.ndim != 3 or mats.shape[1:] != (2, 3):
        raise ValueError(f"affines must be (N, 2, 3), got {mats.shape}")
    schedule = [_fs.AffineParams(m[:, :2], m[:, 2]) for m in mats]
    out_frames, out_flows = _fs.apply_sve([_fs.Image(f) for f in frame_stack],
                                          [_fs.FlowField(f) for f in flow_stack],
                                          schedule)
    return (np.stack([f.data for f in out_frames]),
            np.stack([f.data for f in out_flows]))


def apply_cve(frames, schedule, seed):
    """Content enhancer; ``schedule`` is one parameter dict per frame."""
    frame_stack = _as_f64(frames, "frames")
    frame_params = [_fs.CveFrameParams(**entry) for entry in schedule]
    out = _fs.apply_cve([_fs.Image(f) for f in frame_stack],
                        _fs.CveSchedule(frame_params),
                        np.random.default_rng(seed))
    return np.stack([f.data for f in out])


def epe(pred, gt, mask=None):
    m = None if mask is None else _mask(mask)
    return _fs.epe(_flow(pred, "pred"), _flow(gt, "gt"), m)


def f1_all(pred, gt, mask=None):
    m = None if mask is None else _mask(mask)
    return _fs.f1_all(_flow(pred, "pred"), _flow(gt, "gt"), m)
