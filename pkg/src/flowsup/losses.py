"""Training losses, each returning a scalar value plus analytic gradients.

Every loss differentiates through its own math by hand; the bilinear warp
contributes its piecewise-linear jacobian via ``warp_array_with_jacobian``.
Losses over flow fields reduce the two channels with a mean so that a
per-pixel robust map composes with per-pixel masks and decay weights.
Any mask-normalized term with empty support contributes exactly 0 with an
exactly-zero gradient.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import ConfigError, DimensionError, ParameterError
from .types import ConfidenceMap, FlowField, Image, VisibilityMask
from .warp import FbCheckParams, fb_occlusion_mask, warp_array, warp_array_with_jacobian

SSIM_C1 = 0.01 ** 2
SSIM_C2 = 0.03 ** 2
# Census soft-binarization constants, per the robust-census lineage.
CENSUS_SIGNATURE_GUARD = 0.81
CENSUS_HAMMING_THRESH = 0.1
LUMA_WEIGHTS = np.array([0.2989, 0.587, 0.114])

PHOTOMETRIC_KINDS = ("charbonnier", "ssim", "census")


@dataclass(frozen=True)
class LossConfig:
    """Scalar hyperparameters for every loss term.

    ``lambda1``/``lambda2`` weight spatial and temporal smoothness in the
    per-pair loss; ``lambda3..5`` weight the occlusion, spatial-variation and
    content-variation distillation terms; ``w_tsm`` additionally scales the
    temporal term (the effective temporal weight is lambda2 * w_tsm).
    """

    lambda1: float = 50.0
    lambda2: float = 0.005
    lambda3: float = 0.3
    lambda4: float = 0.3
    lambda5: float = 0.3
    w_tsm: float = 0.05
    charbonnier_eps: float = 0.01
    charbonnier_q: float = 0.4
    smooth_edge_lambda: float = 150.0
    smooth_order: int = 1
    photometric_kind: str = "charbonnier"
    ssim_window: int = 3
    census_window: int = 7
    temporal_eps_d: float = 1e-2
    fb_alpha1: float = 0.01
    fb_alpha2: float = 0.5
    confidence_delta: float = 0.01
    max_displacement: float = 250.0
    doe_mode: str = "mixed"

    def __post_init__(self):
        for name in ("lambda1", "lambda2", "lambda3", "lambda4", "lambda5", "w_tsm"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0")
        if self.charbonnier_eps <= 0:
            raise ConfigError("charbonnier_eps must be > 0")
        if not 0 < self.charbonnier_q <= 1:
            raise ConfigError("charbonnier_q must be in (0, 1]")
        if self.smooth_order not in (1, 2):
            raise ConfigError("smooth_order must be 1 or 2")
        if self.photometric_kind not in PHOTOMETRIC_KINDS:
            raise ConfigError(f"photometric_kind must be one of {PHOTOMETRIC_KINDS}")
        if self.ssim_window % 2 != 1 or self.census_window % 2 != 1:
            raise ConfigError("SSIM/census windows must be odd")
        if self.doe_mode not in ("sparse", "mixed"):
            raise ConfigError("doe_mode must be 'sparse' or 'mixed'")

    @classmethod
    def sintel(cls) -> "LossConfig":
        return cls(lambda1=50.0, lambda2=0.005, lambda3=0.3, lambda4=0.3,
                   lambda5=0.3, w_tsm=0.05, smooth_order=1)

    @classmethod
    def kitti(cls) -> "LossConfig":
        return cls(lambda1=75.0, lambda2=0.001, lambda3=0.2, lambda4=0.2,
                   lambda5=0.2, w_tsm=0.01, smooth_order=2)

    @property
    def fb_params(self) -> FbCheckParams:
        return FbCheckParams(self.fb_alpha1, self.fb_alpha2)


@dataclass(frozen=True)
class LossValue:
    """Scalar loss with per-input gradient maps and a term breakdown."""

    value: float
    gradients: dict
    breakdown: dict = field(default_factory=dict)

    def __post_init__(self):
        for name, g in self.gradients.items():
            if not np.all(np.isfinite(g)):
                raise ParameterError(f"non-finite gradient for {name}")


def _rho(d, eps, q):
    return (np.abs(d) + eps) ** q


def _rho_prime(d, eps, q):
    # sign(0) = 0 is the subgradient choice at the kink.
    return q * (np.abs(d) + eps) ** (q - 1.0) * np.sign(d)


def _same_shape(a, b):
    if a.shape != b.shape:
        raise DimensionError(f"shapes {a.shape} vs {b.shape} differ")


def charbonnier(a, b, eps: float = 0.01, q: float = 0.4) -> LossValue:
    """Robust distance mean((|a - b| + eps)^q) with gradients for both sides."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    _same_shape(a, b)
    d = a - b
    value = float(_rho(d, eps, q).mean())
    ga = _rho_prime(d, eps, q) / d.size
    return LossValue(value, {"a": ga, "b": -ga})


# ---------------------------------------------------------------------------
# SSIM


def _window_means(x, ws):
    win = sliding_window_view(x, (ws, ws), axis=(0, 1))
    return win.mean(axis=(-2, -1))


def _scatter_windows(alpha, ws, h, w):
    # Adjoint of valid-window pooling: spread each window value back over its
    # ws x ws support. alpha has the valid-center shape (plus channels).
    m = ws // 2
    full = np.zeros((h, w) + alpha.shape[2:], dtype=np.float64)
    full[m:h - m, m:w - m] = alpha
    out = np.zeros_like(full)
    for dy in range(-m, m + 1):
        ys = slice(max(0, dy), h + min(0, dy))
        yd = slice(max(0, -dy), h + min(0, -dy))
        for dx in range(-m, m + 1):
            xs = slice(max(0, dx), w + min(0, dx))
            xd = slice(max(0, -dx), w + min(0, -dx))
            out[yd, xd] += full[ys, xs]
    return out


def _ssim_cost(a, b, ws, weights):
    """Weighted mean of (1 - SSIM)/2 over valid window centers.

    ``weights`` is a per-center map (already cropped to the valid region).
    Returns (value, dL/da, dL/db); empty support yields (0, 0, 0).
    """
    h, w, c = a.shape
    if h < ws or w < ws:
        raise DimensionError(f"image {h}x{w} smaller than SSIM window {ws}")
    wsum = float(weights.sum())
    if wsum == 0.0:
        return 0.0, np.zeros_like(a), np.zeros_like(b)

    n = ws * ws
    mu_a = _window_means(a, ws)
    mu_b = _window_means(b, ws)
    sig_a = _window_means(a * a, ws) - mu_a ** 2
    sig_b = _window_means(b * b, ws) - mu_b ** 2
    sig_ab = _window_means(a * b, ws) - mu_a * mu_b

    a1 = 2.0 * mu_a * mu_b + SSIM_C1
    a2 = 2.0 * sig_ab + SSIM_C2
    b1 = mu_a ** 2 + mu_b ** 2 + SSIM_C1
    b2 = sig_a + sig_b + SSIM_C2
    s = (a1 * a2) / (b1 * b2)

    cost = (1.0 - s) / 2.0
    value = float((cost.mean(axis=2) * weights).sum() / wsum)

    # d value / d s per window center and channel.
    coef = -(weights / (2.0 * c * wsum))[:, :, None]
    ds_dmu_a = coef * (2.0 * mu_b * a2 / (b1 * b2) - s * 2.0 * mu_a / b1)
    ds_dmu_b = coef * (2.0 * mu_a * a2 / (b1 * b2) - s * 2.0 * mu_b / b1)
    ds_dsig = coef * (-s / b2)          # shared by sig_a and sig_b
    ds_dsig_ab = coef * (2.0 * a1 / (b1 * b2))

    def backprop(x_self, mu_self, x_other, mu_other, d_mu, d_sig):
        # d sigma_self / d x_i = 2 (x_i - mu_self)/n, d sigma_ab / d x_i =
        # (y_i - mu_other)/n, d mu_self / d x_i = 1/n, summed over windows.
        g = _scatter_windows(d_mu - 2.0 * d_sig * mu_self - ds_dsig_ab * mu_other,
                             ws, h, w)
        g += 2.0 * x_self * _scatter_windows(d_sig, ws, h, w)
        g += x_other * _scatter_windows(ds_dsig_ab, ws, h, w)
        return g / n

    ga = backprop(a, mu_a, b, mu_b, ds_dmu_a, ds_dsig)
    gb = backprop(b, mu_b, a, mu_a, ds_dmu_b, ds_dsig)
    return value, ga, gb


def ssim_loss(a: Image, b: Image, window: int = 3) -> LossValue:
    """Structural dissimilarity mean((1 - SSIM)/2) over valid window centers."""
    if window % 2 != 1:
        raise ParameterError("SSIM window must be odd")
    _same_shape(a.data, b.data)
    m = window // 2
    weights = np.ones((a.height - 2 * m, a.width - 2 * m))
    value, ga, gb = _ssim_cost(a.data, b.data, window, weights)
    return LossValue(value, {"a": ga, "b": gb})


# ---------------------------------------------------------------------------
# Census


def _to_intensity(img):
    if img.shape[2] == 1:
        g = img[:, :, 0] * 255.0
        dg = np.full(1, 255.0)
    else:
        g = img @ LUMA_WEIGHTS * 255.0
        dg = LUMA_WEIGHTS * 255.0
    return g, dg


def _census_offsets(ws):
    m = ws // 2
    return [(dy, dx) for dy in range(-m, m + 1) for dx in range(-m, m + 1)]


def _census_cost(a, b, ws, weights, eps, q):
    """Soft census distance, Charbonnier-aggregated over valid centers.

    Per neighbor offset the intensity difference d is squashed to
    d/sqrt(0.81 + d^2); the per-neighbor signature mismatch t contributes
    t^2/(0.1 + t^2) to a soft Hamming distance, which is then pushed through
    (|.| + eps)^q and weighted-averaged. Returns (value, dL/da, dL/db).
    """
    h, w, c = a.shape
    if h < ws or w < ws:
        raise DimensionError(f"image {h}x{w} smaller than census window {ws}")
    wsum = float(weights.sum())
    if wsum == 0.0:
        return 0.0, np.zeros_like(a), np.zeros_like(b)

    ga_img, dga = _to_intensity(a)
    gb_img, dgb = _to_intensity(b)
    m = ws // 2
    hc, wc = h - 2 * m, w - 2 * m
    center = (slice(m, h - m), slice(m, w - m))

    # (Hc, Wc, ws, ws) neighbor-minus-center differences, soft-binarized.
    da = sliding_window_view(ga_img, (ws, ws)) - ga_img[center][:, :, None, None]
    db = sliding_window_view(gb_img, (ws, ws)) - gb_img[center][:, :, None, None]
    sa = da / np.sqrt(CENSUS_SIGNATURE_GUARD + da * da)
    sb = db / np.sqrt(CENSUS_SIGNATURE_GUARD + db * db)
    t = sa - sb
    soft = t * t / (CENSUS_HAMMING_THRESH + t * t)
    dist = soft.sum(axis=(-2, -1))

    value = float((_rho(dist, eps, q) * weights).sum() / wsum)
    coef = weights / wsum * _rho_prime(dist, eps, q)

    h_prime = 2.0 * CENSUS_HAMMING_THRESH * t / (CENSUS_HAMMING_THRESH + t * t) ** 2
    sa_prime = CENSUS_SIGNATURE_GUARD / (CENSUS_SIGNATURE_GUARD + da * da) ** 1.5
    sb_prime = CENSUS_SIGNATURE_GUARD / (CENSUS_SIGNATURE_GUARD + db * db) ** 1.5
    g_a = coef[:, :, None, None] * h_prime * sa_prime
    g_b = -coef[:, :, None, None] * h_prime * sb_prime

    grad_ga = np.zeros((h, w))
    grad_gb = np.zeros((h, w))
    for dy, dx in _census_offsets(ws):
        nb = (slice(m + dy, m + dy + hc), slice(m + dx, m + dx + wc))
        grad_ga[nb] += g_a[:, :, m + dy, m + dx]
        grad_gb[nb] += g_b[:, :, m + dy, m + dx]
    grad_ga[center] -= g_a.sum(axis=(-2, -1))
    grad_gb[center] -= g_b.sum(axis=(-2, -1))

    return value, grad_ga[:, :, None] * dga, grad_gb[:, :, None] * dgb


def census_loss(a: Image, b: Image, window: int = 7,
                eps: float = 0.01, q: float = 0.4) -> LossValue:
    """Soft census (ternary) mismatch, invariant to additive brightness shifts."""
    if window % 2 != 1:
        raise ParameterError("census window must be odd")
    _same_shape(a.data, b.data)
    m = window // 2
    weights = np.ones((a.height - 2 * m, a.width - 2 * m))
    value, ga, gb = _census_cost(a.data, b.data, window, weights, eps, q)
    return LossValue(value, {"a": ga, "b": gb})


# ---------------------------------------------------------------------------
# Photometric warp loss


def _flow_chain(grad_image, dwdx, dwdy):
    # Chain an image-space gradient through the warp jacobian into (u, v).
    gu = (grad_image * dwdx).sum(axis=2)
    gv = (grad_image * dwdy).sum(axis=2)
    return np.stack([gu, gv], axis=-1)


def photometric_loss(frame: Image, next_frame: Image, flow: FlowField,
                     mask: VisibilityMask, kind: str = "charbonnier",
                     config: LossConfig | None = None) -> LossValue:
    """Difference between ``frame`` and ``next_frame`` warped back by ``flow``.

    The per-pixel (or per window center) cost is weighted by the visibility
    mask and normalized by its support; an all-zero mask gives loss 0. The
    gradient with respect to the flow chains the photometric derivative
    through the bilinear sampler.
    """
    cfg = config or LossConfig()
    if kind not in PHOTOMETRIC_KINDS:
        raise ParameterError(f"unknown photometric kind {kind!r}")
    _same_shape(frame.data, next_frame.data)
    if (flow.height, flow.width) != (frame.height, frame.width):
        raise DimensionError("flow/frame size mismatch")
    if (mask.height, mask.width) != (frame.height, frame.width):
        raise DimensionError("mask/frame size mismatch")

    warped, dwdx, dwdy = warp_array_with_jacobian(next_frame.data, flow.data)
    target = frame.data
    eps, q = cfg.charbonnier_eps, cfg.charbonnier_q

    if kind == "charbonnier":
        wsum = float(mask.data.sum())
        if wsum == 0.0:
            return LossValue(0.0, {"flow": np.zeros_like(flow.data)})
        d = warped - target
        cost = _rho(d, eps, q).mean(axis=2)
        value = float((cost * mask.data).sum() / wsum)
        grad_img = _rho_prime(d, eps, q) * (mask.data / (wsum * d.shape[2]))[:, :, None]
    else:
        ws = cfg.ssim_window if kind == "ssim" else cfg.census_window
        m = ws // 2
        if frame.height < ws or frame.width < ws:
            raise DimensionError(f"frame smaller than {kind} window")
        weights = mask.data[m:frame.height - m, m:frame.width - m]
        if kind == "ssim":
            value, grad_img, _ = _ssim_cost(warped, target, ws, weights)
        else:
            value, grad_img, _ = _census_cost(warped, target, ws, weights, eps, q)

    return LossValue(value, {"flow": _flow_chain(grad_img, dwdx, dwdy)})


# ---------------------------------------------------------------------------
# Spatial smoothness


def _diff_x(arr, k):
    if k == 1:
        return arr[:, 1:] - arr[:, :-1]
    return arr[:, 2:] - 2.0 * arr[:, 1:-1] + arr[:, :-2]


def _diff_y(arr, k):
    if k == 1:
        return arr[1:] - arr[:-1]
    return arr[2:] - 2.0 * arr[1:-1] + arr[:-2]


def _adjoint_diff_x(s, k, out):
    if k == 1:
        out[:, 1:] += s
        out[:, :-1] -= s
    else:
        out[:, 2:] += s
        out[:, 1:-1] -= 2.0 * s
        out[:, :-2] += s


def _adjoint_diff_y(s, k, out):
    if k == 1:
        out[1:] += s
        out[:-1] -= s
    else:
        out[2:] += s
        out[1:-1] -= 2.0 * s
        out[:-2] += s


def _edge_weights(image_arr, k, edge_lambda):
    # First-order image gradient magnitude (stride k keeps it aligned with
    # the k-th order flow difference), summed over channels.
    gx = np.abs(image_arr[:, k:] - image_arr[:, :-k]).sum(axis=2)
    gy = np.abs(image_arr[k:] - image_arr[:-k]).sum(axis=2)
    return np.exp(-edge_lambda * gx), np.exp(-edge_lambda * gy)


def edge_aware_smoothness(flow: FlowField, image: Image, order: int = 1,
                          edge_lambda: float = 150.0,
                          support_x=None, support_y=None) -> LossValue:
    """k-th order flow-difference penalty attenuated at image edges.

    Optional ``support_x``/``support_y`` maps (difference-aligned, in [0, 1])
    restrict and reweight the penalized stencils; empty support contributes 0.
    """
    if order not in (1, 2):
        raise ParameterError("smoothness order must be 1 or 2")
    if (flow.height, flow.width) != (image.height, image.width):
        raise DimensionError("flow/image size mismatch")
    if flow.width <= order or flow.height <= order:
        raise DimensionError("field too small for the difference stencil")
    wx, wy = _edge_weights(image.data, order, edge_lambda)
    if support_x is not None:
        wx = wx * support_x
    if support_y is not None:
        wy = wy * support_y
    nx = float(support_x.sum()) if support_x is not None else wx.size
    ny = float(support_y.sum()) if support_y is not None else wy.size

    grad = np.zeros_like(flow.data)
    value = 0.0
    for axis, (wgt, n, diff, adjoint) in enumerate([
            (wx, nx, _diff_x, _adjoint_diff_x),
            (wy, ny, _diff_y, _adjoint_diff_y)]):
        if n == 0.0:
            continue
        d = diff(flow.data, order)
        value += float((wgt * np.abs(d).sum(axis=2)).sum() / n)
        adjoint((wgt / n)[:, :, None] * np.sign(d), order, grad)
    return LossValue(value, {"flow": grad})


# ---------------------------------------------------------------------------
# Temporal smoothness


def _flow_charbonnier_map(delta, eps, q):
    # Per-pixel robust distance between two flow fields: channel mean of rho.
    return _rho(delta, eps, q).mean(axis=2)


def temporal_smoothness(flow_prev: FlowField, flow_cur: FlowField,
                        flow_next: FlowField, flow_cur_bwd: FlowField,
                        mask_prev: VisibilityMask, mask_next: VisibilityMask,
                        eps_d: float = 1e-2, eps: float = 0.01,
                        q: float = 0.4) -> LossValue:
    """Constant-velocity regularizer tying the current flow to its neighbors.

    The previous/next flows are motion-aligned onto the current frame (the
    previous one through the current backward flow, the next one through the
    current forward flow), gradient-stopped, and compared to the current flow
    with a per-pixel robust distance divided by (|flow_cur| + eps_d). Each
    term is masked by the matching visibility mask and normalized by its
    support. Only ``flow_cur`` receives gradient.
    """
    for other in (flow_cur, flow_next, flow_cur_bwd):
        _same_shape(flow_prev.data, other.data)
    fc = flow_cur.data
    mag = np.sqrt((fc ** 2).sum(axis=2))
    decay = mag + eps_d
    # Unit direction of flow_cur, zero at the origin (subgradient choice).
    with np.errstate(invalid="ignore", divide="ignore"):
        direction = np.where(mag[:, :, None] > 0.0, fc / np.maximum(mag, 1e-300)[:, :, None], 0.0)

    value = 0.0
    grad_c = np.zeros_like(fc)
    for aligned_src, carrier, mask in (
            (flow_prev, flow_cur_bwd, mask_prev),
            (flow_next, flow_cur, mask_next)):
        wsum = float(mask.data.sum())
        if wsum == 0.0:
            continue
        aligned = warp_array(aligned_src.data, carrier.data)  # gradient-stopped
        delta = aligned - fc
        cmap = _flow_charbonnier_map(delta, eps, q)
        weight = mask.data / wsum
        value += float((cmap * weight / decay).sum())
        # d/d fc of cmap / decay: the robust map differentiates to
        # -rho'(delta)/2 and the decay contributes -cmap * direction / decay^2.
        grad_c += weight[:, :, None] * (
            -_rho_prime(delta, eps, q) / (2.0 * decay[:, :, None])
            - (cmap / decay ** 2)[:, :, None] * direction)

    zeros = np.zeros_like(fc)
    return LossValue(value, {"flow_c": grad_c, "flow_p": zeros.copy(),
                             "flow_f": zeros.copy()})


# ---------------------------------------------------------------------------
# Distillation losses


def distill_loss(flow_pred: FlowField, pseudo: FlowField,
                 confidence: ConfidenceMap | None = None,
                 eps: float = 0.01, q: float = 0.4) -> LossValue:
    """Confidence-weighted robust distance to a gradient-stopped pseudo-label."""
    _same_shape(flow_pred.data, pseudo.data)
    conf = np.ones((flow_pred.height, flow_pred.width)) if confidence is None \
        else confidence.data
    if conf.shape != (flow_pred.height, flow_pred.width):
        raise DimensionError("confidence size mismatch")
    delta = flow_pred.data - pseudo.data
    cmap = _flow_charbonnier_map(delta, eps, q)
    n = cmap.size
    value = float((conf * cmap).sum() / n)
    grad = (conf / (2.0 * n))[:, :, None] * _rho_prime(delta, eps, q)
    return LossValue(value, {"flow": grad})


def doe_loss(flow: FlowField, pseudo: FlowField, mask: VisibilityMask,
             frame: Image, next_frame: Image, mode: str = "mixed",
             config: LossConfig | None = None) -> LossValue:
    """Occlusion-enhancer supervision; ``mask`` is 1 outside occluders.

    Sparse mode distills the pseudo-label on non-occluder pixels only. Mixed
    mode adds an occluder-restricted unsupervised term: an SSIM warp loss over
    occluder pixels plus a smoothness penalty confined to stencils inside the
    occluders, edge-weighted by the occlusion mask itself.
    """
    cfg = config or LossConfig()
    if mode not in ("sparse", "mixed"):
        raise ParameterError("doe mode must be 'sparse' or 'mixed'")
    _same_shape(flow.data, pseudo.data)
    eps, q = cfg.charbonnier_eps, cfg.charbonnier_q

    wsum = float(mask.data.sum())
    if wsum > 0.0:
        delta = pseudo.data - flow.data
        cmap = _flow_charbonnier_map(delta, eps, q)
        sparse_value = float((cmap * mask.data).sum() / wsum)
        grad = -(mask.data / (2.0 * wsum))[:, :, None] * _rho_prime(delta, eps, q)
    else:
        sparse_value = 0.0
        grad = np.zeros_like(flow.data)
    value = sparse_value
    breakdown = {"doe_sparse": sparse_value}

    if mode == "mixed":
        occ = 1.0 - mask.data
        ws = cfg.ssim_window
        m = ws // 2
        warped, dwdx, dwdy = warp_array_with_jacobian(next_frame.data, flow.data)
        warp_value, grad_img, _ = _ssim_cost(
            warped, frame.data, ws, occ[m:flow.height - m, m:flow.width - m])
        grad += _flow_chain(grad_img, dwdx, dwdy)

        k = cfg.smooth_order
        sup_x = occ[:, k:]
        sup_y = occ[k:]
        for i in range(1, k + 1):
            sup_x = sup_x * occ[:, k - i:occ.shape[1] - i]
            sup_y = sup_y * occ[k - i:occ.shape[0] - i]
        mask_image = Image(mask.data[:, :, None])
        smooth = edge_aware_smoothness(flow, mask_image, k, cfg.smooth_edge_lambda,
                                       support_x=sup_x, support_y=sup_y)
        grad += smooth.gradients["flow"]
        value += warp_value + smooth.value
        breakdown["doe_warp"] = warp_value
        breakdown["doe_smooth"] = smooth.value

    return LossValue(value, {"flow": grad}, breakdown)


# ---------------------------------------------------------------------------
# Sequence assembly


def _visibility_masks(forward_flows, backward_flows, masks, n_pairs, cfg):
    if masks is not None:
        if len(masks) != n_pairs:
            raise DimensionError("need one visibility mask per frame pair")
        return list(masks)
    if backward_flows is None:
        h, w = forward_flows[0].height, forward_flows[0].width
        ones = VisibilityMask(np.ones((h, w)))
        return [ones] * n_pairs
    return [fb_occlusion_mask(forward_flows[t], backward_flows[t], cfg.fb_params)
            for t in range(n_pairs)]


def sequence_loss(frames, forward_flows, backward_flows=None, masks=None,
                  config: LossConfig | None = None) -> LossValue:
    """Mean per-pair loss: photometric + lambda1 * smoothness + temporal term.

    The temporal term needs both neighboring forward flows and the backward
    flow at the current frame, so it is skipped at sequence endpoints and
    whenever backward flows are absent. Gradients are reported per forward
    flow under keys ``flow_0..flow_{N-2}``; the aligned temporal references
    are gradient-stopped, so each flow only sees its own window.
    """
    cfg = config or LossConfig()
    frames = list(frames)
    forward_flows = list(forward_flows)
    n = len(frames)
    if len(forward_flows) != n - 1:
        raise DimensionError("need N-1 forward flows for N frames")
    if backward_flows is not None:
        backward_flows = list(backward_flows)
        if len(backward_flows) != n - 1:
            raise DimensionError("need N-1 backward flows for N frames")
    vis = _visibility_masks(forward_flows, backward_flows, masks, n - 1, cfg)

    w_temporal = cfg.lambda2 * cfg.w_tsm
    photo_sum = smooth_sum = temporal_sum = 0.0
    grads = {}
    for t in range(n - 1):
        photo = photometric_loss(frames[t], frames[t + 1], forward_flows[t],
                                 vis[t], cfg.photometric_kind, cfg)
        smooth = edge_aware_smoothness(forward_flows[t], frames[t],
                                       cfg.smooth_order, cfg.smooth_edge_lambda)
        grad_t = photo.gradients["flow"] + cfg.lambda1 * smooth.gradients["flow"]
        photo_sum += photo.value
        smooth_sum += smooth.value
        if 1 <= t <= n - 3 and backward_flows is not None:
            mask_prev = fb_occlusion_mask(backward_flows[t - 1],
                                          forward_flows[t - 1], cfg.fb_params)
            mask_next = fb_occlusion_mask(forward_flows[t],
                                          backward_flows[t], cfg.fb_params)
            tsm = temporal_smoothness(forward_flows[t - 1], forward_flows[t],
                                      forward_flows[t + 1], backward_flows[t - 1],
                                      mask_prev, mask_next, cfg.temporal_eps_d,
                                      cfg.charbonnier_eps, cfg.charbonnier_q)
            temporal_sum += tsm.value
            grad_t = grad_t + w_temporal * tsm.gradients["flow_c"]
        grads[f"flow_{t}"] = grad_t / (n - 1)

    value = (photo_sum + cfg.lambda1 * smooth_sum + w_temporal * temporal_sum) / (n - 1)
    breakdown = {
        "photometric": photo_sum / (n - 1),
        "smoothness": smooth_sum / (n - 1),
        "temporal_smoothness": temporal_sum / (n - 1),
        "total": value,
    }
    return LossValue(value, grads, breakdown)


@dataclass(frozen=True)
class DistillPass:
    """One enhancer forward pass: predicted flows vs transformed pseudo-labels."""

    flows: tuple
    pseudo: tuple
    confidences: Optional[tuple] = None

    def __init__(self, flows, pseudo, confidences=None):
        object.__setattr__(self, "flows", tuple(flows))
        object.__setattr__(self, "pseudo", tuple(pseudo))
        object.__setattr__(self, "confidences",
                           None if confidences is None else tuple(confidences))
        if len(self.pseudo) != len(self.flows):
            raise DimensionError("pseudo-label count mismatch")
        if self.confidences is not None and len(self.confidences) != len(self.flows):
            raise DimensionError("confidence count mismatch")


@dataclass(frozen=True)
class DoePass:
    """Occlusion-enhancer pass: transformed frames, flows, labels and masks."""

    frames: tuple
    flows: tuple
    pseudo: tuple
    masks: tuple

    def __init__(self, frames, flows, pseudo, masks):
        object.__setattr__(self, "frames", tuple(frames))
        object.__setattr__(self, "flows", tuple(flows))
        object.__setattr__(self, "pseudo", tuple(pseudo))
        object.__setattr__(self, "masks", tuple(masks))
        if len(self.frames) != len(self.flows) + 1:
            raise DimensionError("need N frames for N-1 flows")
        if not (len(self.flows) == len(self.pseudo) == len(self.masks)):
            raise DimensionError("DOE pass lengths inconsistent")


def self_distill_total(frames, forward_flows, backward_flows=None, masks=None,
                       doe: DoePass | None = None,
                       sve: DistillPass | None = None,
                       cve: DistillPass | None = None,
                       config: LossConfig | None = None) -> LossValue:
    """Full distillation objective: sequence loss plus weighted enhancer terms.

    Each enhancer term is averaged over the N-1 frame pairs alongside the
    per-pair sequence loss. A nonzero lambda without the matching enhancer
    pass is a configuration error.
    """
    cfg = config or LossConfig()
    seq = sequence_loss(frames, forward_flows, backward_flows, masks, cfg)
    n_pairs = len(list(forward_flows))

    for lam, pass_, name in ((cfg.lambda3, doe, "doe"), (cfg.lambda4, sve, "sve"),
                             (cfg.lambda5, cve, "cve")):
        if lam > 0.0 and pass_ is None:
            raise ConfigError(f"lambda for {name} is nonzero but no {name} pass given")
        if pass_ is not None and len(pass_.flows) != n_pairs:
            raise DimensionError(f"{name} pass must cover every frame pair")

    value = seq.value
    grads = dict(seq.gradients)
    breakdown = dict(seq.breakdown)

    doe_sum = sve_sum = cve_sum = 0.0
    for t in range(n_pairs):
        if doe is not None:
            term = doe_loss(doe.flows[t], doe.pseudo[t], doe.masks[t],
                            doe.frames[t], doe.frames[t + 1], cfg.doe_mode, cfg)
            doe_sum += term.value
            grads[f"doe_flow_{t}"] = cfg.lambda3 * term.gradients["flow"] / n_pairs
        if sve is not None:
            conf = None if sve.confidences is None else sve.confidences[t]
            term = distill_loss(sve.flows[t], sve.pseudo[t], conf,
                                cfg.charbonnier_eps, cfg.charbonnier_q)
            sve_sum += term.value
            grads[f"sve_flow_{t}"] = cfg.lambda4 * term.gradients["flow"] / n_pairs
        if cve is not None:
            conf = None if cve.confidences is None else cve.confidences[t]
            term = distill_loss(cve.flows[t], cve.pseudo[t], conf,
                                cfg.charbonnier_eps, cfg.charbonnier_q)
            cve_sum += term.value
            grads[f"cve_flow_{t}"] = cfg.lambda5 * term.gradients["flow"] / n_pairs

    value += (cfg.lambda3 * doe_sum + cfg.lambda4 * sve_sum
              + cfg.lambda5 * cve_sum) / n_pairs
    breakdown.update({
        "doe": doe_sum / n_pairs,
        "sve": sve_sum / n_pairs,
        "cve": cve_sum / n_pairs,
        "total": value,
    })
    return LossValue(value, grads, breakdown)
