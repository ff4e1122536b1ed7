"""Dynamic occlusion enhancer: superpixel occluders with Markov motion.

Occluders are superpixel regions lifted from a keyframe, retextured from
another frame of the batch (color field + slight noise + large Gaussian
blur), dropped into frame 0 without overlap and advanced by a velocity
random walk. Compositing is sub-pixel with a soft 1-px footprint edge; the
per-frame occlusion mask thresholds the soft footprint at 0.5. Pseudo-labels
are rewritten inside each footprint to the occluder's exact frame-to-frame
displacement, which is ground truth by construction.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import ndimage

from ..errors import DimensionError, ParameterError, PlacementError
from ..types import FlowField, Image, VisibilityMask
from ..warp import sample_with_jacobian
from .motion import MotionState, sample_initial_state
from .slic import slic_superpixels

DEFAULT_SPEED = 4.0        # used when no dataset speed statistic is available
FOOTPRINT_THRESHOLD = 0.5
MIN_OCCLUDER_AREA = 4


@dataclass(frozen=True)
class DoeParams:
    n_occluders: int = 2
    n_superpixels: int = 64
    compactness: float = 10.0
    texture_noise_sigma: float = 0.05
    texture_blur_sigma: float = 4.0
    init_speed_mean: Optional[float] = None   # None: mean |pseudo flow|, else 4
    sigma_u: float = 0.5
    sigma_v: float = 0.5
    crop_size: Optional[tuple] = None          # (height, width)
    rot_sigma: float = 0.0                     # optional affine walk per frame
    log_scale_sigma: float = 0.0
    initial_states: Optional[tuple] = None     # exact per-occluder overrides
    max_retries: int = 100
    seed: int = 0

    def __post_init__(self):
        if self.n_occluders < 1:
            raise ParameterError("n_occluders must be >= 1")
        if self.sigma_u < 0 or self.sigma_v < 0:
            raise ParameterError("step sigmas must be >= 0")
        if self.init_speed_mean is not None and self.init_speed_mean <= 0:
            raise ParameterError("init_speed_mean must be positive")
        if self.rot_sigma < 0 or self.log_scale_sigma < 0:
            raise ParameterError("affine walk sigmas must be >= 0")


@dataclass(frozen=True)
class Occluder:
    """A footprint + texture patch with its per-frame placement."""

    footprint: np.ndarray          # (bh, bw) binary
    texture: np.ndarray            # (bh, bw, C)
    positions: tuple               # per-frame (x, y) top-left, float
    linears: tuple                 # per-frame 2x2 deformation about the center
    trajectory: tuple              # per-frame MotionState (actual displacements)

    def __post_init__(self):
        if self.footprint.sum() == 0:
            raise ParameterError("occluder footprint is empty")
        if len(self.trajectory) != len(self.positions):
            raise ParameterError("trajectory length must equal the frame count")


@dataclass(frozen=True)
class DoeResult:
    frames: tuple
    pseudo_flows: tuple
    masks: tuple                   # per-frame VisibilityMask, 0 on occluders
    occluders: tuple
    plan: dict                     # sampled parameters, for manifests/replay


def _rotation_scale(rot, log_scale):
    c, s = np.cos(rot), np.sin(rot)
    return np.array([[c, -s], [s, c]]) * np.exp(log_scale)


class _Sprite:
    """Resamples one occluder's soft footprint/texture at a world placement."""

    def __init__(self, footprint, texture):
        bh, bw = footprint.shape
        self.center = np.array([(bw - 1) / 2.0, (bh - 1) / 2.0])
        # 1-px zero ring; sampling across it produces the soft edge.
        self.alpha_pad = np.pad(footprint.astype(np.float64), 1)[:, :, None]
        premult = texture * footprint[:, :, None]
        self.tex_pad = np.pad(premult, ((1, 1), (1, 1), (0, 0)))
        self.size = np.array([bw, bh], dtype=np.float64)

    def world_bbox(self, pos, linear, frame_shape):
        h, w = frame_shape
        corners = np.array([[-1.5, -1.5], [self.size[0] + 0.5, -1.5],
                            [-1.5, self.size[1] + 0.5],
                            [self.size[0] + 0.5, self.size[1] + 0.5]])
        world = (corners - self.center) @ linear.T + self.center + pos
        x0 = max(int(np.floor(world[:, 0].min())), 0)
        x1 = min(int(np.ceil(world[:, 0].max())) + 1, w)
        y0 = max(int(np.floor(world[:, 1].min())), 0)
        y1 = min(int(np.ceil(world[:, 1].max())) + 1, h)
        return x0, x1, y0, y1

    def rasterize(self, pos, linear, frame_shape):
        """Return (bbox, alpha, premultiplied texture) clipped to the frame."""
        x0, x1, y0, y1 = self.world_bbox(pos, linear, frame_shape)
        if x0 >= x1 or y0 >= y1:
            return (x0, x1, y0, y1), None, None
        ys, xs = np.mgrid[y0:y1, x0:x1]
        pts = np.stack([xs, ys], axis=-1).astype(np.float64) - pos - self.center
        local = pts @ np.linalg.inv(linear).T + self.center + 1.0  # pad offset
        alpha, _, _ = sample_with_jacobian(self.alpha_pad, local[..., 0], local[..., 1])
        tex, _, _ = sample_with_jacobian(self.tex_pad, local[..., 0], local[..., 1])
        return (x0, x1, y0, y1), alpha[..., 0], tex

    def hard_mask(self, pos, linear, frame_shape):
        bbox, alpha, _ = self.rasterize(pos, linear, frame_shape)
        mask = np.zeros(frame_shape, dtype=bool)
        if alpha is not None:
            x0, x1, y0, y1 = bbox
            mask[y0:y1, x0:x1] = alpha >= FOOTPRINT_THRESHOLD
        return mask

    def displacement_field(self, bbox, pos_a, lin_a, pos_b, lin_b):
        """Exact per-pixel motion of footprint pixels from placement a to b."""
        x0, x1, y0, y1 = bbox
        ys, xs = np.mgrid[y0:y1, x0:x1]
        pts = np.stack([xs, ys], axis=-1).astype(np.float64)
        local = (pts - pos_a - self.center) @ np.linalg.inv(lin_a).T
        nxt = local @ lin_b.T + self.center + pos_b
        return nxt - pts


def _extract_texture(frames, keyframe, bh, bw, params, rng):
    n = len(frames)
    choices = [i for i in range(n) if i != keyframe] or [keyframe]
    src_idx = int(rng.choice(choices))
    src = frames[src_idx].data
    h, w = src.shape[:2]
    if h < bh or w < bw:
        raise ParameterError("occluder larger than the texture source frame")
    y = int(rng.integers(0, h - bh + 1))
    x = int(rng.integers(0, w - bw + 1))
    patch = src[y:y + bh, x:x + bw].copy()
    patch += rng.normal(0.0, params.texture_noise_sigma, size=patch.shape)
    sigma = params.texture_blur_sigma
    patch = ndimage.gaussian_filter(patch, sigma=(sigma, sigma, 0.0), mode="nearest")
    return np.clip(patch, 0.0, 1.0), (src_idx, y, x)


def _select_footprints(labels, n_occluders, rng):
    ids, counts = np.unique(labels, return_counts=True)
    candidates = ids[counts >= MIN_OCCLUDER_AREA]
    if len(candidates) < n_occluders:
        raise ParameterError(
            f"only {len(candidates)} usable superpixels for {n_occluders} occluders")
    chosen = rng.choice(candidates, size=n_occluders, replace=False)
    footprints = []
    for lab in chosen:
        region = labels == lab
        ys, xs = np.nonzero(region)
        footprints.append((int(lab), region[ys.min():ys.max() + 1,
                                             xs.min():xs.max() + 1]))
    return footprints


def _disjoint(mask, others):
    return not any((mask & other).any() for other in others)


def apply_doe(frames, pseudo_flows, params: DoeParams) -> DoeResult:
    """Composite moving occluders into a sequence and rewrite its labels.

    Raises PlacementError when the occluders cannot be placed without overlap
    in frame 0. A colliding step is resampled up to ``max_retries`` times and
    then frozen for that frame; footprints therefore stay pairwise disjoint
    in every frame.
    """
    frames = [Image(f.data) if not isinstance(f, Image) else f for f in frames]
    pseudo_flows = list(pseudo_flows)
    n = len(frames)
    if n < 2:
        raise ParameterError("need at least 2 frames")
    if len(pseudo_flows) != n - 1:
        raise DimensionError("need N-1 pseudo flows")
    rng = np.random.default_rng(params.seed)

    # 1) Random crop as occlusion preprocessing (flow vectors are unchanged).
    h, w = frames[0].height, frames[0].width
    crop_origin = (0, 0)
    if params.crop_size is not None:
        ch, cw = params.crop_size
        if ch > h or cw > w or ch < 2 or cw < 2:
            raise ParameterError("invalid crop size")
        cy = int(rng.integers(0, h - ch + 1))
        cx = int(rng.integers(0, w - cw + 1))
        crop_origin = (cx, cy)
        frames = [Image(f.data[cy:cy + ch, cx:cx + cw]) for f in frames]
        pseudo_flows = [FlowField(fl.data[cy:cy + ch, cx:cx + cw])
                        for fl in pseudo_flows]
        h, w = ch, cw

    # 2-4) Keyframe, superpixels, occluder footprints and textures.
    keyframe = int(rng.integers(0, n))
    labels = slic_superpixels(frames[keyframe], params.n_superpixels,
                              params.compactness)
    footprints = _select_footprints(labels, params.n_occluders, rng)

    sprites, label_ids, texture_origins = [], [], []
    for lab, footprint in footprints:
        bh, bw = footprint.shape
        texture, origin = _extract_texture(frames, keyframe, bh, bw, params, rng)
        sprites.append(_Sprite(footprint, texture))
        label_ids.append(lab)
        texture_origins.append(origin)

    # 5) Non-overlapping placement in frame 0.
    identity = np.eye(2)
    for attempt in range(params.max_retries):
        positions = []
        for sprite in sprites:
            bh, bw = sprite.alpha_pad.shape[0] - 2, sprite.alpha_pad.shape[1] - 2
            if bw > w or bh > h:
                raise ParameterError("occluder larger than the frame")
            positions.append(np.array([float(rng.integers(0, w - bw + 1)),
                                       float(rng.integers(0, h - bh + 1))]))
        masks0 = [s.hard_mask(p, identity, (h, w)) for s, p in zip(sprites, positions)]
        if all(_disjoint(masks0[i], masks0[:i]) for i in range(len(masks0))):
            break
    else:
        raise PlacementError("could not place occluders without overlap at t=0")

    # 6) Initial motion states and optional affine walks.
    if params.init_speed_mean is not None:
        mu = params.init_speed_mean
    elif pseudo_flows:
        mags = np.concatenate([fl.magnitude().ravel() for fl in pseudo_flows])
        mu = float(mags.mean())
        if mu < 1e-3:
            mu = DEFAULT_SPEED
    else:
        mu = DEFAULT_SPEED
    if params.initial_states is not None:
        if len(params.initial_states) != len(sprites):
            raise ParameterError("need one initial state per occluder")
        states = [s.as_array() for s in params.initial_states]
    else:
        states = [sample_initial_state(mu, rng).as_array() for _ in sprites]

    rots = [0.0] * len(sprites)
    log_scales = [0.0] * len(sprites)
    all_positions = [[p.copy()] for p in positions]
    all_linears = [[identity.copy()] for _ in sprites]
    all_states = [[s.copy()] for s in states]

    # 7) Markov advance with collision resolution; the obstacle set mixes the
    # already-advanced footprints with the not-yet-advanced ones so freezing
    # is always overlap-free.
    current_masks = masks0
    for t in range(1, n):
        new_positions = [None] * len(sprites)
        new_linears = [None] * len(sprites)
        new_masks = [None] * len(sprites)
        for i, sprite in enumerate(sprites):
            prev_rot, prev_scale = rots[i], log_scales[i]
            if params.rot_sigma:
                rots[i] = rng.normal(rots[i], params.rot_sigma)
            if params.log_scale_sigma:
                log_scales[i] = rng.normal(log_scales[i], params.log_scale_sigma)
            linear = _rotation_scale(rots[i], log_scales[i])
            placed = False
            for _retry in range(params.max_retries):
                step = np.array([rng.normal(states[i][0], params.sigma_u),
                                 rng.normal(states[i][1], params.sigma_v)])
                pos = all_positions[i][-1] + step
                mask = sprite.hard_mask(pos, linear, (h, w))
                obstacles = [m for m in new_masks if m is not None] + \
                            current_masks[i + 1:]
                if _disjoint(mask, obstacles):
                    placed = True
                    break
            if not placed:
                # Freeze this step entirely; the old footprint cannot collide
                # and the deformation walk rewinds to keep motion smooth.
                step = np.zeros(2)
                pos = all_positions[i][-1]
                linear = all_linears[i][-1]
                mask = current_masks[i]
                rots[i], log_scales[i] = prev_rot, prev_scale
            new_positions[i] = pos
            new_linears[i] = linear
            new_masks[i] = mask
            states[i] = step
            all_positions[i].append(pos)
            all_linears[i].append(linear)
            all_states[i].append(step.copy())
        current_masks = new_masks

    occluders = []
    for i, sprite in enumerate(sprites):
        traj = tuple(MotionState(float(s[0]), float(s[1])) for s in all_states[i])
        occluders.append(Occluder(
            footprint=sprite.alpha_pad[1:-1, 1:-1, 0] > 0,
            texture=sprite.tex_pad[1:-1, 1:-1],
            positions=tuple(tuple(p) for p in all_positions[i]),
            linears=tuple(all_linears[i]),
            trajectory=traj))

    # 8) Render frames, masks and transformed labels.
    out_frames, out_masks = [], []
    for t in range(n):
        canvas = frames[t].data.copy()
        occluded = np.zeros((h, w), dtype=bool)
        for i, sprite in enumerate(sprites):
            bbox, alpha, tex = sprite.rasterize(all_positions[i][t],
                                                all_linears[i][t], (h, w))
            if alpha is None:
                continue
            x0, x1, y0, y1 = bbox
            a = alpha[:, :, None]
            canvas[y0:y1, x0:x1] = tex + (1.0 - a) * canvas[y0:y1, x0:x1]
            occluded[y0:y1, x0:x1] |= alpha >= FOOTPRINT_THRESHOLD
        out_frames.append(Image(np.clip(canvas, 0.0, 1.0)))
        out_masks.append(VisibilityMask(np.where(occluded, 0.0, 1.0)))

    out_flows = []
    for t in range(n - 1):
        flow = pseudo_flows[t].data.copy()
        for i, sprite in enumerate(sprites):
            mask = sprite.hard_mask(all_positions[i][t], all_linears[i][t], (h, w))
            if not mask.any():
                continue
            bbox = sprite.world_bbox(all_positions[i][t], all_linears[i][t], (h, w))
            x0, x1, y0, y1 = bbox
            disp = sprite.displacement_field(
                bbox, all_positions[i][t], all_linears[i][t],
                all_positions[i][t + 1], all_linears[i][t + 1])
            sub = mask[y0:y1, x0:x1]
            region = flow[y0:y1, x0:x1]
            region[sub] = disp[sub]
            flow[y0:y1, x0:x1] = region
        out_flows.append(FlowField(flow))

    plan = {
        "seed": params.seed,
        "crop_origin": list(crop_origin),
        "keyframe": keyframe,
        "superpixel_labels": [int(l) for l in label_ids],
        "texture_origins": [list(map(int, o)) for o in texture_origins],
        "initial_positions": [list(map(float, p[0])) for p in all_positions],
        "trajectories": [[[float(s[0]), float(s[1])] for s in traj]
                         for traj in all_states],
        "init_speed_mean": mu,
    }
    return DoeResult(tuple(out_frames), tuple(out_flows), tuple(out_masks),
                     tuple(occluders), plan)
