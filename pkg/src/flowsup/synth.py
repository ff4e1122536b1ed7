"""Synthetic translating-box scenes with exact ground truth.

A textured box moves at constant velocity over a static background, giving
analytic forward/backward flows and occlusion masks: the pixels occluded
between frames t and t+1 are exactly the background pixels the box covers at
t+1. With integer velocities the warped photometric identity is exact, which
makes these scenes the verification oracle for the rest of the library.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ParameterError
from .fileio import write_flo_file, write_image_file
from .types import FlowField, Image, Sequence, VisibilityMask

TEXTURE_KINDS = ("uniform-noise", "flat")
BACKGROUND_KINDS = ("flat", "uniform-noise")


@dataclass(frozen=True)
class BoxSceneParams:
    height: int = 64
    width: int = 512
    n_frames: int = 100
    box_height: int = 32
    box_width: int = 32
    box_x0: int = 8
    box_y0: int = 16
    velocity: tuple = (4, 0)
    texture: str = "uniform-noise"
    background: str = "flat"
    background_value: float = 0.5
    box_value: float = 0.9
    channels: int = 1

    def __post_init__(self):
        if self.n_frames < 2:
            raise ParameterError("need at least 2 frames")
        if self.texture not in TEXTURE_KINDS or self.background not in BACKGROUND_KINDS:
            raise ParameterError("unknown texture/background kind")
        if self.channels not in (1, 3):
            raise ParameterError("channels must be 1 or 3")
        if min(self.box_height, self.box_width) < 1:
            raise ParameterError("box must be non-empty")


@dataclass(frozen=True)
class SynthScene:
    """Frames plus the generator's exact flow and occlusion ground truth."""

    sequence: Sequence
    forward_flows: tuple
    backward_flows: tuple
    occlusion_masks: tuple
    params: BoxSceneParams


def _box_slices(x0, y0, p: BoxSceneParams):
    return slice(y0, y0 + p.box_height), slice(x0, x0 + p.box_width)


def generate_box_scene(params: BoxSceneParams = BoxSceneParams(),
                       rng: np.random.Generator | None = None) -> SynthScene:
    """Render the moving-box sequence and its analytic supervision signals."""
    p = params
    rng = rng or np.random.default_rng(0)
    vx, vy = p.velocity
    if vx != int(vx) or vy != int(vy):
        raise ParameterError("box velocity must be integer-valued")
    vx, vy = int(vx), int(vy)

    for t in (0, p.n_frames - 1):
        x0, y0 = p.box_x0 + t * vx, p.box_y0 + t * vy
        if x0 < 0 or y0 < 0 or x0 + p.box_width > p.width or y0 + p.box_height > p.height:
            raise ParameterError(
                f"box leaves the {p.width}x{p.height} frame at t={t}")

    if p.background == "uniform-noise":
        background = rng.uniform(0.0, 1.0, size=(p.height, p.width, p.channels))
    else:
        background = np.full((p.height, p.width, p.channels), p.background_value)
    if p.texture == "uniform-noise":
        box_tex = rng.uniform(0.0, 1.0, size=(p.box_height, p.box_width, p.channels))
    else:
        box_tex = np.full((p.box_height, p.box_width, p.channels), p.box_value)

    frames = []
    supports = []
    for t in range(p.n_frames):
        ys, xs = _box_slices(p.box_x0 + t * vx, p.box_y0 + t * vy, p)
        frame = background.copy()
        frame[ys, xs] = box_tex
        frames.append(Image(frame))
        support = np.zeros((p.height, p.width), dtype=bool)
        support[ys, xs] = True
        supports.append(support)

    fwd, bwd, occ = [], [], []
    for t in range(p.n_frames - 1):
        flow = np.zeros((p.height, p.width, 2))
        flow[supports[t]] = (vx, vy)
        fwd.append(FlowField(flow))
        back = np.zeros((p.height, p.width, 2))
        back[supports[t + 1]] = (-vx, -vy)
        bwd.append(FlowField(back))
        covered = supports[t + 1] & ~supports[t]
        occ.append(VisibilityMask(np.where(covered, 0.0, 1.0)))

    seq = Sequence(frames, forward_flows=fwd, backward_flows=bwd, masks=occ)
    return SynthScene(seq, tuple(fwd), tuple(bwd), tuple(occ), p)


def export_scene(scene: SynthScene, out_dir) -> None:
    """Write a scene as numbered PNG frames, .flo ground truths and mask PNGs."""
    out = Path(out_dir)
    for sub in ("frames", "flow_fwd", "flow_bwd", "masks"):
        (out / sub).mkdir(parents=True, exist_ok=True)
    for i, frame in enumerate(scene.sequence.frames, start=1):
        write_image_file(out / "frames" / f"frame_{i:06d}.png", frame)
    for i in range(len(scene.forward_flows)):
        write_flo_file(out / "flow_fwd" / f"flow_{i + 1:06d}.flo", scene.forward_flows[i])
        write_flo_file(out / "flow_bwd" / f"flow_{i + 1:06d}.flo", scene.backward_flows[i])
        mask = Image(scene.occlusion_masks[i].data[:, :, None])
        write_image_file(out / "masks" / f"mask_{i + 1:06d}.png", mask)
    manifest = {
        "kind": "box-scene",
        "n_frames": scene.params.n_frames,
        "height": scene.params.height,
        "width": scene.params.width,
        "velocity": list(scene.params.velocity),
        "box": [scene.params.box_x0, scene.params.box_y0,
                scene.params.box_width, scene.params.box_height],
        "texture": scene.params.texture,
        "background": scene.params.background,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2))
