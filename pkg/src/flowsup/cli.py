"""Command-line batch tools over directories of frames and flows.

Layout convention: numbered files such as ``frame_000001.png`` and
``flow_000001.flo``, processed in sorted order. Every command is
deterministic given its inputs and seed; outputs are written atomically
(temp file + rename) and are independent of the worker count.

Exit codes: 0 success, 2 usage/parameter error, 3 data/format error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
import tempfile
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import fileio
from .config import RunConfig, default_config, load_config
from .enhancers.content import apply_cve, sample_cve_schedule
from .enhancers.occlusion import apply_doe
from .enhancers.spatial import apply_sve, sample_affine_schedule
from .errors import FlowsupError, FormatError, ParameterError
from .losses import sequence_loss
from .metrics import F1_ABS_THRESHOLD, F1_REL_THRESHOLD
from .synth import export_scene, generate_box_scene
from .types import Image, VisibilityMask
from .viz import flow_to_color
from .warp import confidence_map, fb_occlusion_mask

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3


def _atomic_write(path: Path, data: bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp_", suffix=path.suffix)
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _write_json(path: Path, payload) -> None:
    _atomic_write(path, (json.dumps(payload, indent=2, sort_keys=True) + "\n").encode())


def _listdir(path, pattern) -> list:
    d = Path(path)
    if not d.is_dir():
        raise ParameterError(f"not a directory: {d}")
    entries = sorted(d.glob(pattern))
    if not entries:
        raise ParameterError(f"no files matching {pattern} in {d}")
    return entries


def _read_flows(path) -> list:
    return [fileio.read_flo_file(p) for p in _listdir(path, "*.flo")]


def _read_frames(path) -> list:
    return [fileio.read_image_file(p) for p in _listdir(path, "*.png")]


def _read_masks(path) -> list:
    masks = []
    for p in _listdir(path, "*.png"):
        img = fileio.read_image_file(p)
        masks.append(VisibilityMask((img.data[:, :, 0] >= 0.5).astype(float)))
    return masks


def _config_from(args) -> RunConfig:
    return load_config(args.config) if args.config else default_config()


def _pool_map(workers, fn, items):
    if workers <= 1:
        for item in items:
            fn(item)
        return
    with ThreadPoolExecutor(max_workers=workers) as pool:
        list(pool.map(fn, items))


# ---------------------------------------------------------------------------
# Subcommands


def cmd_synth(args) -> int:
    cfg = _config_from(args)
    seed = args.seed if args.seed is not None else (cfg.seed or 0)
    scene = generate_box_scene(cfg.synth, np.random.default_rng(seed))
    export_scene(scene, args.out)
    print(f"wrote {cfg.synth.n_frames} frames to {args.out}")
    return EXIT_OK


def cmd_occlusion(args) -> int:
    cfg = _config_from(args)
    fwd = _read_flows(args.in_dir)
    bwd = _read_flows(args.bwd)
    if len(fwd) != len(bwd):
        raise ParameterError(f"{len(fwd)} forward vs {len(bwd)} backward flows")
    out = Path(args.out)

    def one(i):
        mask = fb_occlusion_mask(fwd[i], bwd[i], cfg.fb_params)
        conf = confidence_map(fwd[i], bwd[i], cfg.confidence)
        _atomic_write(out / f"mask_{i + 1:06d}.png",
                      fileio.encode_image(Image(mask.data[:, :, None])))
        _atomic_write(out / f"confidence_{i + 1:06d}.png",
                      fileio.encode_image(Image(conf.data[:, :, None]), bit_depth=16))

    _pool_map(args.workers, one, range(len(fwd)))
    print(f"wrote {len(fwd)} mask/confidence pairs to {out}")
    return EXIT_OK


def _augment_outputs(out_root, name, frames, flows, masks=None):
    jobs = []
    for i, frame in enumerate(frames, start=1):
        jobs.append((out_root / name / "frames" / f"frame_{i:06d}.png",
                     fileio.encode_image(frame)))
    for i, flow in enumerate(flows, start=1):
        jobs.append((out_root / name / "flows" / f"flow_{i:06d}.flo",
                     fileio.write_flo(flow)))
    if masks is not None:
        for i, mask in enumerate(masks, start=1):
            jobs.append((out_root / name / "masks" / f"mask_{i:06d}.png",
                         fileio.encode_image(Image(mask.data[:, :, None]))))
    return jobs


def cmd_augment(args) -> int:
    if args.seed is None:
        raise ParameterError("--seed is mandatory for enhancer commands")
    cfg = _config_from(args)
    frames = _read_frames(args.in_dir)
    flows = _read_flows(args.flows)
    if len(flows) != len(frames) - 1:
        raise ParameterError(
            f"{len(frames)} frames need {len(frames) - 1} pseudo flows, got {len(flows)}")

    which = ("doe", "sve", "cve") if args.enhancer == "all" else (args.enhancer,)
    children = np.random.SeedSequence(args.seed).spawn(3)
    streams = dict(zip(("doe", "sve", "cve"), children))

    out_root = Path(args.out)
    manifest = {"schema_version": 1, "seed": args.seed, "enhancers": {}}
    jobs = []

    if "doe" in which:
        doe_seed = int(streams["doe"].generate_state(1)[0])
        params = dataclasses.replace(cfg.doe, seed=doe_seed)
        result = apply_doe(frames, flows, params)
        jobs += _augment_outputs(out_root, "doe", result.frames,
                                 result.pseudo_flows, result.masks)
        manifest["enhancers"]["doe"] = result.plan
    if "sve" in which:
        rng = np.random.default_rng(streams["sve"])
        h, w = frames[0].height, frames[0].width
        affines = sample_affine_schedule(len(frames), h, w, cfg.sve, rng)
        new_frames, new_flows = apply_sve(frames, flows, affines)
        jobs += _augment_outputs(out_root, "sve", new_frames, new_flows)
        manifest["enhancers"]["sve"] = {
            "affines": [{"linear": a.linear.tolist(), "offset": a.offset.tolist()}
                        for a in affines]}
    if "cve" in which:
        rng = np.random.default_rng(streams["cve"])
        schedule = sample_cve_schedule(len(frames), rng, cfg.cve)
        new_frames = apply_cve(frames, schedule, rng)
        jobs += _augment_outputs(out_root, "cve", new_frames, flows)
        manifest["enhancers"]["cve"] = {
            "schedule": [dataclasses.asdict(fp) for fp in schedule.frames]}

    _pool_map(args.workers, lambda job: _atomic_write(job[0], job[1]), jobs)
    _write_json(out_root / "manifest.json", manifest)
    print(f"wrote {len(jobs)} files to {out_root}")
    return EXIT_OK


def cmd_loss(args) -> int:
    cfg = _config_from(args)
    frames = _read_frames(args.in_dir)
    fwd = _read_flows(args.fwd)
    bwd = _read_flows(args.bwd) if args.bwd else None
    masks = _read_masks(args.masks) if args.masks else None
    if len(fwd) != len(frames) - 1:
        raise ParameterError("forward flow count must be N-1")
    result = sequence_loss(frames, fwd, bwd, masks, cfg.loss)
    payload = dict(sorted(result.breakdown.items()))
    text = json.dumps(payload, indent=2)
    print(text)
    if args.out:
        _write_json(Path(args.out) / "loss.json", payload)
    return EXIT_OK


def cmd_eval(args) -> int:
    pred = _read_flows(args.pred)
    gt = _read_flows(args.gt)
    if len(pred) != len(gt):
        raise ParameterError(f"{len(pred)} predictions vs {len(gt)} ground truths")
    occ = _read_masks(args.occ) if args.occ else None
    if occ is not None and len(occ) != len(gt):
        raise ParameterError("occlusion mask count mismatch")

    err_all, err_noc, err_occ, bad = [], [], [], []
    for i in range(len(pred)):
        if pred[i].data.shape != gt[i].data.shape:
            raise ParameterError("prediction/ground-truth size mismatch")
        d = pred[i].data - gt[i].data
        err = np.sqrt((d ** 2).sum(axis=2))
        mag = gt[i].magnitude()
        err_all.append(err.ravel())
        bad.append(((err > F1_ABS_THRESHOLD)
                    & (err > F1_REL_THRESHOLD * mag)).ravel())
        if occ is not None:
            vis = occ[i].data.astype(bool)
            err_noc.append(err[vis].ravel())
            err_occ.append(err[~vis].ravel())

    err_all = np.concatenate(err_all)
    payload = {
        "epe": float(err_all.mean()),
        "f1_all": float(np.concatenate(bad).mean() * 100.0),
        "count_all": int(err_all.size),
    }
    if occ is not None:
        noc = np.concatenate(err_noc) if err_noc else np.empty(0)
        occ_err = np.concatenate(err_occ) if err_occ else np.empty(0)
        if noc.size:
            payload["epe_noc"] = float(noc.mean())
            payload["count_noc"] = int(noc.size)
        if occ_err.size:
            payload["epe_occ"] = float(occ_err.mean())
            payload["count_occ"] = int(occ_err.size)
    print(json.dumps(payload, indent=2))
    if args.out:
        _write_json(Path(args.out) / "metrics.json", payload)
    return EXIT_OK


def cmd_viz(args) -> int:
    flows = _read_flows(args.in_dir)
    out = Path(args.out)

    def one(i):
        color = flow_to_color(flows[i], args.max_magnitude)
        _atomic_write(out / f"flow_{i + 1:06d}.png", fileio.encode_image(color))

    _pool_map(args.workers, one, range(len(flows)))
    print(f"wrote {len(flows)} color maps to {out}")
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="flowsup",
        description="Batch tools for unsupervised optical-flow supervision")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, needs_out=True):
        p.add_argument("--config", help="JSON run configuration")
        p.add_argument("--seed", type=int, help="RNG seed (u64)")
        p.add_argument("--workers", type=int, default=1,
                       help="worker threads; output is worker-count independent")
        if needs_out:
            p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("synth", help="generate a synthetic box scene")
    common(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("occlusion", help="FB-check masks and confidence maps")
    p.add_argument("--in", dest="in_dir", required=True, help="forward flow dir")
    p.add_argument("--bwd", required=True, help="backward flow dir")
    common(p)
    p.set_defaults(func=cmd_occlusion)

    p = sub.add_parser("augment", help="run the dynamic training enhancers")
    p.add_argument("--in", dest="in_dir", required=True, help="frame dir")
    p.add_argument("--flows", required=True, help="pseudo flow dir")
    p.add_argument("--enhancer", choices=("doe", "sve", "cve", "all"),
                   default="all")
    common(p)
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("loss", help="compute the sequence loss breakdown")
    p.add_argument("--in", dest="in_dir", required=True, help="frame dir")
    p.add_argument("--fwd", required=True, help="forward flow dir")
    p.add_argument("--bwd", help="backward flow dir")
    p.add_argument("--masks", help="visibility mask dir")
    p.add_argument("--config", help="JSON run configuration")
    p.add_argument("--out", help="optional output directory for loss.json")
    p.set_defaults(func=cmd_loss)

    p = sub.add_parser("eval", help="EPE / F1 metrics")
    p.add_argument("--pred", required=True, help="predicted flow dir")
    p.add_argument("--gt", required=True, help="ground-truth flow dir")
    p.add_argument("--occ", help="occlusion mask dir for NOC/OCC splits")
    p.add_argument("--out", help="optional output directory for metrics.json")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("viz", help="render flows on the color wheel")
    p.add_argument("--in", dest="in_dir", required=True, help="flow dir")
    p.add_argument("--max-magnitude", type=float, default=None)
    common(p)
    p.set_defaults(func=cmd_viz)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ParameterError,) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FormatError as exc:
        print(f"format error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except FlowsupError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
