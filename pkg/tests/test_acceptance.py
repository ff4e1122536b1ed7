"""Acceptance gate: one test per release criterion, at pinned tolerances.

Run with ``pytest -s tests/test_acceptance.py`` to see one PASS/FAIL line per
criterion. Every expected value here is either computed by an independent
oracle inside this module (brute-force interpolation, frozen formulas,
statistics) or asserted exactly.
"""

import hashlib
import json
import math
import time
from pathlib import Path

import numpy as np
from scipy import ndimage, stats

import flowsup as fs
from flowsup.cli import main as cli_main
from flowsup.enhancers.spatial import AffineScheduleParams
from flowsup.losses import LossConfig
from flowsup.netref import conv2d_same, _sigmoid
from flowsup.warp import warp_array


def check(name, ok, detail=""):
    tag = "PASS" if ok else "FAIL"
    suffix = f"  ({detail})" if detail else ""
    print(f"[{tag}] {name}{suffix}")
    assert ok, f"{name}{suffix}"


# ---------------------------------------------------------------------------
# 1. Gradient suite


def _central_diff(fun, x, coords, h):
    g = {}
    for idx in coords:
        xp = x.copy()
        xp[idx] += h
        xm = x.copy()
        xm[idx] -= h
        g[idx] = (fun(xp) - fun(xm)) / (2.0 * h)
    return g


def _grad_err(analytic, fun, x, coords, h):
    fd = _central_diff(fun, x, coords, h)
    ref = np.array([fd[i] for i in coords])
    got = np.array([analytic[i] for i in coords])
    scale = np.abs(ref).max()
    if scale == 0.0:
        return np.abs(got).max()
    return np.abs(got - ref).max() / scale


def _clear_kinks(x, other, h):
    """Shift entries sitting within 2h of the |.| kink by a 3h offset."""
    out = x.copy()
    near = np.abs(out - other) < 2.0 * h
    out[near] += 3.0 * h
    return out


def _all_coords(shape):
    return list(np.ndindex(shape))


def _sub_coords(rng, shape, n):
    flat = rng.choice(int(np.prod(shape)), size=n, replace=False)
    return [tuple(np.unravel_index(i, shape)) for i in flat]


def test_gradient_suite():
    n_seeds = 20
    h_img, w_img = 16, 16
    cfg = LossConfig(ssim_window=3, census_window=7)
    t0 = time.perf_counter()
    worst = {}

    def record(name, err, tol):
        worst[name] = (max(worst.get(name, (0, tol))[0], err), tol)

    for seed in range(n_seeds):
        rng = np.random.default_rng(1000 + seed)
        img_a = fs.Image(rng.uniform(0.05, 0.95, (h_img, w_img, 3)))
        img_b = fs.Image(rng.uniform(0.05, 0.95, (h_img, w_img, 3)))
        flow_arr = rng.uniform(-1.5, 1.5, (h_img, w_img, 2)) + 0.3
        mask = fs.VisibilityMask(
            (rng.uniform(0, 1, (h_img, w_img)) > 0.25).astype(float))

        # charbonnier (smooth-region check at 1e-4, kinks excluded)
        h = 1e-4
        a = _clear_kinks(rng.uniform(0, 1, (h_img, w_img)),
                         b_arr := rng.uniform(0, 1, (h_img, w_img)), h)
        lv = fs.charbonnier(a, b_arr)
        err = _grad_err(lv.gradients["a"],
                        lambda x: fs.charbonnier(x, b_arr).value,
                        a, _all_coords(a.shape), h)
        record("charbonnier", err, 1e-4)

        # SSIM / census (window losses: subsampled coordinates)
        coords = _sub_coords(rng, img_a.data.shape, 48)
        lv = fs.ssim_loss(img_a, img_b)
        err = _grad_err(lv.gradients["a"],
                        lambda x: fs.ssim_loss(fs.Image(x), img_b).value,
                        img_a.data.copy(), coords, 1e-4)
        record("ssim", err, 1e-3)

        lv = fs.census_loss(img_a, img_b)
        err = _grad_err(lv.gradients["a"],
                        lambda x: fs.census_loss(fs.Image(x), img_b).value,
                        img_a.data.copy(), coords, 1e-4)
        record("census", err, 1e-3)

        # photometric, all three kinds, gradient w.r.t. the flow
        for kind in ("charbonnier", "ssim", "census"):
            lv = fs.photometric_loss(img_a, img_b, fs.FlowField(flow_arr),
                                     mask, kind, cfg)
            full = kind == "charbonnier"
            coords = _all_coords(flow_arr.shape) if full else \
                _sub_coords(rng, flow_arr.shape, 48)
            err = _grad_err(
                lv.gradients["flow"],
                lambda x: fs.photometric_loss(img_a, img_b, fs.FlowField(x),
                                              mask, kind, cfg).value,
                flow_arr.copy(), coords, 1e-6)
            record(f"photometric-{kind}", err, 1e-3)

        # edge-aware smoothness, both orders (smooth-region 1e-4; entries
        # whose difference stencil straddles the |.| kink are excluded)
        for order in (1, 2):
            h = 1e-4
            f = rng.uniform(-2, 2, (h_img, w_img, 2))
            bad = np.zeros(f.shape, dtype=bool)
            for axis in (0, 1):
                near = np.abs(np.diff(f, n=order, axis=axis)) < 2 * h
                for off in range(order + 1):
                    sl = [slice(None)] * 3
                    sl[axis] = slice(off, near.shape[axis] + off)
                    bad[tuple(sl)] |= near
            coords = [i for i in _all_coords(f.shape) if not bad[i]]
            lv = fs.edge_aware_smoothness(fs.FlowField(f), img_a, order, 10.0)
            err = _grad_err(
                lv.gradients["flow"],
                lambda x: fs.edge_aware_smoothness(fs.FlowField(x), img_a,
                                                   order, 10.0).value,
                f, coords, h)
            record(f"edge-aware-k{order}", err, 1e-4)

        # temporal smoothness: FD oracle freezes the gradient-stopped
        # aligned references, matching the stop-gradient contract
        fp = rng.uniform(-2, 2, (h_img, w_img, 2))
        fc = rng.uniform(-2, 2, (h_img, w_img, 2)) + 3.0
        ff = rng.uniform(-2, 2, (h_img, w_img, 2))
        fcb = rng.uniform(-2, 2, (h_img, w_img, 2))
        oa = (rng.uniform(0, 1, (h_img, w_img)) > 0.3).astype(float)
        ob = (rng.uniform(0, 1, (h_img, w_img)) > 0.3).astype(float)
        aligned = [(warp_array(fp, fcb), oa), (warp_array(ff, fc), ob)]

        def temporal_frozen(fc_arr):
            total = 0.0
            for ref, m in aligned:
                cmap = ((np.abs(ref - fc_arr) + 0.01) ** 0.4).mean(axis=2)
                decay = np.sqrt((fc_arr ** 2).sum(axis=2)) + 1e-2
                total += float((cmap * m / decay).sum() / m.sum())
            return total

        lv = fs.temporal_smoothness(
            fs.FlowField(fp), fs.FlowField(fc), fs.FlowField(ff),
            fs.FlowField(fcb), fs.VisibilityMask(oa), fs.VisibilityMask(ob))
        err = _grad_err(lv.gradients["flow_c"], temporal_frozen, fc.copy(),
                        _all_coords(fc.shape), 1e-6)
        record("temporal-smoothness", err, 1e-3)

        # distillation (smooth-region 1e-4)
        h = 1e-4
        pseudo = rng.uniform(-2, 2, (h_img, w_img, 2))
        pred = _clear_kinks(rng.uniform(-2, 2, (h_img, w_img, 2)), pseudo, h)
        conf = fs.ConfidenceMap(rng.uniform(0, 1, (h_img, w_img)))
        lv = fs.distill_loss(fs.FlowField(pred), fs.FlowField(pseudo), conf)
        err = _grad_err(
            lv.gradients["flow"],
            lambda x: fs.distill_loss(fs.FlowField(x), fs.FlowField(pseudo),
                                      conf).value,
            pred, _all_coords(pred.shape), h)
        record("distill", err, 1e-4)

        # DOE supervision, both modes
        occ_mask = np.ones((h_img, w_img))
        occ_mask[4:10, 5:12] = 0.0
        vm = fs.VisibilityMask(occ_mask)
        for mode in ("sparse", "mixed"):
            lv = fs.doe_loss(fs.FlowField(flow_arr), fs.FlowField(pseudo), vm,
                             img_a, img_b, mode, cfg)
            coords = _sub_coords(rng, flow_arr.shape, 48)
            err = _grad_err(
                lv.gradients["flow"],
                lambda x: fs.doe_loss(fs.FlowField(x), fs.FlowField(pseudo),
                                      vm, img_a, img_b, mode, cfg).value,
                flow_arr.copy(), coords, 1e-6)
            record(f"doe-{mode}", err, 1e-3)

    elapsed = time.perf_counter() - t0
    for name, (err, tol) in sorted(worst.items()):
        check(f"gradient {name} <= {tol:g}", err <= tol, f"worst {err:.2e}")
    check("gradient suite runtime < 60 s", elapsed < 60.0, f"{elapsed:.1f}s")


# ---------------------------------------------------------------------------
# 2. Warp oracle


def test_warp_oracle():
    rng = np.random.default_rng(7)
    img = rng.uniform(0, 1, (24, 31, 3))
    checked = 0
    worst = 0.0
    for _ in range(4):
        flow = rng.uniform(-6, 6, (24, 31, 2))
        warped = warp_array(img, flow)
        ys = rng.integers(0, 24, size=2500)
        xs = rng.integers(0, 31, size=2500)
        for y, x in zip(ys, xs):
            u, v = flow[y, x]
            px = min(max(x + u, 0.0), 30.0)
            py = min(max(y + v, 0.0), 23.0)
            x0 = int(min(math.floor(px), 29))
            y0 = int(min(math.floor(py), 22))
            fx, fy = px - x0, py - y0
            expected = ((1 - fy) * ((1 - fx) * img[y0, x0] + fx * img[y0, x0 + 1])
                        + fy * ((1 - fx) * img[y0 + 1, x0] + fx * img[y0 + 1, x0 + 1]))
            worst = max(worst, float(np.abs(warped[y, x] - expected).max()))
            checked += 1
    check("warp matches per-point bilinear oracle (1e4 samples, 1e-6)",
          checked == 10000 and worst <= 1e-6, f"worst {worst:.2e}")

    image = fs.Image(rng.uniform(0, 1, (17, 23, 3)))
    zero = fs.FlowField(np.zeros((17, 23, 2)))
    identical = np.array_equal(fs.inverse_warp(image, zero).data, image.data)
    check("zero-flow warp is the exact identity", identical)


# ---------------------------------------------------------------------------
# 3. Occlusion oracle


def test_occlusion_oracle():
    scene = fs.generate_box_scene()  # 100 frames, velocity (4, 0)
    assert tuple(scene.params.velocity) == (4, 0)
    assert scene.params.n_frames == 100
    min_iou = 1.0
    ring_violations = 0
    for t in range(len(scene.forward_flows)):
        detected = fs.fb_occlusion_mask(scene.forward_flows[t],
                                        scene.backward_flows[t]).data == 0
        analytic = scene.occlusion_masks[t].data == 0
        inter = np.logical_and(detected, analytic).sum()
        union = np.logical_or(detected, analytic).sum()
        min_iou = min(min_iou, inter / union if union else 1.0)
        ring = (ndimage.binary_dilation(analytic)
                & ~ndimage.binary_erosion(analytic))
        ring_violations += int(((detected != analytic) & ~ring).sum())
    check("FB mask matches analytic band outside a 1-px ring",
          ring_violations == 0, f"{ring_violations} violations")
    check("FB mask IoU >= 0.95 on all 99 pairs", min_iou >= 0.95,
          f"min IoU {min_iou:.3f}")


# ---------------------------------------------------------------------------
# 4. Label-transform consistency under affine resampling


def test_affine_label_consistency():
    h = w = 64
    vel = (2, 0)
    rect = (10, 24, 16, 16)
    scene = fs.generate_box_scene(fs.BoxSceneParams(
        height=h, width=w, n_frames=2, box_height=rect[3], box_width=rect[2],
        box_x0=rect[0], box_y0=rect[1], velocity=vel))
    frames = list(scene.sequence.frames)
    flows = list(scene.forward_flows)
    ys, xs = np.mgrid[0:h, 0:w]
    grid = np.stack([xs, ys], axis=-1).astype(np.float64)
    epes = []
    for trial in range(10):
        schedule = fs.sample_affine_schedule(
            2, h, w,
            AffineScheduleParams(sigma_rot=0.05, sigma_log_scale=0.02,
                                 sigma_shear=0.02, sigma_trans=1.0),
            np.random.default_rng(500 + trial))
        _, out_flows = fs.apply_sve(frames, flows, schedule)
        src = schedule[0].apply(grid)
        on_box = ((src[..., 0] >= rect[0] - 0.5)
                  & (src[..., 0] < rect[0] + rect[2] - 0.5)
                  & (src[..., 1] >= rect[1] - 0.5)
                  & (src[..., 1] < rect[1] + rect[3] - 0.5))
        flow_src = np.where(on_box[..., None], np.array(vel, dtype=float), 0.0)
        oracle = schedule[1].inverse().apply(src + flow_src) - grid
        band = int(np.ceil(np.abs(oracle).max())) + 2
        interior = (slice(band, h - band), slice(band, w - band))
        err = np.sqrt(((out_flows[0].data - oracle) ** 2).sum(axis=2))
        epes.append(float(err[interior].mean()))
    check("affine label transform mean EPE <= 0.05 px (10 schedules)",
          max(epes) <= 0.05, f"worst {max(epes):.4f}")


# ---------------------------------------------------------------------------
# 5. Markov statistics


def test_markov_statistics():
    n = 100_000
    sigma_u, sigma_v = 0.7, 0.4
    traj = fs.markov_trajectory(fs.MotionState(0.0, 0.0), n + 1,
                                sigma_u, sigma_v, np.random.default_rng(11))
    inc = np.diff(np.array([[s.u, s.v] for s in traj]), axis=0)
    mean_ok = (abs(inc[:, 0].mean()) <= 3 * sigma_u / math.sqrt(n)
               and abs(inc[:, 1].mean()) <= 3 * sigma_v / math.sqrt(n))
    std_ok = (abs(inc[:, 0].std() - sigma_u) <= 0.05 * sigma_u
              and abs(inc[:, 1].std() - sigma_v) <= 0.05 * sigma_v)
    check("trajectory increment mean within 3 sigma/sqrt(N)", mean_ok)
    check("trajectory increment std within 5%", std_ok)

    rng = np.random.default_rng(13)
    angles = [math.atan2(s.v, s.u) % (2 * math.pi)
              for s in (fs.sample_initial_state(3.0, rng) for _ in range(n))]
    hist, _ = np.histogram(angles, bins=36, range=(0, 2 * math.pi))
    _, p = stats.chisquare(hist)
    check("initial angle uniform (chi^2 p > 0.01)", p > 0.01, f"p={p:.3f}")


# ---------------------------------------------------------------------------
# 6. Temporal-smoothness contract


def test_temporal_contract():
    c = np.tile([2.0, 0.0], (12, 15, 1))
    ones = fs.VisibilityMask(np.ones((12, 15)))
    lv = fs.temporal_smoothness(fs.FlowField(c), fs.FlowField(c),
                                fs.FlowField(c), fs.FlowField(-c), ones, ones)
    floor = 2.0 * (0.01 ** 0.4) / (2.0 + 1e-2)
    check("constant-velocity temporal floor to 1e-6",
          abs(lv.value - floor) <= 1e-6, f"|diff|={abs(lv.value - floor):.2e}")

    rng = np.random.default_rng(3)
    lv = fs.temporal_smoothness(
        fs.FlowField(rng.normal(0, 2, (10, 10, 2))),
        fs.FlowField(rng.normal(0, 2, (10, 10, 2))),
        fs.FlowField(rng.normal(0, 2, (10, 10, 2))),
        fs.FlowField(rng.normal(0, 2, (10, 10, 2))),
        fs.VisibilityMask(np.ones((10, 10))),
        fs.VisibilityMask(np.ones((10, 10))))
    zero_refs = (np.all(lv.gradients["flow_p"] == 0.0)
                 and np.all(lv.gradients["flow_f"] == 0.0))
    check("temporal gradients w.r.t. reference flows identically zero",
          zero_refs)


# ---------------------------------------------------------------------------
# 7. Conv-GRU contract


def test_gru_contract():
    rng = np.random.default_rng(5)
    c = 6
    hidden = rng.normal(size=(9, 11, c))
    feat = rng.normal(size=(9, 11, c))

    ws = fs.WeightSet()
    for gate in ("z", "r", "q"):
        ws[f"gru.{gate}.weight"] = np.zeros((3, 3, 2 * c, c))
        ws[f"gru.{gate}.bias"] = np.zeros(c)
    ws["gru.z.bias"] = np.full(c, -80.0)
    passthrough = fs.conv_gru_cell(hidden, feat, ws)
    check("forced z=0 passes the input exactly (1e-6)",
          np.abs(passthrough - feat).max() <= 1e-6)

    ws["gru.z.bias"] = np.zeros(c)
    halved = fs.conv_gru_cell(hidden, feat, ws)
    check("all-zero weights give 0.5 * input (1e-6)",
          np.abs(halved - 0.5 * feat).max() <= 1e-6)

    for gate in ("z", "r", "q"):
        ws[f"gru.{gate}.weight"] = rng.normal(0, 0.4, (3, 3, 2 * c, c))
        ws[f"gru.{gate}.bias"] = rng.normal(0, 0.2, c)
    out = fs.conv_gru_cell(hidden, feat, ws)
    hx = np.concatenate([hidden, feat], axis=2)
    r = _sigmoid(conv2d_same(hx, ws["gru.r.weight"], ws["gru.r.bias"]))
    q = np.tanh(conv2d_same(np.concatenate([r * feat, hidden], axis=2),
                            ws["gru.q.weight"], ws["gru.q.bias"]))
    convex = (np.all(out >= np.minimum(feat, q) - 1e-12)
              and np.all(out <= np.maximum(feat, q) + 1e-12))
    check("gate convexity bound on random inputs", convex)


# ---------------------------------------------------------------------------
# 8. Metrics worked examples


def test_metrics_contract():
    def const(u, v):
        return fs.FlowField(np.tile([float(u), float(v)], (6, 8, 1)))

    gt = const(4, 0)
    exact = (fs.epe(gt, gt) == 0.0
             and fs.epe(const(0, 0), gt) == 4.0
             and fs.epe(fs.FlowField(gt.data + np.array([3.0, 4.0])), gt) == 5.0)
    check("EPE worked examples hold exactly", exact)

    f1_exact = (fs.f1_all(const(96, 0), const(100, 0)) == 0.0
                and fs.f1_all(const(0, 0), const(4, 0)) == 100.0
                and fs.f1_all(gt, gt) == 0.0)
    check("F1 two-threshold worked examples hold exactly", f1_exact)

    rng = np.random.default_rng(17)
    worst = 0.0
    for _ in range(20):
        pred = fs.FlowField(rng.normal(0, 3, (9, 10, 2)))
        gtf = fs.FlowField(rng.normal(0, 3, (9, 10, 2)))
        occ = fs.VisibilityMask((rng.uniform(0, 1, (9, 10)) > 0.4).astype(float))
        out = fs.split_metrics(pred, gtf, occ)
        n_noc = int(occ.data.sum())
        n_occ = occ.data.size - n_noc
        if n_noc and n_occ:
            recombined = (out["noc"] * n_noc + out["occ"] * n_occ) / occ.data.size
            worst = max(worst, abs(recombined - out["all"]))
    check("NOC/OCC recombination identity to 1e-9", worst <= 1e-9,
          f"worst {worst:.2e}")


# ---------------------------------------------------------------------------
# 9. Format round-trips


def test_format_roundtrips():
    rng = np.random.default_rng(23)
    flo_ok = True
    kitti_ok = True
    for _ in range(100):
        h = int(rng.integers(1, 10))
        w = int(rng.integers(1, 10))
        flow = fs.FlowField(rng.normal(0, 20, (h, w, 2)).astype(np.float32))
        data = fs.write_flo(flow)
        flo_ok &= fs.write_flo(fs.read_flo(data)) == data

        valid = fs.VisibilityMask((rng.uniform(0, 1, (h, w)) > 0.3).astype(float))
        png = fs.write_kitti_png(fs.FlowField(rng.uniform(-200, 200, (h, w, 2))),
                                 valid)
        kitti_ok &= fs.write_kitti_png(*fs.read_kitti_png(png)) == png
    check(".flo round-trip bit-exact on 100 random fields", flo_ok)
    check("KITTI PNG16 round-trip bit-exact on 100 random fields", kitti_ok)


# ---------------------------------------------------------------------------
# 10. Enhancer determinism through the CLI


def _tree_digest(root):
    h = hashlib.sha256()
    for p in sorted(Path(root).rglob("*")):
        if p.is_file():
            h.update(p.relative_to(root).as_posix().encode())
            h.update(p.read_bytes())
    return h.hexdigest()


def test_augment_determinism(tmp_path):
    config = tmp_path / "config.json"
    config.write_text(json.dumps({
        "synth": {"height": 48, "width": 96, "n_frames": 5, "box_height": 14,
                  "box_width": 14, "box_x0": 4, "box_y0": 16,
                  "velocity": [4, 0]},
        "doe": {"n_occluders": 2, "n_superpixels": 16},
    }))
    scene = tmp_path / "scene"
    assert cli_main(["synth", "--config", str(config), "--seed", "1",
                     "--out", str(scene)]) == 0
    digests = []
    for name, workers in (("r1", "1"), ("r2", "1"), ("r3", "8")):
        out = tmp_path / name
        code = cli_main(["augment", "--in", str(scene / "frames"),
                         "--flows", str(scene / "flow_fwd"),
                         "--out", str(out), "--seed", "99",
                         "--config", str(config), "--workers", workers])
        assert code == 0
        digests.append(_tree_digest(out))
    check("cmd_augment byte-identical across two runs", digests[0] == digests[1])
    check("cmd_augment byte-identical across 1 vs 8 workers",
          digests[0] == digests[2])
