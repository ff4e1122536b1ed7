import numpy as np
import pytest

import flowsup as fs
from flowsup.losses import DistillPass, DoePass, LossConfig
from conftest import random_flow, random_image


def make_pair(rng, h=10, w=12):
    frames = [random_image(rng, h, w) for _ in range(2)]
    flows = [random_flow(rng, h, w)]
    bwd = [random_flow(rng, h, w)]
    return frames, flows, bwd


def make_sequence(rng, n=4, h=10, w=12):
    frames = [random_image(rng, h, w) for _ in range(n)]
    fwd = [random_flow(rng, h, w) for _ in range(n - 1)]
    bwd = [random_flow(rng, h, w) for _ in range(n - 1)]
    return frames, fwd, bwd


def test_two_frames_equals_single_pair(rng):
    frames, flows, bwd = make_pair(rng)
    cfg = LossConfig(ssim_window=3)
    seq = fs.sequence_loss(frames, flows, bwd, None, cfg)
    mask = fs.fb_occlusion_mask(flows[0], bwd[0], cfg.fb_params)
    photo = fs.photometric_loss(frames[0], frames[1], flows[0], mask,
                                cfg.photometric_kind, cfg)
    smooth = fs.edge_aware_smoothness(flows[0], frames[0], cfg.smooth_order,
                                      cfg.smooth_edge_lambda)
    assert seq.value == pytest.approx(photo.value + cfg.lambda1 * smooth.value)
    assert seq.breakdown["temporal_smoothness"] == 0.0


def test_lambda_zero_reduces_to_photometric(rng):
    frames, fwd, bwd = make_sequence(rng)
    cfg = LossConfig(lambda1=0.0, lambda2=0.0)
    seq = fs.sequence_loss(frames, fwd, bwd, None, cfg)
    assert seq.value == pytest.approx(seq.breakdown["photometric"])


def test_sequence_synthetic_floor():
    scene = fs.generate_box_scene(fs.BoxSceneParams(
        height=32, width=96, n_frames=5, box_height=12, box_width=12,
        box_x0=4, box_y0=10))
    cfg = LossConfig(lambda1=0.0, lambda2=0.0)
    seq = fs.sequence_loss(scene.sequence.frames, scene.forward_flows,
                           scene.backward_flows, scene.occlusion_masks, cfg)
    assert seq.value <= 2.0 * 0.01 ** 0.4


def test_sequence_gradient_keys_and_temporal_wiring(rng):
    frames, fwd, bwd = make_sequence(rng, n=5)
    cfg = LossConfig()
    seq = fs.sequence_loss(frames, fwd, bwd, None, cfg)
    assert set(seq.gradients) == {f"flow_{t}" for t in range(4)}
    for g in seq.gradients.values():
        assert g.shape == (10, 12, 2)
        assert np.all(np.isfinite(g))


def test_sequence_length_mismatch(rng):
    frames, fwd, bwd = make_sequence(rng)
    with pytest.raises(fs.DimensionError):
        fs.sequence_loss(frames, fwd[:-1], bwd, None, LossConfig())
    with pytest.raises(fs.DimensionError):
        fs.sequence_loss(frames, fwd, bwd[:-1], None, LossConfig())


def _enhancer_passes(rng, frames, fwd):
    n_pairs = len(fwd)
    h, w = frames[0].height, frames[0].width
    mask = np.ones((h, w))
    mask[2:5, 2:5] = 0.0
    doe = DoePass(frames=frames, flows=fwd,
                  pseudo=[random_flow(rng, h, w) for _ in range(n_pairs)],
                  masks=[fs.VisibilityMask(mask)] * n_pairs)
    sve = DistillPass(flows=[random_flow(rng, h, w) for _ in range(n_pairs)],
                      pseudo=[random_flow(rng, h, w) for _ in range(n_pairs)])
    cve = DistillPass(flows=[random_flow(rng, h, w) for _ in range(n_pairs)],
                      pseudo=[random_flow(rng, h, w) for _ in range(n_pairs)],
                      confidences=[fs.ConfidenceMap(rng.uniform(0, 1, (h, w)))
                                   for _ in range(n_pairs)])
    return doe, sve, cve


def test_self_distill_lambda_zero_equals_sequence(rng):
    frames, fwd, bwd = make_sequence(rng)
    cfg = LossConfig(lambda3=0.0, lambda4=0.0, lambda5=0.0)
    total = fs.self_distill_total(frames, fwd, bwd, None, None, None, None, cfg)
    seq = fs.sequence_loss(frames, fwd, bwd, None, cfg)
    assert total.value == pytest.approx(seq.value)


def test_self_distill_missing_pass_is_config_error(rng):
    frames, fwd, bwd = make_sequence(rng)
    with pytest.raises(fs.ConfigError):
        fs.self_distill_total(frames, fwd, bwd, None, None, None, None,
                              LossConfig())


def test_self_distill_composes_floors(rng):
    frames, fwd, bwd = make_sequence(rng)
    h, w = 10, 12
    n_pairs = len(fwd)
    ones_mask = [fs.VisibilityMask(np.ones((h, w)))] * n_pairs
    # every prediction equals its pseudo-label
    doe = DoePass(frames=frames, flows=fwd, pseudo=fwd, masks=ones_mask)
    sve = DistillPass(flows=fwd, pseudo=fwd)
    cve = DistillPass(flows=fwd, pseudo=fwd)
    cfg = LossConfig(doe_mode="sparse")
    total = fs.self_distill_total(frames, fwd, bwd, None, doe, sve, cve, cfg)
    seq = fs.sequence_loss(frames, fwd, bwd, None, cfg)
    floor = 0.01 ** 0.4
    expected = seq.value + (cfg.lambda3 + cfg.lambda4 + cfg.lambda5) * floor
    assert total.value == pytest.approx(expected, rel=1e-9)


def test_self_distill_lambda3_scales_only_doe(rng):
    frames, fwd, bwd = make_sequence(rng)
    doe, sve, cve = _enhancer_passes(rng, frames, fwd)
    base_cfg = LossConfig(ssim_window=3)
    doubled = LossConfig(ssim_window=3, lambda3=2 * base_cfg.lambda3)
    a = fs.self_distill_total(frames, fwd, bwd, None, doe, sve, cve, base_cfg)
    b = fs.self_distill_total(frames, fwd, bwd, None, doe, sve, cve, doubled)
    assert a.breakdown["doe"] == pytest.approx(b.breakdown["doe"])
    assert a.breakdown["sve"] == pytest.approx(b.breakdown["sve"])
    assert a.breakdown["cve"] == pytest.approx(b.breakdown["cve"])
    delta = b.value - a.value
    assert delta == pytest.approx(base_cfg.lambda3 * a.breakdown["doe"], rel=1e-9)


def test_breakdown_keys_stable(rng):
    frames, fwd, bwd = make_sequence(rng)
    doe, sve, cve = _enhancer_passes(rng, frames, fwd)
    total = fs.self_distill_total(frames, fwd, bwd, None, doe, sve, cve,
                                  LossConfig(ssim_window=3))
    assert set(total.breakdown) == {"photometric", "smoothness",
                                    "temporal_smoothness", "doe", "sve",
                                    "cve", "total"}


def test_sequence_without_backward_flows(rng):
    frames = [random_image(rng, 8, 10) for _ in range(4)]
    fwd = [random_flow(rng, 8, 10) for _ in range(3)]
    cfg = LossConfig()
    seq = fs.sequence_loss(frames, fwd, None, None, cfg)
    # no backward flows: all-visible masks, temporal term skipped entirely
    assert seq.breakdown["temporal_smoothness"] == 0.0
    ones = [fs.VisibilityMask(np.ones((8, 10)))] * 3
    explicit = fs.sequence_loss(frames, fwd, None, ones, cfg)
    assert seq.value == pytest.approx(explicit.value)
