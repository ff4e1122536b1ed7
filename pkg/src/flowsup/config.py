"""Run configuration: a strict, versioned JSON document.

Unknown keys are rejected at every level so typos cannot silently fall back
to defaults. Every section is optional and defaults to the library defaults.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Optional

from .enhancers.content import CveScheduleParams
from .enhancers.motion import MotionState
from .enhancers.occlusion import DoeParams
from .enhancers.spatial import AffineScheduleParams
from .errors import ConfigError
from .losses import LossConfig
from .synth import BoxSceneParams
from .warp import ConfidenceParams, FbCheckParams

SCHEMA_VERSION = 1
_TOP_LEVEL_KEYS = {"schema_version", "seed", "loss", "synth", "occlusion",
                   "doe", "sve", "cve"}


def _build(cls, section: dict, name: str, coerce=None):
    allowed = {f.name for f in fields(cls)}
    unknown = set(section) - allowed
    if unknown:
        raise ConfigError(f"unknown keys in '{name}': {sorted(unknown)}")
    kwargs = dict(section)
    if coerce:
        for key, fn in coerce.items():
            if key in kwargs and kwargs[key] is not None:
                kwargs[key] = fn(kwargs[key])
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ConfigError(f"bad '{name}' section: {exc}") from exc


@dataclass(frozen=True)
class RunConfig:
    seed: Optional[int]
    loss: LossConfig
    synth: BoxSceneParams
    fb_params: FbCheckParams
    confidence: ConfidenceParams
    doe: DoeParams
    sve: AffineScheduleParams
    cve: CveScheduleParams


def parse_config(doc: dict) -> RunConfig:
    if not isinstance(doc, dict):
        raise ConfigError("configuration must be a JSON object")
    unknown = set(doc) - _TOP_LEVEL_KEYS
    if unknown:
        raise ConfigError(f"unknown top-level keys: {sorted(unknown)}")
    version = doc.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema_version {version}")

    occ = dict(doc.get("occlusion", {}))
    occ_allowed = {"alpha1", "alpha2", "delta", "max_displacement"}
    unknown = set(occ) - occ_allowed
    if unknown:
        raise ConfigError(f"unknown keys in 'occlusion': {sorted(unknown)}")
    fb = FbCheckParams(occ.get("alpha1", 0.01), occ.get("alpha2", 0.5))
    conf = ConfidenceParams(occ.get("delta", 0.01),
                            occ.get("max_displacement", 250.0))

    seed = doc.get("seed")
    if seed is not None and (not isinstance(seed, int) or seed < 0):
        raise ConfigError("seed must be a non-negative integer")

    return RunConfig(
        seed=seed,
        loss=_build(LossConfig, doc.get("loss", {}), "loss"),
        synth=_build(BoxSceneParams, doc.get("synth", {}), "synth",
                     coerce={"velocity": tuple}),
        fb_params=fb,
        confidence=conf,
        doe=_build(DoeParams, doc.get("doe", {}), "doe",
                   coerce={"crop_size": tuple,
                           "initial_states": lambda v: tuple(
                               MotionState(float(s[0]), float(s[1])) for s in v)}),
        sve=_build(AffineScheduleParams, doc.get("sve", {}), "sve",
                   coerce={"init_trans": tuple}),
        cve=_build(CveScheduleParams, doc.get("cve", {}), "cve",
                   coerce={"blur_kinds": tuple, "brightness_range": tuple,
                           "saturation_range": tuple, "hue_range": tuple,
                           "gamma_range": tuple}),
    )


def load_config(path) -> RunConfig:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    return parse_config(doc)


def default_config() -> RunConfig:
    return parse_config({})
