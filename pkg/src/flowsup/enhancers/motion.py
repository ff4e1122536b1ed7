"""Markov-chain motion state sampling for simulated occluders."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ParameterError


@dataclass(frozen=True)
class MotionState:
    """Per-frame velocity (u, v) in pixels/frame."""

    u: float
    v: float

    def __post_init__(self):
        if not (np.isfinite(self.u) and np.isfinite(self.v)):
            raise ParameterError("motion state must be finite")

    def as_array(self) -> np.ndarray:
        return np.array([self.u, self.v])


def sample_initial_state(mu_speed: float, rng: np.random.Generator) -> MotionState:
    """Initial velocity: speed ~ N(mu, mu/3) clamped at 0, angle ~ U[0, 2pi)."""
    if mu_speed <= 0:
        raise ParameterError("mu_speed must be positive")
    speed = max(0.0, rng.normal(mu_speed, mu_speed / 3.0))
    angle = rng.uniform(0.0, 2.0 * np.pi)
    return MotionState(speed * np.cos(angle), speed * np.sin(angle))


def markov_trajectory(init: MotionState, n_frames: int, sigma_u: float,
                      sigma_v: float, rng: np.random.Generator) -> list:
    """Velocity random walk: S(t) ~ N(S(t-1), diag(sigma_u^2, sigma_v^2))."""
    if n_frames < 1:
        raise ParameterError("n_frames must be >= 1")
    if sigma_u < 0 or sigma_v < 0:
        raise ParameterError("step sigmas must be >= 0")
    states = [init]
    for _ in range(n_frames - 1):
        prev = states[-1]
        states.append(MotionState(rng.normal(prev.u, sigma_u),
                                  rng.normal(prev.v, sigma_v)))
    return states
