"""Gradient-based updates: Adam and plain SGD with optional schedules.

Learning-rate schedules count gradient steps (one per epoch here). Gradient
clipping is per variable: each array is rescaled to the clip norm
independently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class Schedule:
    kind: str = "constant"  # constant | cosine_decay
    learning_rate: float = 0.001
    decay_steps: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0.0:
            raise ValueError(f"learning rate must be positive, got {self.learning_rate}")
        if self.kind not in ("constant", "cosine_decay"):
            raise ValueError(f"unknown schedule {self.kind!r}")
        if self.kind == "cosine_decay" and self.decay_steps < 1:
            raise ValueError("cosine_decay requires decay_steps >= 1")


def lr_at(schedule: Schedule, t: int) -> float:
    """Learning rate at gradient step t (0-based)."""
    if schedule.kind == "constant":
        return schedule.learning_rate
    frac = min(t, schedule.decay_steps) / schedule.decay_steps
    return schedule.learning_rate * 0.5 * (1.0 + math.cos(math.pi * frac))


@dataclass(frozen=True)
class OptimizerConfig:
    algorithm: str = "adam"  # adam | sgd
    schedule: Schedule = field(default_factory=Schedule)
    clipnorm: float | None = None
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-7

    def __post_init__(self):
        if self.algorithm not in ("adam", "sgd"):
            raise ValueError(f"unknown optimizer {self.algorithm!r}")
        if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0):
            raise ValueError("adam betas must lie in [0, 1)")
        if self.eps <= 0.0:
            raise ValueError("adam eps must be positive")
        if self.clipnorm is not None and self.clipnorm <= 0.0:
            raise ValueError("clipnorm must be positive")


class Optimizer:
    """Owns the per-variable state of one run; never shared."""

    def __init__(self, config: OptimizerConfig):
        self.config = config
        self.t = 0
        self._m: dict = {}
        self._v: dict = {}

    def _clip(self, g: np.ndarray) -> np.ndarray:
        cn = self.config.clipnorm
        if cn is None:
            return g
        norm = float(np.sqrt(np.sum(g * g)))
        if norm > cn:
            g = g * (cn / norm)
        return g

    def step(self, variables: dict, gradients: dict) -> dict:
        """One update; returns new variable values, leaves inputs untouched."""
        cfg = self.config
        lr = lr_at(cfg.schedule, self.t)
        self.t += 1
        out = {}
        for name, value in variables.items():
            g = self._clip(np.asarray(gradients[name], dtype=np.float64))
            if cfg.algorithm == "sgd":
                out[name] = value - lr * g
                continue
            m = self._m.get(name)
            v = self._v.get(name)
            if m is None:
                m = np.zeros_like(value)
                v = np.zeros_like(value)
            m = cfg.beta1 * m + (1.0 - cfg.beta1) * g
            v = cfg.beta2 * v + (1.0 - cfg.beta2) * g * g
            self._m[name] = m
            self._v[name] = v
            m_hat = m / (1.0 - cfg.beta1**self.t)
            v_hat = v / (1.0 - cfg.beta2**self.t)
            out[name] = value - lr * m_hat / (np.sqrt(v_hat) + cfg.eps)
        return out
