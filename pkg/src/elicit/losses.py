"""Discrepancy measures and total-loss assembly.

Each elicited statistic is scored against its expert counterpart by a squared
error (l2) or a squared, biased maximum mean discrepancy (mmd2) with an
energy or Gaussian kernel. Components are weighted and summed into the total
loss; expert statistics enter as constants and take no gradient.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from . import backend, tape
from .errors import ConfigError
from .tape import Node

LOSS_KINDS = ("l2", "mmd2")
KERNELS = ("energy", "gaussian")


@dataclass(frozen=True)
class LossSpec:
    kind: str = "mmd2"
    kernel: str = "energy"
    sigma: float | None = None

    def __post_init__(self):
        if self.kind not in LOSS_KINDS:
            raise ConfigError(f"unknown loss kind {self.kind!r}, expected one of {LOSS_KINDS}")
        if self.kind == "mmd2":
            if self.kernel not in KERNELS:
                raise ConfigError(f"unknown mmd2 kernel {self.kernel!r}, expected one of {KERNELS}")
            if self.kernel == "gaussian":
                if self.sigma is None or self.sigma <= 0.0:
                    raise ConfigError("gaussian kernel requires an explicit sigma > 0")


@dataclass
class LossBreakdown:
    """Total loss node plus the weighted per-statistic components."""

    total: Node
    components: Mapping = field(default_factory=dict)


def _as_batched(x: Node) -> Node:
    if x.value.ndim == 1:
        return tape.reshape(x, (1, -1))
    if x.value.ndim == 2:
        return x
    raise ConfigError(f"loss input must be [B, n] or [n], got shape {x.shape}")


def l2(model: Node, expert: np.ndarray) -> Node:
    """Mean squared difference over batch and statistic axes."""
    model = _as_batched(model)
    expert = np.asarray(expert, dtype=np.float64).reshape(-1)
    if model.shape[1] != expert.shape[0]:
        raise ConfigError(
            f"l2: statistic length {model.shape[1]} != expert length {expert.shape[0]}"
        )
    diff = model - tape.constant(expert)
    return tape.mean(diff * diff)


def mmd2_biased(x: Node, y: np.ndarray, kernel: str = "energy", sigma: float | None = None) -> Node:
    """Biased squared MMD between the model sample rows and the expert samples.

    Per batch element: (1/n^2) sum k(x_i, x_j) + (1/m^2) sum k(y_k, y_l)
    - (2/nm) sum k(x_i, y_k), averaged over the batch. Kernels: energy
    k(a, b) = -|a - b| (one-dimensional statistics) and gaussian
    k(a, b) = exp(-(a-b)^2 / (2 sigma^2)).
    """
    if kernel not in KERNELS:
        raise ConfigError(f"unknown mmd2 kernel {kernel!r}")
    x = _as_batched(x)
    y = np.ascontiguousarray(np.asarray(y, dtype=np.float64).reshape(-1))
    if x.shape[1] < 1 or y.shape[0] < 1:
        raise ConfigError("mmd2 requires at least one sample on each side")
    xv = np.ascontiguousarray(x.value)

    if kernel == "energy":
        per_batch = backend.mmd2_energy(xv, y)

        def bwd(g):
            x.accumulate(backend.mmd2_energy_grad(xv, y, np.ascontiguousarray(g)))

    else:
        if sigma is None or sigma <= 0.0:
            raise ConfigError("gaussian kernel requires an explicit sigma > 0")
        sig = float(sigma)
        per_batch = backend.mmd2_gaussian(xv, y, sig)

        def bwd(g):
            x.accumulate(backend.mmd2_gaussian_grad(xv, y, sig, np.ascontiguousarray(g)))

    return tape.mean(Node(per_batch, (x,), bwd))


def discrepancy(spec: LossSpec, model: Node, expert: np.ndarray) -> Node:
    if spec.kind == "l2":
        return l2(model, expert)
    return mmd2_biased(model, expert, kernel=spec.kernel, sigma=spec.sigma)


def total_loss(stats: Mapping, expert: Mapping, specs) -> LossBreakdown:
    """Assemble the weighted multi-objective loss.

    Components are summed in sorted key order so the total is independent of
    the spec ordering.
    """
    components = {}
    for spec in specs:
        key = spec.key
        if key not in stats:
            raise ConfigError(f"no simulated statistic for key {key!r}")
        if key not in expert:
            raise ConfigError(
                f"expert data is missing key {key!r}; expected keys: "
                f"{sorted(s.key for s in specs)}"
            )
        d = discrepancy(spec.loss, stats[key], np.asarray(expert[key]))
        components[key] = spec.weight * d
    total = None
    for key in sorted(components):
        total = components[key] if total is None else total + components[key]
    if total is None:
        raise ConfigError("no loss components: the target list is empty")
    return LossBreakdown(total=total, components=components)
