"""Reparameterized sampling, discrete relaxation, and constraint transforms.

Sampling draws parameter-free noise and combines it with live graph nodes, so
gradients flow to the distribution parameters. Discrete (binomial) likelihoods
are relaxed to a continuous surrogate with temperature-scaled softmax over
Gumbel-perturbed log probabilities. Constraint transforms map unconstrained
reals into bounded domains: softplus for single bounds (numerically more
stable than exp), scaled logistic for double bounds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from . import tape
from .tape import DomainError, Node, constant, sigmoid_np, softplus_np

DEFAULT_GUMBEL_TEMPERATURE = 1.6
_GUMBEL_CLIP = 1e-12

FAMILIES = ("normal", "halfnormal", "uniform", "binomial")


@dataclass(frozen=True)
class Constraint:
    """Open interval (lower, upper); infinities mean unconstrained sides."""

    lower: float = -math.inf
    upper: float = math.inf

    def __post_init__(self):
        if not self.lower < self.upper:
            raise ValueError(f"constraint requires lower < upper, got ({self.lower}, {self.upper})")

    @property
    def is_free(self) -> bool:
        return math.isinf(self.lower) and math.isinf(self.upper)


@dataclass
class DistributionSpec:
    """A prior family with its parameter nodes.

    Parameter roles by family: normal -> loc, scale; halfnormal -> scale;
    uniform -> low, high; binomial -> total_count (int), probability (node).
    """

    family: str
    params: Mapping[str, Node] = field(default_factory=dict)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}, expected one of {FAMILIES}")


def _check_positive(node: Node, role: str) -> None:
    if np.any(node.value <= 0.0):
        raise DomainError(f"{role} must be positive at evaluation time, got {node.value}")


def sample_reparameterized(
    spec: DistributionSpec, shape: tuple, rng: np.random.Generator
) -> Node:
    """Draw from the family as a differentiable function of its parameters.

    Noise enters as a constant leaf; gradients flow to loc/scale (normal),
    scale (halfnormal), low/high (uniform).
    """
    if spec.family == "normal":
        loc, scale = spec.params["loc"], spec.params["scale"]
        _check_positive(scale, "normal scale")
        eps = constant(rng.standard_normal(shape))
        return loc + scale * eps
    if spec.family == "halfnormal":
        scale = spec.params["scale"]
        _check_positive(scale, "halfnormal scale")
        eps = constant(np.abs(rng.standard_normal(shape)))
        return scale * eps
    if spec.family == "uniform":
        low, high = spec.params["low"], spec.params["high"]
        if np.any(high.value <= low.value):
            raise DomainError("uniform requires high > low at evaluation time")
        u = constant(rng.random(shape))
        return low + (high - low) * u
    raise ValueError(f"family {spec.family!r} has no explicit reparameterization")


def binomial_log_pmf(count: int, probability: Node, support: int) -> Node:
    """log pmf of Binomial(count, p) on k = 0..support, stacked on a new last axis.

    Uses log-gamma for the binomial coefficients; requires support <= count
    and p strictly inside (0, 1).
    """
    count = int(count)
    support = int(support)
    if support > count:
        raise ValueError(f"support 0..{support} exceeds total count {count}")
    if np.any(probability.value <= 0.0) or np.any(probability.value >= 1.0):
        raise DomainError("binomial probability outside (0, 1)")
    k = np.arange(support + 1, dtype=np.float64)
    log_choose = np.array(
        [
            math.lgamma(count + 1) - math.lgamma(ki + 1) - math.lgamma(count - ki + 1)
            for ki in k
        ]
    )
    p = tape.reshape(probability, probability.shape + (1,))
    return constant(log_choose) + constant(k) * tape.log(p) + constant(count - k) * tape.log(
        1.0 - p
    )


def gumbel_softmax_trick(
    log_pmf: Node,
    temp: float = DEFAULT_GUMBEL_TEMPERATURE,
    rng: np.random.Generator | None = None,
) -> Node:
    """Continuous relaxation of a discrete draw over support 0..K.

    Perturbs the log pmf (last axis) with Gumbel noise, softmaxes at the given
    temperature and returns the weighted support value sum(w_k * k). The
    output always lies in [0, K].
    """
    if temp <= 0.0:
        raise ValueError(f"softmax temperature must be positive, got {temp}")
    if rng is None:
        raise ValueError("gumbel_softmax_trick requires an rng stream")
    u = rng.random(log_pmf.shape)
    u = np.clip(u, _GUMBEL_CLIP, 1.0 - _GUMBEL_CLIP)
    gumbel = constant(-np.log(-np.log(u)))
    weights = tape.softmax((log_pmf + gumbel) / temp, axis=-1)
    k = constant(np.arange(log_pmf.shape[-1], dtype=np.float64))
    return tape.sum_(weights * k, axis=-1)


# ---------------------------------------------------------------------------
# constraint transforms (unconstrained real <-> open interval)
# ---------------------------------------------------------------------------


def constrain(u: Node, c: Constraint) -> Node:
    """Map an unconstrained node into the constraint interval."""
    lower_open = not math.isinf(c.lower)
    upper_open = not math.isinf(c.upper)
    if lower_open and upper_open:
        return c.lower + (c.upper - c.lower) * tape.sigmoid(u)
    if lower_open:
        return c.lower + tape.softplus(u)
    if upper_open:
        return c.upper - tape.softplus(u)
    return u


def constrain_np(u, c: Constraint) -> np.ndarray:
    """Plain-array version of :func:`constrain` (no graph)."""
    u = np.asarray(u, dtype=np.float64)
    lower_open = not math.isinf(c.lower)
    upper_open = not math.isinf(c.upper)
    if lower_open and upper_open:
        return c.lower + (c.upper - c.lower) * sigmoid_np(np.atleast_1d(u)).reshape(u.shape)
    if lower_open:
        return c.lower + softplus_np(u)
    if upper_open:
        return c.upper - softplus_np(u)
    return u


def _softplus_inverse(v: np.ndarray) -> np.ndarray:
    # log(exp(v) - 1), stable on both tails
    v = np.asarray(v, dtype=np.float64)
    return np.where(v > 20.0, v + np.log1p(-np.exp(-np.clip(v, 20.0, None))), np.log(np.expm1(np.clip(v, None, 20.0))))


def unconstrain(x, c: Constraint) -> np.ndarray:
    """Exact inverse of :func:`constrain`; input must lie strictly inside."""
    x = np.asarray(x, dtype=np.float64)
    if np.any(x <= c.lower) or np.any(x >= c.upper):
        raise DomainError(f"value {x} not strictly inside ({c.lower}, {c.upper})")
    lower_open = not math.isinf(c.lower)
    upper_open = not math.isinf(c.upper)
    if lower_open and upper_open:
        p = (x - c.lower) / (c.upper - c.lower)
        return np.log(p) - np.log1p(-p)
    if lower_open:
        return _softplus_inverse(x - c.lower)
    if upper_open:
        return _softplus_inverse(c.upper - x)
    return x
