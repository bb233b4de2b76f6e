"""Target quantities and the elicitation queries applied to them.

A target either passes a simulator output through verbatim or applies a
registered transform to named outputs (e.g. the variance-ratio R^2). A query
then reduces the target to the statistic the expert is asked about:
quantiles, the raw samples (identity), or pairwise parameter correlations.

Statistic keys follow the stable contract "<kind>_<target-name>" (correlation
abbreviates to "cor"), which expert-data files must match exactly.
"""

from __future__ import annotations

import inspect
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import tape
from .errors import ConfigError
from .losses import LossSpec
from .tape import Node

QUERY_KINDS = ("quantiles", "identity", "correlation", "custom")


@dataclass(frozen=True)
class QuerySpec:
    kind: str
    probs: tuple = ()
    custom_name: str = ""

    def __post_init__(self):
        if self.kind not in QUERY_KINDS:
            raise ConfigError(f"unknown query kind {self.kind!r}, expected one of {QUERY_KINDS}")
        if self.kind == "quantiles":
            p = np.asarray(self.probs, dtype=np.float64)
            if p.size == 0 or np.any(p <= 0.0) or np.any(p >= 1.0) or np.any(np.diff(p) <= 0):
                raise ConfigError(
                    f"quantile probabilities must be strictly increasing in (0, 1), got {self.probs}"
                )

    @property
    def key_prefix(self) -> str:
        if self.kind == "correlation":
            return "cor"
        if self.kind == "custom":
            return self.custom_name
        return self.kind


@dataclass(frozen=True)
class TargetSpec:
    """One elicited statistic: target, query, discrepancy, weight."""

    name: str
    query: QuerySpec
    loss: LossSpec
    weight: float = 1.0
    target_method: str | None = None

    def __post_init__(self):
        if self.weight < 0.0:
            raise ConfigError(f"target {self.name!r}: weight must be >= 0, got {self.weight}")

    @property
    def key(self) -> str:
        return f"{self.query.key_prefix}_{self.name}"


# transforms usable via target_method; each consumes named simulator outputs
TRANSFORM_REGISTRY: dict = {}
# custom queries usable via QuerySpec(kind="custom", custom_name=...)
QUERY_REGISTRY: dict = {}


def register_transform(name: str, fn: Callable) -> None:
    TRANSFORM_REGISTRY[name] = fn


def register_query(name: str, fn: Callable) -> None:
    QUERY_REGISTRY[name] = fn


def r2(mu: Node, y: Node) -> Node:
    """Variance ratio Var(mu)/Var(y) over the observation axis (population variance)."""
    return tape.variance(mu, axis=-1) / tape.variance(y, axis=-1)


register_transform("r2", r2)


def compute_targets(outputs: dict, specs, prior_samples: Node) -> dict:
    """Resolve each target spec to a graph node.

    Pass-through targets must name a simulator output; transform targets call
    the registered function with the outputs matching its argument names;
    correlation queries always operate on the prior samples themselves.
    """
    targets = {}
    for spec in specs:
        if spec.query.kind == "correlation":
            targets[spec.name] = prior_samples
            continue
        if spec.target_method is not None:
            fn = TRANSFORM_REGISTRY.get(spec.target_method)
            if fn is None:
                raise ConfigError(
                    f"target {spec.name!r}: unknown transform {spec.target_method!r}; "
                    f"registered: {sorted(TRANSFORM_REGISTRY)}"
                )
            args = []
            for arg in inspect.signature(fn).parameters:
                if arg not in outputs:
                    raise ConfigError(
                        f"transform {spec.target_method!r} needs output {arg!r}; "
                        f"model provides {sorted(outputs)}"
                    )
                args.append(outputs[arg])
            targets[spec.name] = fn(*args)
            continue
        if spec.name not in outputs:
            raise ConfigError(
                f"target {spec.name!r} does not match any model output; "
                f"available: {sorted(outputs)}"
            )
        targets[spec.name] = outputs[spec.name]
    return targets


def quantiles(target: Node, probs) -> Node:
    """Empirical quantiles per batch element, [B, ...] -> [B, len(probs)].

    All non-batch axes are flattened (the prior-predictive pool for that batch
    element); quantile q interpolates linearly between the order statistics
    around position q*(n-1), and the gradient flows to the one or two
    contributing order statistics with weights (1-frac, frac).
    """
    probs = np.asarray(probs, dtype=np.float64)
    batch = target.shape[0]
    x = tape.reshape(target, (batch, -1))
    n = x.shape[1]
    if n < 2:
        raise ConfigError(f"quantiles need >= 2 values per batch element, got {n}")
    pos = probs * (n - 1)
    lo = np.floor(pos).astype(np.intp)
    hi = np.ceil(pos).astype(np.intp)
    frac = pos - lo

    order = np.argsort(x.value, axis=1)
    idx_lo = order[:, lo]
    idx_hi = order[:, hi]
    rows = np.arange(batch)[:, None]
    out = (1.0 - frac) * x.value[rows, idx_lo] + frac * x.value[rows, idx_hi]

    def bwd(g):
        full = np.zeros_like(x.value)
        np.add.at(full, (rows, idx_lo), (1.0 - frac) * g)
        np.add.at(full, (rows, idx_hi), frac * g)
        x.accumulate(full)

    return Node(out, (x,), bwd)


def identity(target: Node) -> Node:
    """Raw samples flattened per batch element, [B, ...] -> [B, n]."""
    return tape.reshape(target, (target.shape[0], -1))


def pairwise_correlation(prior_samples: Node) -> Node:
    """Pearson correlations over the sample axis for all unordered pairs.

    [B, S, P] -> [B, P*(P-1)/2] in row-major upper-triangle order
    (0,1), (0,2), ..., (P-2,P-1).
    """
    b, s, p = prior_samples.shape
    if s < 2:
        raise ConfigError(f"correlation needs >= 2 prior samples, got {s}")
    mu = tape.mean(prior_samples, axis=1)
    centered = prior_samples - tape.reshape(mu, (b, 1, p))
    cov = tape.matmul(tape.transpose(centered, (0, 2, 1)), centered) / float(s)
    sd = tape.sqrt(tape.variance(prior_samples, axis=1))
    denom = tape.reshape(sd, (b, p, 1)) * tape.reshape(sd, (b, 1, p))
    corr = cov / denom
    iu, ju = np.triu_indices(p, k=1)

    def bwd(g):
        full = np.zeros_like(corr.value)
        full[:, iu, ju] = g
        corr.accumulate(full)

    return Node(corr.value[:, iu, ju], (corr,), bwd)


def apply_queries(targets: dict, specs, prior_samples: Node) -> dict:
    """Turn resolved targets into elicited statistics keyed "<kind>_<name>"."""
    stats = {}
    for spec in specs:
        node = targets[spec.name]
        q = spec.query
        if q.kind == "quantiles":
            stat = quantiles(node, q.probs)
        elif q.kind == "identity":
            stat = identity(node)
        elif q.kind == "correlation":
            stat = pairwise_correlation(node)
        else:
            fn = QUERY_REGISTRY.get(q.custom_name)
            if fn is None:
                raise ConfigError(
                    f"unknown custom query {q.custom_name!r}; registered: {sorted(QUERY_REGISTRY)}"
                )
            stat = fn(node)
        stats[spec.key] = stat
    return stats


def get_expert_data_format(specs, num_params: int | None = None) -> dict:
    """Template mapping each expected expert key to its required length.

    Correlation entries need the parameter count; identity and custom entries
    accept sample vectors of any length (reported as None).
    """
    template = {}
    for spec in specs:
        q = spec.query
        if q.kind == "quantiles":
            template[spec.key] = len(q.probs)
        elif q.kind == "correlation":
            if num_params is None:
                raise ConfigError("correlation template needs the model parameter count")
            template[spec.key] = num_params * (num_params - 1) // 2
        else:
            template[spec.key] = None
    return template
