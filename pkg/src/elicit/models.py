"""Forward simulators mapping prior samples to named target-quantity tensors.

A model is a function ``(prior_samples, context, rng) -> {name: Node}`` whose
outputs all carry leading (batch, prior-sample) axes. Two models ship
built-in; users register their own with :func:`register_model` (the CLI only
exposes registered names).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from . import dists, tape
from .errors import ConfigError
from .tape import Node, constant


@dataclass(frozen=True)
class ModelDef:
    fn: Callable
    param_names: tuple
    output_names: tuple


@dataclass
class GenerativeModelSpec:
    """A registered model identifier plus its static context values."""

    name: str
    context: Mapping = field(default_factory=dict)


MODEL_REGISTRY: dict = {}


def register_model(name: str, fn: Callable, param_names, output_names) -> None:
    """Register a simulator under a name; overwrites any previous entry."""
    MODEL_REGISTRY[name] = ModelDef(fn, tuple(param_names), tuple(output_names))


def model_def(name: str) -> ModelDef:
    if name not in MODEL_REGISTRY:
        raise ConfigError(
            f"unknown model {name!r}; registered models: {sorted(MODEL_REGISTRY)}"
        )
    return MODEL_REGISTRY[name]


def forward(
    spec: GenerativeModelSpec, prior_samples: Node, rng: np.random.Generator
) -> dict:
    """Run the simulator; checks the trailing parameter axis against the model."""
    mdef = model_def(spec.name)
    got = prior_samples.shape[-1]
    if got != len(mdef.param_names):
        raise ConfigError(
            f"model {spec.name!r} expects {len(mdef.param_names)} parameters "
            f"ordered {mdef.param_names}, got {got}"
        )
    return mdef.fn(prior_samples, dict(spec.context), rng)


def design_categorical(n_gr: int) -> np.ndarray:
    """Dummy-coded design for a three-level categorical predictor.

    Stacks n_gr copies of each contrast row; shape [3*n_gr, 3], first column
    is the intercept.
    """
    n_gr = int(n_gr)
    if n_gr < 1:
        raise ValueError(f"n_gr must be >= 1, got {n_gr}")
    contrasts = np.array([[1.0, 0.0, 0.0], [1.0, 1.0, 0.0], [1.0, 0.0, 1.0]])
    return np.repeat(contrasts, n_gr, axis=0)


def _normal_regression_categorical(prior_samples: Node, context: dict, rng) -> dict:
    """Normal likelihood, linear predictor over the categorical design.

    Parameters ordered (beta0, beta1, beta2, sigma); sigma is shared across
    the observations of one prior draw. Group outputs are contiguous blocks
    of n_gr observations.
    """
    n_gr = int(context.get("n_gr", 30))
    design = np.asarray(context.get("design_matrix", design_categorical(n_gr)), dtype=np.float64)
    betas = prior_samples[:, :, 0:3]
    sigma = prior_samples[:, :, 3:4]
    mu = tape.matmul(betas, constant(design.T))
    eps = constant(rng.standard_normal(mu.shape))
    y = mu + sigma * eps
    return {
        "y_gr0": y[:, :, 0 * n_gr : 1 * n_gr],
        "y_gr1": y[:, :, 1 * n_gr : 2 * n_gr],
        "y_gr2": y[:, :, 2 * n_gr : 3 * n_gr],
        "mu": mu,
        "y": y,
    }


def _binomial_regression(prior_samples: Node, context: dict, rng) -> dict:
    """Binomial likelihood with sigmoid link, relaxed via the Gumbel-softmax trick.

    Parameters ordered (beta0, beta1); context needs a predictor vector X and
    total_count, optionally a softmax temperature.
    """
    x = np.asarray(context["X"], dtype=np.float64)
    total_count = int(context["total_count"])
    temp = float(context.get("temp", dists.DEFAULT_GUMBEL_TEMPERATURE))
    beta0 = prior_samples[:, :, 0:1]
    beta1 = prior_samples[:, :, 1:2]
    mu = beta0 + beta1 * constant(x)
    p = tape.sigmoid(mu)
    log_pmf = dists.binomial_log_pmf(total_count, p, support=total_count)
    y = dists.gumbel_softmax_trick(log_pmf, temp=temp, rng=rng)
    return {"y": y, "mu": mu}


register_model(
    "normal_regression_categorical",
    _normal_regression_categorical,
    param_names=("beta0", "beta1", "beta2", "sigma"),
    output_names=("y_gr0", "y_gr1", "y_gr2", "mu", "y"),
)

register_model(
    "binomial_regression",
    _binomial_regression,
    param_names=("beta0", "beta1"),
    output_names=("y", "mu"),
)
