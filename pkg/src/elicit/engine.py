"""Training orchestration: sample, simulate, query, score, backpropagate, update.

One gradient step per epoch over the full [B, S] simulation. Each epoch
builds a fresh graph from the current hyperparameter values, so stochastic
graphs stay correct. Histories record the values that produced each epoch's
loss; results hold a final no-gradient evaluation under the post-training
hyperparameters (a zero-epoch run therefore reports initial-state samples).

Replications run with derived seeds (base + run index) and are independent:
each owns its tape, generator streams, and optimizer state.
"""

from __future__ import annotations

import copy
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Mapping

import numpy as np

from . import dists, flows, losses, models, queries, tape
from .dists import Constraint, DistributionSpec
from .errors import ConfigError, NonFiniteError
from .flows import FlowConfig
from .initializers import InitializerConfig, sobol_candidates, screen_and_select
from .models import GenerativeModelSpec
from .optim import Optimizer, OptimizerConfig
from .rng import SeededRng

METHODS = ("parametric_prior", "deep_prior")

FAMILY_ROLES = {
    "normal": ("loc", "scale"),
    "halfnormal": ("scale",),
    "uniform": ("low", "high"),
}


@dataclass(frozen=True)
class HyperSpec:
    """One scalar trainable hyperparameter of a parametric prior family."""

    name: str
    lower: float = -math.inf
    upper: float = math.inf
    shared: bool = False

    @property
    def constraint(self) -> Constraint:
        return Constraint(self.lower, self.upper)


@dataclass(frozen=True)
class ParameterSpec:
    """Prior assumption for one model parameter.

    Parametric mode: family plus hyperparameter specs per family role.
    Deep mode: family is None; lower/upper constrain the parameter's domain.
    """

    name: str
    family: str | None = None
    hyperparams: Mapping = field(default_factory=dict)
    lower: float = -math.inf
    upper: float = math.inf

    @property
    def constraint(self) -> Constraint:
        return Constraint(self.lower, self.upper)


@dataclass(frozen=True)
class TrainerConfig:
    method: str
    seed: int
    epochs: int
    batch_size: int = 128
    num_samples: int = 200
    progress: int = 1

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigError(f"trainer.method must be one of {METHODS}, got {self.method!r}")
        if self.epochs < 0:
            raise ConfigError(f"trainer.epochs must be >= 0, got {self.epochs}")
        if self.batch_size < 1 or self.num_samples < 1:
            raise ConfigError("trainer.B and trainer.num_samples must be >= 1")


@dataclass
class Bundle:
    """Everything a fit needs; the sections mirror the run-configuration file."""

    model: GenerativeModelSpec
    parameters: list
    targets: list
    expert: dict
    optimizer: OptimizerConfig
    trainer: TrainerConfig
    initializer: InitializerConfig | None = None
    networks: FlowConfig | None = None


@dataclass
class FitRecord:
    """Per-run history and final results; error is set when the run aborted."""

    seed: int
    history: dict = field(default_factory=dict)
    results: dict = field(default_factory=dict)
    error: str | None = None


# ---------------------------------------------------------------------------
# validation
# ---------------------------------------------------------------------------


def hyper_order(parameters) -> list:
    """Unique hyperparameter specs in declaration order (shared ones once)."""
    seen: dict = {}
    for pspec in parameters:
        roles = FAMILY_ROLES.get(pspec.family, ())
        for role in roles:
            if role not in pspec.hyperparams:
                raise ConfigError(
                    f"parameter {pspec.name!r}: family {pspec.family!r} needs a "
                    f"{role!r} hyperparameter"
                )
            hs = pspec.hyperparams[role]
            if hs.name in seen:
                prev = seen[hs.name]
                if not prev.shared or not hs.shared:
                    raise ConfigError(
                        f"hyperparameter {hs.name!r} appears more than once but is "
                        f"not marked shared"
                    )
                if (prev.lower, prev.upper) != (hs.lower, hs.upper):
                    raise ConfigError(
                        f"shared hyperparameter {hs.name!r} has conflicting constraints"
                    )
            else:
                seen[hs.name] = hs
    return list(seen.values())


def validate_bundle(bundle: Bundle) -> None:
    """Pre-flight checks: mode completeness and expert-data key agreement."""
    trainer = bundle.trainer
    mdef = models.model_def(bundle.model.name)
    if len(bundle.parameters) != len(mdef.param_names):
        raise ConfigError(
            f"model {bundle.model.name!r} expects {len(mdef.param_names)} parameters "
            f"ordered {mdef.param_names}, configuration declares {len(bundle.parameters)}"
        )
    if not bundle.targets:
        raise ConfigError("targets: at least one target is required")
    if trainer.method == "parametric_prior":
        if bundle.initializer is None:
            raise ConfigError("parametric_prior requires an initializer section")
        if bundle.networks is not None:
            raise ConfigError("parametric_prior must not define a networks section")
        for pspec in bundle.parameters:
            if pspec.family is None:
                raise ConfigError(
                    f"parameter {pspec.name!r}: parametric_prior requires a family"
                )
            if pspec.family not in FAMILY_ROLES:
                raise ConfigError(
                    f"parameter {pspec.name!r}: unknown family {pspec.family!r}; "
                    f"supported: {sorted(FAMILY_ROLES)}"
                )
        hyper_order(bundle.parameters)
    else:
        if bundle.networks is None:
            raise ConfigError("deep_prior requires a networks section")
        if bundle.initializer is not None:
            raise ConfigError("deep_prior must not define an initializer section")
        if bundle.networks.num_params != len(bundle.parameters):
            raise ConfigError(
                f"networks.num_params={bundle.networks.num_params} but "
                f"{len(bundle.parameters)} parameters are declared"
            )
    template = queries.get_expert_data_format(bundle.targets, len(bundle.parameters))
    missing = sorted(set(template) - set(bundle.expert))
    extra = sorted(set(bundle.expert) - set(template))
    if missing or extra:
        raise ConfigError(
            f"expert data keys do not match the target specification; "
            f"missing: {missing}, unexpected: {extra}; expected template: {template}"
        )
    for key, length in template.items():
        got = np.asarray(bundle.expert[key]).size
        if got < 1:
            raise ConfigError(f"expert data {key!r} is empty")
        if length is not None and got != length:
            raise ConfigError(
                f"expert data {key!r} has length {got}, template requires {length}"
            )


def get_expert_data_format(bundle_or_targets, num_params: int | None = None) -> dict:
    """Expert-data template for a bundle or a raw target list."""
    if isinstance(bundle_or_targets, Bundle):
        return queries.get_expert_data_format(
            bundle_or_targets.targets, len(bundle_or_targets.parameters)
        )
    return queries.get_expert_data_format(bundle_or_targets, num_params)


# ---------------------------------------------------------------------------
# one simulation pass (shared by screening, training, and final results)
# ---------------------------------------------------------------------------


@dataclass
class _Pass:
    leaves: dict
    prior: tape.Node
    constrained: dict
    outputs: dict
    targets: dict
    stats: dict
    breakdown: losses.LossBreakdown | None


def _sample_parametric(bundle, leaves, rng) -> tuple:
    b, s = bundle.trainer.batch_size, bundle.trainer.num_samples
    constrained: dict = {}
    cols = []
    for pspec in bundle.parameters:
        params = {}
        for role in FAMILY_ROLES[pspec.family]:
            hs = pspec.hyperparams[role]
            if hs.name not in constrained:
                constrained[hs.name] = dists.constrain(leaves[hs.name], hs.constraint)
            params[role] = constrained[hs.name]
        draw = dists.sample_reparameterized(
            DistributionSpec(pspec.family, params), (b, s), rng
        )
        cols.append(tape.reshape(draw, (b, s, 1)))
    return tape.concatenate(cols, axis=-1), constrained


def _run_pass(
    bundle: Bundle,
    values: dict,
    srng: SeededRng,
    epoch: int,
    purpose: str,
    with_loss: bool = True,
) -> _Pass:
    rng_prior = srng.stream(purpose + "/prior", epoch)
    rng_model = srng.stream(purpose + "/model", epoch)
    leaves = {name: tape.leaf(v, name=name) for name, v in values.items()}
    constrained: dict = {}
    if bundle.trainer.method == "parametric_prior":
        prior, constrained = _sample_parametric(bundle, leaves, rng_prior)
    else:
        prior = flows.sample_deep_prior(
            leaves,
            [p.constraint for p in bundle.parameters],
            bundle.trainer.batch_size,
            bundle.trainer.num_samples,
            bundle.networks,
            rng_prior,
        )
    outputs = models.forward(bundle.model, prior, rng_model)
    targets = queries.compute_targets(outputs, bundle.targets, prior)
    stats = queries.apply_queries(targets, bundle.targets, prior)
    breakdown = (
        losses.total_loss(stats, bundle.expert, bundle.targets) if with_loss else None
    )
    return _Pass(leaves, prior, constrained, outputs, targets, stats, breakdown)


def simulate_expert(
    bundle: Bundle, truth: dict, num_samples: int = 10000, seed: int | None = None
) -> dict:
    """Oracle expert data: simulate the bundle's own statistics under known
    hyperparameter values (constrained space) with a large sample count."""
    if bundle.trainer.method != "parametric_prior":
        raise ConfigError("simulate-expert requires the parametric_prior method")
    hypers = hyper_order(bundle.parameters)
    missing = sorted({hs.name for hs in hypers} - set(truth))
    if missing:
        raise ConfigError(f"truth values missing for hyperparameters {missing}")
    values = {
        hs.name: np.asarray(dists.unconstrain(float(truth[hs.name]), hs.constraint))
        for hs in hypers
    }
    sim = replace(
        bundle.trainer, batch_size=1, num_samples=int(num_samples), progress=0
    )
    sim_bundle = Bundle(
        model=bundle.model,
        parameters=bundle.parameters,
        targets=bundle.targets,
        expert={},
        optimizer=bundle.optimizer,
        trainer=sim,
        initializer=bundle.initializer,
        networks=bundle.networks,
    )
    srng = SeededRng(bundle.trainer.seed if seed is None else int(seed))
    p = _run_pass(sim_bundle, values, srng, epoch=0, purpose="expert", with_loss=False)
    return {key: np.asarray(stat.value).reshape(-1) for key, stat in p.stats.items()}


def _initial_values(bundle: Bundle, srng: SeededRng) -> tuple:
    """lambda_0 plus initializer diagnostics (parametric screening only)."""
    if bundle.trainer.method == "deep_prior":
        rng = srng.stream("init/weights", 0)
        return flows.init_weights(bundle.networks, rng), None
    hypers = hyper_order(bundle.parameters)
    init = bundle.initializer
    if init.method == "explicit":
        values = {}
        for hs in hypers:
            if hs.name not in init.values:
                raise ConfigError(f"initializer.values is missing hyperparameter {hs.name!r}")
            values[hs.name] = np.asarray(
                dists.unconstrain(float(init.values[hs.name]), hs.constraint)
            )
        return values, None
    candidates = sobol_candidates(len(hypers), init.iterations, init.mean, init.radius)

    def evaluate(vector):
        vals = {hs.name: np.asarray(v) for hs, v in zip(hypers, vector)}
        try:
            p = _run_pass(bundle, vals, srng, epoch=0, purpose="screen")
        except tape.DomainError:
            return math.nan
        return float(p.breakdown.total.value)

    chosen, diag = screen_and_select(candidates, evaluate)
    return {hs.name: np.asarray(v) for hs, v in zip(hypers, chosen)}, diag


def _marginal_summary(prior_value: np.ndarray, parameters) -> dict:
    flat = prior_value.reshape(-1, prior_value.shape[-1])
    out = {}
    for j, pspec in enumerate(parameters):
        out[f"{pspec.name}_mean"] = float(flat[:, j].mean())
        out[f"{pspec.name}_sd"] = float(flat[:, j].std())
    return out


def _snapshot(bundle: Bundle, p: _Pass) -> dict:
    if bundle.trainer.method == "parametric_prior":
        return {name: float(node.value) for name, node in p.constrained.items()}
    return _marginal_summary(p.prior.value, bundle.parameters)


def _check_finite_loss(p: _Pass, epoch: int) -> None:
    for key in sorted(p.breakdown.components):
        if not np.isfinite(float(p.breakdown.components[key].value)):
            raise NonFiniteError(
                f"loss component {key!r} is non-finite at epoch {epoch}",
                epoch=epoch,
                key=key,
            )
    if not np.isfinite(float(p.breakdown.total.value)):
        raise NonFiniteError(f"total loss is non-finite at epoch {epoch}", epoch=epoch)


def fit(bundle: Bundle, run_seed: int | None = None) -> FitRecord:
    """Run the full optimization loop; returns history plus final results."""
    validate_bundle(bundle)
    trainer = bundle.trainer
    seed = trainer.seed if run_seed is None else int(run_seed)
    srng = SeededRng(seed)

    values, init_diag = _initial_values(bundle, srng)
    optimizer = Optimizer(bundle.optimizer)
    history: dict = {
        "loss": [],
        "loss_component": [],
        "time": [],
        "hyperparameter": [],
        "hyperparameter_gradient": [],
    }

    t_start = time.monotonic()
    for epoch in range(trainer.epochs):
        t_epoch = time.monotonic()
        p = _run_pass(bundle, values, srng, epoch, "train")
        _check_finite_loss(p, epoch)
        grads = tape.backward(p.breakdown.total, p.leaves.values())
        grad_by_name = {}
        for name, lf in p.leaves.items():
            g = grads[lf]
            if not np.all(np.isfinite(g)):
                snap = _snapshot(bundle, p)
                raise NonFiniteError(
                    f"gradient for {name!r} is non-finite at epoch {epoch}; "
                    f"last finite snapshot: {snap}",
                    epoch=epoch,
                    key=name,
                )
            grad_by_name[name] = g
        values = optimizer.step(values, grad_by_name)

        history["loss"].append(float(p.breakdown.total.value))
        history["loss_component"].append(
            {k: float(v.value) for k, v in p.breakdown.components.items()}
        )
        history["hyperparameter"].append(_snapshot(bundle, p))
        history["hyperparameter_gradient"].append(
            {name: float(np.sqrt(np.sum(g * g))) for name, g in grad_by_name.items()}
        )
        history["time"].append(round(time.monotonic() - t_epoch, 3))

        if trainer.progress >= 1 and (
            epoch == trainer.epochs - 1 or epoch % max(1, trainer.epochs // 20) == 0
        ):
            rate = (epoch + 1) / max(time.monotonic() - t_start, 1e-9)
            print(
                f"epoch {epoch + 1}/{trainer.epochs} loss {history['loss'][-1]:.6g} "
                f"({rate:.1f} epochs/s)",
                file=sys.stderr,
            )

    final = _run_pass(bundle, values, srng, trainer.epochs, "results")
    results = {
        "prior_samples": np.array(final.prior.value),
        "model_samples": {
            name: np.array(node.value) for name, node in final.outputs.items()
        },
        "target_quantities": {
            name: np.array(node.value) for name, node in final.targets.items()
        },
        "elicited_statistics": {k: np.array(v.value) for k, v in final.stats.items()},
        "expert_elicited_statistics": {
            k: np.array(v, dtype=np.float64) for k, v in bundle.expert.items()
        },
        "hyperparameter": dict(values) if trainer.method == "parametric_prior" else None,
        "seed": seed,
    }
    if init_diag is not None:
        results["init_matrix"] = init_diag.matrix
        results["init_loss_list"] = init_diag.losses
        results["selected_index"] = init_diag.selected_index
    return FitRecord(seed=seed, history=history, results=results)


def _safe_fit(bundle: Bundle, run_seed: int) -> FitRecord:
    try:
        return fit(bundle, run_seed=run_seed)
    except Exception as exc:  # per-run isolation: siblings keep going
        return FitRecord(seed=run_seed, error=f"{type(exc).__name__}: {exc}")


def fit_parallel(bundle: Bundle, runs: int) -> list:
    """Independent replications with seeds base + run index, ordered by index.

    ELICIT_THREADS caps the worker count (default: one thread per run). A
    failing run records its error and does not abort the siblings.
    """
    if runs < 1:
        raise ConfigError(f"runs must be >= 1, got {runs}")
    validate_bundle(bundle)
    base = bundle.trainer.seed
    cap = os.environ.get("ELICIT_THREADS", "")
    workers = min(runs, int(cap)) if cap.strip() else runs
    workers = max(1, workers)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(_safe_fit, bundle, base + r) for r in range(runs)]
        return [f.result() for f in futures]


_SECTIONS = (
    "model",
    "parameters",
    "targets",
    "expert",
    "optimizer",
    "trainer",
    "initializer",
    "networks",
)


def update(bundle: Bundle, **overrides) -> Bundle:
    """Replace named sections and return a fresh, validated bundle."""
    unknown = sorted(set(overrides) - set(_SECTIONS))
    if unknown:
        raise ConfigError(f"unknown bundle sections {unknown}; valid: {list(_SECTIONS)}")
    new = replace(copy.deepcopy(bundle), **overrides)
    validate_bundle(new)
    return new
