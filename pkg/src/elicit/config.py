"""Run-configuration files: JSON in, validated Bundle out, and back again.

The document mirrors the library sections: model, parameters, targets,
expert, optimizer, trainer, initializer, networks. Defaults are applied here
(batch size 128, 200 prior samples, weight 1.0, Adam defaults); unknown keys
are rejected with the offending path so typos surface immediately.
"""

from __future__ import annotations

import json
import math
import os

import numpy as np

from .engine import Bundle, HyperSpec, ParameterSpec, TrainerConfig
from .errors import ConfigError
from .flows import FlowConfig
from .initializers import InitializerConfig
from .losses import LossSpec
from .models import GenerativeModelSpec
from .optim import OptimizerConfig, Schedule
from .queries import QuerySpec, TargetSpec


def _check_keys(doc: dict, allowed, path: str) -> None:
    unknown = sorted(set(doc) - set(allowed))
    if unknown:
        raise ConfigError(f"{path}: unknown keys {unknown}; allowed: {sorted(allowed)}")


def _require(doc: dict, key: str, path: str):
    if key not in doc:
        raise ConfigError(f"{path}: missing required key {key!r}")
    return doc[key]


def _number(value, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{path}: expected a number, got {value!r}")
    return float(value)


def _integer(value, path: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{path}: expected an integer, got {value!r}")
    return value


def _parse_hyper(doc: dict, path: str) -> HyperSpec:
    _check_keys(doc, ("name", "lower", "upper", "shared"), path)
    try:
        return HyperSpec(
            name=str(_require(doc, "name", path)),
            lower=_number(doc.get("lower", -math.inf), f"{path}.lower"),
            upper=_number(doc.get("upper", math.inf), f"{path}.upper"),
            shared=bool(doc.get("shared", False)),
        )
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}")


def _parse_parameter(doc: dict, path: str) -> ParameterSpec:
    _check_keys(doc, ("name", "family", "hyperparams", "lower", "upper"), path)
    name = str(_require(doc, "name", path))
    family = doc.get("family")
    hyperparams = {}
    for role, hdoc in doc.get("hyperparams", {}).items():
        if not isinstance(hdoc, dict):
            raise ConfigError(f"{path}.hyperparams.{role}: expected an object")
        hyperparams[role] = _parse_hyper(hdoc, f"{path}.hyperparams.{role}")
    return ParameterSpec(
        name=name,
        family=str(family) if family is not None else None,
        hyperparams=hyperparams,
        lower=_number(doc.get("lower", -math.inf), f"{path}.lower"),
        upper=_number(doc.get("upper", math.inf), f"{path}.upper"),
    )


def _parse_query(doc: dict, path: str) -> QuerySpec:
    _check_keys(doc, ("kind", "probs", "name"), path)
    kind = str(_require(doc, "kind", path))
    probs = tuple(doc.get("probs", ()))
    if kind == "quantiles" and not probs:
        raise ConfigError(f"{path}: quantiles query requires probs")
    return QuerySpec(kind=kind, probs=probs, custom_name=str(doc.get("name", "")))


def _parse_loss(doc: dict, path: str) -> LossSpec:
    _check_keys(doc, ("kind", "kernel", "sigma"), path)
    sigma = doc.get("sigma")
    return LossSpec(
        kind=str(_require(doc, "kind", path)),
        kernel=str(doc.get("kernel", "energy")),
        sigma=_number(sigma, f"{path}.sigma") if sigma is not None else None,
    )


def _parse_target(doc: dict, path: str) -> TargetSpec:
    _check_keys(doc, ("name", "query", "loss", "weight", "target_method"), path)
    return TargetSpec(
        name=str(_require(doc, "name", path)),
        query=_parse_query(_require(doc, "query", path), f"{path}.query"),
        loss=_parse_loss(_require(doc, "loss", path), f"{path}.loss"),
        weight=_number(doc.get("weight", 1.0), f"{path}.weight"),
        target_method=doc.get("target_method"),
    )


def _parse_expert(doc: dict, base_dir: str) -> dict:
    _check_keys(doc, ("data", "path"), "expert")
    has_data = "data" in doc
    has_path = "path" in doc
    if has_data and has_path:
        raise ConfigError("expert: give either inline data or a path, not both")
    if has_path:
        path = os.path.join(base_dir, doc["path"])
        if not os.path.exists(path):
            raise ConfigError(f"expert.path: file not found: {path}")
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    elif has_data:
        data = doc["data"]
    else:
        raise ConfigError("expert: needs inline data or a path")
    if not isinstance(data, dict):
        raise ConfigError("expert: data must map statistic keys to numeric vectors")
    return {str(k): np.asarray(v, dtype=np.float64).reshape(-1) for k, v in data.items()}


def _parse_optimizer(doc: dict) -> OptimizerConfig:
    _check_keys(
        doc,
        ("algorithm", "learning_rate", "schedule", "clipnorm", "beta1", "beta2", "eps"),
        "optimizer",
    )
    if "schedule" in doc and "learning_rate" in doc:
        raise ConfigError("optimizer: give learning_rate or schedule, not both")
    if "schedule" in doc:
        sdoc = doc["schedule"]
        _check_keys(
            sdoc, ("kind", "initial_learning_rate", "decay_steps"), "optimizer.schedule"
        )
        schedule = Schedule(
            kind=str(_require(sdoc, "kind", "optimizer.schedule")),
            learning_rate=_number(
                _require(sdoc, "initial_learning_rate", "optimizer.schedule"),
                "optimizer.schedule.initial_learning_rate",
            ),
            decay_steps=_integer(sdoc.get("decay_steps", 0), "optimizer.schedule.decay_steps"),
        )
    else:
        schedule = Schedule(
            kind="constant",
            learning_rate=_number(
                _require(doc, "learning_rate", "optimizer"), "optimizer.learning_rate"
            ),
        )
    clipnorm = doc.get("clipnorm")
    try:
        return OptimizerConfig(
            algorithm=str(doc.get("algorithm", "adam")),
            schedule=schedule,
            clipnorm=_number(clipnorm, "optimizer.clipnorm") if clipnorm is not None else None,
            beta1=_number(doc.get("beta1", 0.9), "optimizer.beta1"),
            beta2=_number(doc.get("beta2", 0.999), "optimizer.beta2"),
            eps=_number(doc.get("eps", 1e-7), "optimizer.eps"),
        )
    except ValueError as exc:
        raise ConfigError(f"optimizer: {exc}")


def _parse_trainer(doc: dict) -> TrainerConfig:
    _check_keys(doc, ("method", "seed", "epochs", "B", "num_samples", "progress"), "trainer")
    return TrainerConfig(
        method=str(_require(doc, "method", "trainer")),
        seed=_integer(_require(doc, "seed", "trainer"), "trainer.seed"),
        epochs=_integer(_require(doc, "epochs", "trainer"), "trainer.epochs"),
        batch_size=_integer(doc.get("B", 128), "trainer.B"),
        num_samples=_integer(doc.get("num_samples", 200), "trainer.num_samples"),
        progress=_integer(doc.get("progress", 1), "trainer.progress"),
    )


def _parse_initializer(doc: dict) -> InitializerConfig:
    _check_keys(doc, ("method", "iterations", "distribution", "values"), "initializer")
    dist = doc.get("distribution", {})
    _check_keys(dist, ("mean", "radius"), "initializer.distribution")
    return InitializerConfig(
        method=str(doc.get("method", "sobol")),
        iterations=_integer(doc.get("iterations", 32), "initializer.iterations"),
        mean=_number(dist.get("mean", 0.0), "initializer.distribution.mean"),
        radius=_number(dist.get("radius", 2.0), "initializer.distribution.radius"),
        values=doc.get("values"),
    )


def _parse_networks(doc: dict) -> FlowConfig:
    _check_keys(
        doc,
        ("num_params", "num_coupling_layers", "num_dense", "units", "activation"),
        "networks",
    )
    try:
        return FlowConfig(
            num_params=_integer(_require(doc, "num_params", "networks"), "networks.num_params"),
            num_coupling_layers=_integer(
                doc.get("num_coupling_layers", 3), "networks.num_coupling_layers"
            ),
            num_dense=_integer(doc.get("num_dense", 2), "networks.num_dense"),
            units=_integer(doc.get("units", 128), "networks.units"),
            activation=str(doc.get("activation", "relu")),
        )
    except ValueError as exc:
        raise ConfigError(f"networks: {exc}")


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


def parse_config_dict(doc: dict, base_dir: str = ".") -> Bundle:
    """Validated Bundle from a configuration document."""
    if not isinstance(doc, dict):
        raise ConfigError("configuration root must be an object")
    _check_keys(doc, _SECTIONS, "config")
    mdoc = _require(doc, "model", "config")
    _check_keys(mdoc, ("name", "context"), "model")
    model = GenerativeModelSpec(
        name=str(_require(mdoc, "name", "model")), context=dict(mdoc.get("context", {}))
    )
    pdocs = _require(doc, "parameters", "config")
    if not isinstance(pdocs, list) or not pdocs:
        raise ConfigError("parameters: expected a non-empty list")
    parameters = [
        _parse_parameter(p, f"parameters[{i}]") for i, p in enumerate(pdocs)
    ]
    tdocs = _require(doc, "targets", "config")
    if not isinstance(tdocs, list) or not tdocs:
        raise ConfigError("targets: expected a non-empty list")
    targets = [_parse_target(t, f"targets[{i}]") for i, t in enumerate(tdocs)]
    expert = _parse_expert(doc["expert"], base_dir) if "expert" in doc else {}
    optimizer = _parse_optimizer(_require(doc, "optimizer", "config"))
    trainer = _parse_trainer(_require(doc, "trainer", "config"))
    initializer = _parse_initializer(doc["initializer"]) if "initializer" in doc else None
    networks = _parse_networks(doc["networks"]) if "networks" in doc else None
    return Bundle(
        model=model,
        parameters=parameters,
        targets=targets,
        expert=expert,
        optimizer=optimizer,
        trainer=trainer,
        initializer=initializer,
        networks=networks,
    )


def parse_config(path: str) -> Bundle:
    if not os.path.exists(path):
        raise ConfigError(f"configuration file not found: {path}")
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON: {exc}")
    return parse_config_dict(doc, base_dir=os.path.dirname(os.path.abspath(path)))


def _bound_dict(lower: float, upper: float) -> dict:
    out = {}
    if math.isfinite(lower):
        out["lower"] = lower
    if math.isfinite(upper):
        out["upper"] = upper
    return out


def bundle_to_dict(bundle: Bundle) -> dict:
    """Canonical configuration document (expert data inlined)."""
    doc: dict = {
        "model": {"name": bundle.model.name, "context": dict(bundle.model.context)},
        "parameters": [],
        "targets": [],
        "expert": {
            "data": {k: np.asarray(v).tolist() for k, v in bundle.expert.items()}
        },
    }
    for pspec in bundle.parameters:
        pdoc: dict = {"name": pspec.name}
        if pspec.family is not None:
            pdoc["family"] = pspec.family
            pdoc["hyperparams"] = {
                role: {"name": hs.name, "shared": hs.shared, **_bound_dict(hs.lower, hs.upper)}
                for role, hs in pspec.hyperparams.items()
            }
        pdoc.update(_bound_dict(pspec.lower, pspec.upper))
        doc["parameters"].append(pdoc)
    for t in bundle.targets:
        tdoc: dict = {
            "name": t.name,
            "query": {"kind": t.query.kind},
            "loss": {"kind": t.loss.kind},
            "weight": t.weight,
        }
        if t.query.kind == "quantiles":
            tdoc["query"]["probs"] = list(t.query.probs)
        if t.query.kind == "custom":
            tdoc["query"]["name"] = t.query.custom_name
        if t.loss.kind == "mmd2":
            tdoc["loss"]["kernel"] = t.loss.kernel
            if t.loss.sigma is not None:
                tdoc["loss"]["sigma"] = t.loss.sigma
        if t.target_method is not None:
            tdoc["target_method"] = t.target_method
        doc["targets"].append(tdoc)
    opt = bundle.optimizer
    odoc: dict = {
        "algorithm": opt.algorithm,
        "beta1": opt.beta1,
        "beta2": opt.beta2,
        "eps": opt.eps,
    }
    if opt.schedule.kind == "constant":
        odoc["learning_rate"] = opt.schedule.learning_rate
    else:
        odoc["schedule"] = {
            "kind": opt.schedule.kind,
            "initial_learning_rate": opt.schedule.learning_rate,
            "decay_steps": opt.schedule.decay_steps,
        }
    if opt.clipnorm is not None:
        odoc["clipnorm"] = opt.clipnorm
    doc["optimizer"] = odoc
    tr = bundle.trainer
    doc["trainer"] = {
        "method": tr.method,
        "seed": tr.seed,
        "epochs": tr.epochs,
        "B": tr.batch_size,
        "num_samples": tr.num_samples,
        "progress": tr.progress,
    }
    if bundle.initializer is not None:
        init = bundle.initializer
        idoc: dict = {"method": init.method}
        if init.method == "sobol":
            idoc["iterations"] = init.iterations
            idoc["distribution"] = {"mean": init.mean, "radius": init.radius}
        else:
            idoc["values"] = dict(init.values)
        doc["initializer"] = idoc
    if bundle.networks is not None:
        nf = bundle.networks
        doc["networks"] = {
            "num_params": nf.num_params,
            "num_coupling_layers": nf.num_coupling_layers,
            "num_dense": nf.num_dense,
            "units": nf.units,
            "activation": nf.activation,
        }
    return doc
