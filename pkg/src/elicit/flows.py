"""Joint non-parametric prior via an affine-coupling normalizing flow.

A standard-normal base sample is pushed through a stack of coupling blocks;
each block computes scale and shift for one half of the coordinates from the
other half with a small dense network, and a fixed coordinate reversal is
applied between blocks. The dense-layer weights are the trainable
hyperparameters of the deep mode.

The scale/shift output heads start at zero, so a freshly initialized flow is
the identity map; the log-scale is soft-clamped to keep exp() tame.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from . import dists, tape
from .tape import Node, constant

SOFT_CLAMP = 1.9

ACTIVATIONS = ("relu", "tanh")


@dataclass(frozen=True)
class FlowConfig:
    num_params: int
    num_coupling_layers: int = 3
    num_dense: int = 2
    units: int = 128
    activation: str = "relu"

    def __post_init__(self):
        if self.num_params < 2:
            raise ValueError("flow prior needs at least 2 parameters")
        if self.num_coupling_layers < 1 or self.num_dense < 1 or self.units < 1:
            raise ValueError("flow layer counts and width must be >= 1")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")

    @property
    def split(self) -> tuple:
        """(pass-through, transformed) sizes; odd extra goes to pass-through."""
        keep = (self.num_params + 1) // 2
        return keep, self.num_params - keep


def _glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    a = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-a, a, size=(fan_in, fan_out))


def init_weights(config: FlowConfig, rng: np.random.Generator) -> dict:
    """Glorot-uniform trunk weights, zero biases, zero scale/shift heads."""
    keep, moved = config.split
    weights = {}
    for k in range(config.num_coupling_layers):
        fan_in = keep
        for i in range(config.num_dense):
            weights[f"block{k}_dense{i}_w"] = _glorot(rng, fan_in, config.units)
            weights[f"block{k}_dense{i}_b"] = np.zeros(config.units)
            fan_in = config.units
        for head in ("scale", "shift"):
            weights[f"block{k}_{head}_w"] = np.zeros((config.units, moved))
            weights[f"block{k}_{head}_b"] = np.zeros(moved)
    return weights


def _act(node: Node, name: str) -> Node:
    return tape.relu(node) if name == "relu" else tape.tanh(node)


def _heads(weights: Mapping, config: FlowConfig, block: int, passed: Node) -> tuple:
    t = passed
    for i in range(config.num_dense):
        t = _act(t @ weights[f"block{block}_dense{i}_w"] + weights[f"block{block}_dense{i}_b"], config.activation)
    s_raw = t @ weights[f"block{block}_scale_w"] + weights[f"block{block}_scale_b"]
    shift = t @ weights[f"block{block}_shift_w"] + weights[f"block{block}_shift_b"]
    log_scale = SOFT_CLAMP * tape.tanh(s_raw / SOFT_CLAMP)
    return log_scale, shift


def flow_forward(weights: Mapping, z: Node, config: FlowConfig) -> Node:
    """Push base samples through the coupling stack; [.., P] -> [.., P]."""
    keep, _ = config.split
    shape = z.shape
    x = tape.reshape(z, (-1, config.num_params))
    for k in range(config.num_coupling_layers):
        passed = x[:, :keep]
        moved = x[:, keep:]
        log_scale, shift = _heads(weights, config, k, passed)
        moved = moved * tape.exp(log_scale) + shift
        x = tape.concatenate([passed, moved], axis=1)
        if k < config.num_coupling_layers - 1:
            x = x[:, ::-1]
    return tape.reshape(x, shape)


def _heads_np(weights: Mapping, config: FlowConfig, block: int, passed: np.ndarray) -> tuple:
    t = passed
    for i in range(config.num_dense):
        t = t @ weights[f"block{block}_dense{i}_w"] + weights[f"block{block}_dense{i}_b"]
        t = np.maximum(t, 0.0) if config.activation == "relu" else np.tanh(t)
    s_raw = t @ weights[f"block{block}_scale_w"] + weights[f"block{block}_scale_b"]
    shift = t @ weights[f"block{block}_shift_w"] + weights[f"block{block}_shift_b"]
    return SOFT_CLAMP * np.tanh(s_raw / SOFT_CLAMP), shift


def flow_inverse(weights: Mapping, x: np.ndarray, config: FlowConfig) -> np.ndarray:
    """Analytic inverse of :func:`flow_forward` on plain arrays."""
    keep, _ = config.split
    shape = x.shape
    out = np.asarray(x, dtype=np.float64).reshape(-1, config.num_params)
    for k in reversed(range(config.num_coupling_layers)):
        if k < config.num_coupling_layers - 1:
            out = out[:, ::-1]
        passed = out[:, :keep]
        moved = out[:, keep:]
        log_scale, shift = _heads_np(weights, config, k, passed)
        moved = (moved - shift) * np.exp(-log_scale)
        out = np.concatenate([passed, moved], axis=1)
    return out.reshape(shape)


def sample_deep_prior(
    weights: Mapping,
    constraints,
    batch: int,
    num_samples: int,
    config: FlowConfig,
    rng: np.random.Generator,
) -> Node:
    """Draw [B, S, P] prior samples: base normal -> flow -> per-coordinate constrain."""
    if len(constraints) != config.num_params:
        raise ValueError(
            f"need one constraint per parameter ({config.num_params}), got {len(constraints)}"
        )
    z = constant(rng.standard_normal((batch, num_samples, config.num_params)))
    out = flow_forward(weights, z, config)
    if all(c.is_free for c in constraints):
        return out
    cols = []
    for j, c in enumerate(constraints):
        col = out[:, :, j : j + 1]
        cols.append(col if c.is_free else dists.constrain(col, c))
    return tape.concatenate(cols, axis=-1)
