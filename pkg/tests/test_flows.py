"""Normalizing-flow tests: initialization, invertibility, constraints, gradients."""

import math

import numpy as np
import pytest

from elicit import flows, tape
from elicit.dists import Constraint
from elicit.flows import FlowConfig, flow_forward, flow_inverse, init_weights, sample_deep_prior
from elicit.rng import SeededRng
from tests.test_tape import central_difference

CFG = FlowConfig(num_params=4, num_coupling_layers=3, num_dense=2, units=16)


def _rng(seed=0):
    return np.random.default_rng(seed)


def _random_weights(cfg, seed=1, scale=0.4):
    rng = _rng(seed)
    return {
        k: rng.normal(scale=scale, size=v.shape)
        for k, v in init_weights(cfg, _rng(0)).items()
    }


def _as_nodes(weights):
    return {k: tape.leaf(v, name=k) for k, v in weights.items()}


class TestInitialization:
    def test_biases_exactly_zero(self):
        w = init_weights(CFG, _rng())
        for name, value in w.items():
            if name.endswith("_b"):
                assert np.all(value == 0.0), name

    def test_trunk_weights_within_glorot_bound(self):
        w = init_weights(CFG, _rng())
        keep = (CFG.num_params + 1) // 2
        fans = {0: (keep, CFG.units), 1: (CFG.units, CFG.units)}
        for k in range(CFG.num_coupling_layers):
            for i in range(CFG.num_dense):
                fan_in, fan_out = fans[i]
                bound = math.sqrt(6.0 / (fan_in + fan_out))
                value = w[f"block{k}_dense{i}_w"]
                assert np.all(np.abs(value) <= bound)
                assert value.std() > 0  # actually random, not zeros

    def test_heads_start_at_zero(self):
        w = init_weights(CFG, _rng())
        for k in range(CFG.num_coupling_layers):
            assert np.all(w[f"block{k}_scale_w"] == 0.0)
            assert np.all(w[f"block{k}_shift_w"] == 0.0)

    def test_fresh_flow_is_identity(self):
        w = _as_nodes(init_weights(CFG, _rng(3)))
        z = _rng(4).normal(size=(50, 4))
        out = flow_forward(w, tape.constant(z), CFG)
        assert np.max(np.abs(out.value - z)) < 1e-12


class TestInvertibility:
    @pytest.mark.parametrize("p", [2, 3, 4, 5])
    def test_forward_inverse_round_trip(self, p):
        cfg = FlowConfig(num_params=p, num_coupling_layers=3, num_dense=2, units=8)
        weights = _random_weights(cfg, seed=p)
        z = _rng(10 + p).normal(size=(200, p))
        fwd = flow_forward(_as_nodes(weights), tape.constant(z), cfg)
        back = flow_inverse(weights, fwd.value, cfg)
        assert np.max(np.abs(back - z)) < 1e-5

    def test_round_trip_with_batched_input(self):
        weights = _random_weights(CFG, seed=42)
        z = _rng(11).normal(size=(3, 7, 4))
        fwd = flow_forward(_as_nodes(weights), tape.constant(z), CFG)
        assert fwd.shape == (3, 7, 4)
        back = flow_inverse(weights, fwd.value, CFG)
        assert np.max(np.abs(back - z)) < 1e-5

    def test_log_scale_respects_soft_clamp(self):
        # even huge weights cannot push the log-scale beyond the clamp,
        # so the forward map stays finite
        weights = _random_weights(CFG, seed=5, scale=50.0)
        z = _rng(12).normal(size=(100, 4))
        fwd = flow_forward(_as_nodes(weights), tape.constant(z), CFG)
        assert np.all(np.isfinite(fwd.value))
        passed = tape.constant(z[:, : CFG.split[0]])
        log_scale, _ = flows._heads(_as_nodes(weights), CFG, 0, passed)
        assert np.max(np.abs(log_scale.value)) <= flows.SOFT_CLAMP + 1e-12

    def test_round_trip_at_moderate_weight_scale(self):
        weights = _random_weights(CFG, seed=5, scale=2.0)
        z = _rng(12).normal(size=(100, 4))
        fwd = flow_forward(_as_nodes(weights), tape.constant(z), CFG)
        back = flow_inverse(weights, fwd.value, CFG)
        assert np.max(np.abs(back - z)) < 1e-5


class TestGradients:
    def test_weight_gradients_match_finite_differences(self):
        cfg = FlowConfig(num_params=3, num_coupling_layers=2, num_dense=1, units=4)
        weights = _random_weights(cfg, seed=6, scale=0.5)
        z = _rng(13).normal(size=(5, 3))
        probe = _rng(14).normal(size=(5, 3))

        def loss_for(w_arrays):
            nodes = {k: tape.leaf(v) for k, v in w_arrays.items()}
            out = flow_forward(nodes, tape.constant(z), cfg)
            return tape.sum_(out * tape.constant(probe)), nodes

        loss, nodes = loss_for(weights)
        grads = tape.backward(loss, nodes.values())
        for name in weights:
            def f(v, name=name):
                trial = dict(weights)
                trial[name] = v
                return float(loss_for(trial)[0].value)

            fd = central_difference(f, weights[name])
            np.testing.assert_allclose(
                grads[nodes[name]], fd, rtol=1e-3, atol=1e-8, err_msg=name
            )


class TestDeepPriorSampling:
    def test_identity_flow_matches_standard_normal(self):
        cfg = FlowConfig(num_params=3, units=8)
        w = _as_nodes(init_weights(cfg, _rng(7)))
        rng = SeededRng(123).stream("prior")
        out = sample_deep_prior(w, [Constraint()] * 3, 10, 1000, cfg, rng)
        flat = out.value.reshape(-1, 3)
        assert np.max(np.abs(flat.mean(axis=0))) < 0.05
        assert np.max(np.abs(flat.std(axis=0) - 1.0)) < 0.05

    def test_constrained_coordinate_is_positive(self):
        w = _as_nodes(_random_weights(CFG, seed=8))
        rng = SeededRng(5).stream("prior")
        constraints = [Constraint(), Constraint(), Constraint(), Constraint(lower=0.0)]
        out = sample_deep_prior(w, constraints, 8, 500, CFG, rng)
        assert np.all(out.value[:, :, 3] > 0.0)
        assert out.shape == (8, 500, 4)

    def test_deterministic_given_seed_and_weights(self):
        w = _random_weights(CFG, seed=9)
        a = sample_deep_prior(_as_nodes(w), [Constraint()] * 4, 2, 50, CFG,
                              SeededRng(1).stream("prior"))
        b = sample_deep_prior(_as_nodes(w), [Constraint()] * 4, 2, 50, CFG,
                              SeededRng(1).stream("prior"))
        assert np.array_equal(a.value, b.value)

    def test_constraint_count_checked(self):
        w = _as_nodes(init_weights(CFG, _rng(10)))
        with pytest.raises(ValueError, match="constraint"):
            sample_deep_prior(w, [Constraint()] * 3, 2, 10, CFG, SeededRng(1).stream("x"))


class TestConfigValidation:
    def test_minimum_parameters(self):
        with pytest.raises(ValueError):
            FlowConfig(num_params=1)

    def test_activation_names(self):
        with pytest.raises(ValueError):
            FlowConfig(num_params=4, activation="gelu")

    def test_odd_split_favors_pass_through(self):
        assert FlowConfig(num_params=5).split == (3, 2)
        assert FlowConfig(num_params=4).split == (2, 2)
