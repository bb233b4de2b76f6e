"""Optimizer and schedule tests."""

import numpy as np
import pytest

from elicit.optim import Optimizer, OptimizerConfig, Schedule, lr_at


class TestSchedules:
    def test_constant(self):
        s = Schedule("constant", 0.05)
        assert lr_at(s, 0) == 0.05
        assert lr_at(s, 10_000) == 0.05

    def test_cosine_endpoints_and_midpoint(self):
        s = Schedule("cosine_decay", 0.1, decay_steps=600)
        assert lr_at(s, 0) == pytest.approx(0.1)
        assert lr_at(s, 600) == pytest.approx(0.0, abs=1e-17)
        assert lr_at(s, 300) == pytest.approx(0.05)

    def test_cosine_floors_at_zero_after_decay(self):
        s = Schedule("cosine_decay", 0.1, decay_steps=100)
        assert lr_at(s, 5000) == pytest.approx(0.0, abs=1e-17)

    def test_validation(self):
        with pytest.raises(ValueError):
            Schedule("constant", -0.1)
        with pytest.raises(ValueError):
            Schedule("cosine_decay", 0.1, decay_steps=0)


class TestSgd:
    def test_update_is_minus_lr_grad(self):
        opt = Optimizer(OptimizerConfig(algorithm="sgd", schedule=Schedule("constant", 0.05)))
        new = opt.step({"w": np.array([0.0, 0.0])}, {"w": np.array([1.0, -2.0])})
        np.testing.assert_allclose(new["w"], [-0.05, 0.10])


class TestAdam:
    def _cfg(self, **kw):
        return OptimizerConfig(algorithm="adam", schedule=Schedule("constant", kw.pop("lr", 0.1)), **kw)

    def test_first_step_magnitude(self):
        # bias correction makes the first step ~ -lr * sign(g)
        opt = Optimizer(self._cfg())
        new = opt.step({"w": np.array(0.0)}, {"w": np.array(2.0)})
        assert float(new["w"]) == pytest.approx(-0.1 * 2.0 / (2.0 + 1e-7), rel=1e-12)
        assert abs(float(new["w"])) <= 0.1 * (1 + 1e-6)

    def test_first_step_bounded_per_coordinate(self):
        rng = np.random.default_rng(0)
        opt = Optimizer(self._cfg())
        g = rng.normal(size=16) * 100
        new = opt.step({"w": np.zeros(16)}, {"w": g})
        assert np.all(np.abs(new["w"]) <= 0.1 * (1 + 1e-6))

    def test_zero_gradients_leave_variables_unchanged(self):
        opt = Optimizer(self._cfg())
        w0 = np.array([1.0, -2.0])
        new = opt.step({"w": w0.copy()}, {"w": np.zeros(2)})
        np.testing.assert_array_equal(new["w"], w0)

    def test_accumulators_decay_toward_zero(self):
        opt = Optimizer(self._cfg())
        opt.step({"w": np.array(0.0)}, {"w": np.array(1.0)})
        m1 = abs(float(opt._m["w"]))
        for _ in range(50):
            opt.step({"w": np.array(0.0)}, {"w": np.array(0.0)})
        assert abs(float(opt._m["w"])) < m1 * 1e-2

    def test_deterministic(self):
        def run():
            opt = Optimizer(self._cfg())
            w = {"w": np.zeros(3)}
            rng = np.random.default_rng(1)
            for _ in range(10):
                w = opt.step(w, {"w": rng.normal(size=3)})
            return w["w"]

        assert np.array_equal(run(), run())


class TestClipping:
    def test_per_variable_norm_scaling(self):
        cfg = OptimizerConfig(algorithm="sgd", schedule=Schedule("constant", 1.0), clipnorm=1.0)
        opt = Optimizer(cfg)
        g = np.array([0.0, 4.0])  # norm 4 -> scaled by 0.25
        new = opt.step({"w": np.zeros(2)}, {"w": g})
        np.testing.assert_allclose(new["w"], [0.0, -1.0])

    def test_no_scaling_below_threshold(self):
        cfg = OptimizerConfig(algorithm="sgd", schedule=Schedule("constant", 1.0), clipnorm=10.0)
        opt = Optimizer(cfg)
        new = opt.step({"w": np.zeros(2)}, {"w": np.array([3.0, 4.0])})
        np.testing.assert_allclose(new["w"], [-3.0, -4.0])

    def test_each_variable_clipped_independently(self):
        cfg = OptimizerConfig(algorithm="sgd", schedule=Schedule("constant", 1.0), clipnorm=1.0)
        opt = Optimizer(cfg)
        new = opt.step(
            {"a": np.zeros(1), "b": np.zeros(1)},
            {"a": np.array([2.0]), "b": np.array([0.5])},
        )
        np.testing.assert_allclose(new["a"], [-1.0])
        np.testing.assert_allclose(new["b"], [-0.5])


class TestConfigValidation:
    def test_bad_betas(self):
        with pytest.raises(ValueError):
            OptimizerConfig(beta1=1.0)

    def test_bad_clipnorm(self):
        with pytest.raises(ValueError):
            OptimizerConfig(clipnorm=0.0)

    def test_unknown_algorithm(self):
        with pytest.raises(ValueError):
            OptimizerConfig(algorithm="lbfgs")
