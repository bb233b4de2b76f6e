"""Discrepancy tests: hand values, brute-force oracles, estimator properties."""

import numpy as np
import pytest

from elicit import losses, tape
from elicit.backend import kernels_py
from elicit.errors import ConfigError
from elicit.losses import LossSpec, l2, mmd2_biased, total_loss
from elicit.queries import QuerySpec, TargetSpec
from tests.test_tape import central_difference

try:
    from elicit.backend import _kernels

    BACKENDS = [("numpy", kernels_py), ("compiled", _kernels)]
except ImportError:
    BACKENDS = [("numpy", kernels_py)]


def brute_force_mmd2(x: np.ndarray, y: np.ndarray, kernel: str, sigma: float = 1.0) -> float:
    """Independent double-loop oracle for one sample row."""

    def k(a, b):
        if kernel == "energy":
            return -abs(a - b)
        return np.exp(-((a - b) ** 2) / (2.0 * sigma**2))

    n, m = len(x), len(y)
    kxx = sum(k(a, b) for a in x for b in x) / n**2
    kyy = sum(k(a, b) for a in y for b in y) / m**2
    kxy = sum(k(a, b) for a in x for b in y) / (n * m)
    return kxx + kyy - 2.0 * kxy


class TestL2:
    def test_zero_on_equal_inputs(self):
        model = tape.constant(np.tile([1.0, 2.0], (4, 1)))
        assert float(l2(model, np.array([1.0, 2.0])).value) == 0.0

    def test_hand_mean_square(self):
        model = tape.constant([[1.0, 2.0]])
        assert float(l2(model, np.array([0.0, 0.0])).value) == pytest.approx(2.5)

    def test_length_mismatch_is_config_error(self):
        with pytest.raises(ConfigError, match="length"):
            l2(tape.constant([[1.0, 2.0, 3.0]]), np.array([0.0, 0.0]))

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(0)
        x0 = rng.normal(size=(3, 4))
        expert = rng.normal(size=4)

        def f(v):
            return float(l2(tape.leaf(v), expert).value)

        x = tape.leaf(x0)
        grad = tape.backward(l2(x, expert), [x])[x]
        np.testing.assert_allclose(grad, central_difference(f, x0), rtol=1e-4, atol=1e-10)


class TestMmd2:
    @pytest.mark.parametrize("kernel,sigma", [("energy", None), ("gaussian", 0.8)])
    def test_zero_on_identical_multisets(self, kernel, sigma):
        x = np.array([[0.3, -1.2, 0.7, 0.3]])
        out = mmd2_biased(tape.constant(x), x[0], kernel=kernel, sigma=sigma)
        assert abs(float(out.value)) < 1e-12

    def test_energy_distance_of_point_masses(self):
        # {0} vs {1}: 0 + 0 - 2*(-1) = 2
        out = mmd2_biased(tape.constant([[0.0]]), np.array([1.0]), kernel="energy")
        assert float(out.value) == pytest.approx(2.0)

    @pytest.mark.parametrize("kernel,sigma", [("energy", 1.0), ("gaussian", 0.6), ("gaussian", 2.0)])
    def test_matches_brute_force_oracle(self, kernel, sigma):
        rng = np.random.default_rng(1)
        for trial in range(10):
            n = int(rng.integers(1, 20))
            m = int(rng.integers(1, 20))
            x = rng.normal(size=(1, n))
            y = rng.normal(size=m)
            out = mmd2_biased(tape.constant(x), y, kernel=kernel, sigma=sigma)
            ref = brute_force_mmd2(x[0], y, kernel, sigma)
            assert float(out.value) == pytest.approx(ref, abs=1e-10)

    def test_batch_average(self):
        rng = np.random.default_rng(2)
        x = rng.normal(size=(5, 7))
        y = rng.normal(size=4)
        out = mmd2_biased(tape.constant(x), y, kernel="energy")
        ref = np.mean([brute_force_mmd2(row, y, "energy") for row in x])
        assert float(out.value) == pytest.approx(ref, abs=1e-10)

    @pytest.mark.parametrize("kernel,sigma", [("energy", None), ("gaussian", 0.9)])
    def test_symmetry(self, kernel, sigma):
        rng = np.random.default_rng(3)
        x = rng.normal(size=6)
        y = rng.normal(size=6)
        a = float(mmd2_biased(tape.constant([x]), y, kernel=kernel, sigma=sigma).value)
        b = float(mmd2_biased(tape.constant([y]), x, kernel=kernel, sigma=sigma).value)
        assert a == pytest.approx(b, abs=1e-12)

    def test_nonnegative_on_random_pairs(self):
        rng = np.random.default_rng(4)
        for _ in range(1000):
            n = int(rng.integers(1, 12))
            m = int(rng.integers(1, 12))
            x = rng.normal(scale=rng.uniform(0.5, 2.0), size=(1, n))
            y = rng.normal(loc=rng.uniform(-1, 1), size=m)
            g = float(mmd2_biased(tape.constant(x), y, kernel="gaussian", sigma=1.0).value)
            e = float(mmd2_biased(tape.constant(x), y, kernel="energy").value)
            assert g >= -1e-9
            assert e >= -1e-9

    @pytest.mark.parametrize("kernel,sigma", [("energy", None), ("gaussian", 0.7)])
    def test_gradient_matches_finite_differences(self, kernel, sigma):
        rng = np.random.default_rng(5)
        x0 = rng.normal(size=(2, 6))
        y = rng.normal(size=5) + 5.0  # offset avoids |.| kinks under FD steps

        def f(v):
            return float(mmd2_biased(tape.leaf(v), y, kernel=kernel, sigma=sigma).value)

        x = tape.leaf(x0)
        grad = tape.backward(mmd2_biased(x, y, kernel=kernel, sigma=sigma), [x])[x]
        np.testing.assert_allclose(grad, central_difference(f, x0), rtol=1e-4, atol=1e-9)

    def test_sigma_contract(self):
        with pytest.raises(ConfigError, match="sigma"):
            mmd2_biased(tape.constant([[1.0]]), np.array([1.0]), kernel="gaussian", sigma=0.0)
        with pytest.raises(ConfigError):
            LossSpec(kind="mmd2", kernel="gaussian", sigma=None)


class TestBackendAgreement:
    """Both kernel backends must produce the same numbers."""

    @pytest.mark.parametrize("name,impl", BACKENDS, ids=[b[0] for b in BACKENDS])
    def test_forward_and_grad(self, name, impl):
        rng = np.random.default_rng(6)
        x = np.ascontiguousarray(rng.normal(size=(4, 9)))
        y = np.ascontiguousarray(rng.normal(size=7))
        up = np.ascontiguousarray(rng.normal(size=4))
        np.testing.assert_allclose(
            impl.mmd2_energy(x, y), kernels_py.mmd2_energy(x, y), rtol=1e-12, atol=1e-13
        )
        np.testing.assert_allclose(
            impl.mmd2_gaussian(x, y, 0.8),
            kernels_py.mmd2_gaussian(x, y, 0.8),
            rtol=1e-12,
            atol=1e-13,
        )
        np.testing.assert_allclose(
            impl.mmd2_energy_grad(x, y, up),
            kernels_py.mmd2_energy_grad(x, y, up),
            rtol=1e-12,
            atol=1e-13,
        )
        np.testing.assert_allclose(
            impl.mmd2_gaussian_grad(x, y, 0.8, up),
            kernels_py.mmd2_gaussian_grad(x, y, 0.8, up),
            rtol=1e-12,
            atol=1e-13,
        )


def _spec(name, weight=1.0, kind="l2"):
    return TargetSpec(
        name=name,
        query=QuerySpec(kind="identity"),
        loss=LossSpec(kind=kind, kernel="energy"),
        weight=weight,
    )


class TestTotalLoss:
    def test_single_weighted_component(self):
        stats = {"identity_a": tape.constant([[0.3, 0.3]])}
        expert = {"identity_a": np.array([0.0, 0.0])}
        breakdown = total_loss(stats, expert, [_spec("a", weight=10.0)])
        assert float(breakdown.components["identity_a"].value) == pytest.approx(0.9)
        assert float(breakdown.total.value) == pytest.approx(0.9)

    def test_total_is_sum_of_components(self):
        rng = np.random.default_rng(7)
        stats = {f"identity_{k}": tape.constant(rng.normal(size=(3, 4))) for k in "abc"}
        expert = {f"identity_{k}": rng.normal(size=4) for k in "abc"}
        specs = [_spec(k, weight=w) for k, w in zip("abc", (1.0, 2.5, 10.0))]
        breakdown = total_loss(stats, expert, specs)
        parts = sum(float(v.value) for v in breakdown.components.values())
        assert float(breakdown.total.value) == pytest.approx(parts, abs=1e-12)

    def test_invariant_to_spec_ordering(self):
        rng = np.random.default_rng(8)
        stats = {f"identity_{k}": tape.constant(rng.normal(size=(2, 3))) for k in "abcd"}
        expert = {f"identity_{k}": rng.normal(size=3) for k in "abcd"}
        specs = [_spec(k, weight=w) for k, w in zip("abcd", (1.0, 0.5, 2.0, 3.0))]
        a = float(total_loss(stats, expert, specs).total.value)
        b = float(total_loss(stats, expert, specs[::-1]).total.value)
        assert a == b

    def test_weight_scaling_is_exact(self):
        rng = np.random.default_rng(9)
        stats = {"identity_a": tape.constant(rng.normal(size=(2, 3)))}
        expert = {"identity_a": rng.normal(size=3)}
        one = total_loss(stats, expert, [_spec("a", weight=1.0)])
        three = total_loss(stats, expert, [_spec("a", weight=3.0)])
        assert float(three.total.value) == pytest.approx(3.0 * float(one.total.value), rel=1e-15)

    def test_missing_expert_key_prints_template(self):
        stats = {"identity_a": tape.constant([[1.0]])}
        with pytest.raises(ConfigError, match="identity_a"):
            total_loss(stats, {}, [_spec("a")])

    def test_expert_takes_no_gradient(self):
        x = tape.leaf([[1.0, 2.0]])
        breakdown = total_loss({"identity_a": x}, {"identity_a": np.array([0.5, 0.5])}, [_spec("a")])
        grads = tape.backward(breakdown.total, [x])
        assert np.all(np.isfinite(grads[x]))
