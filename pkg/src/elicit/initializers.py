"""Hyperparameter initialization: explicit values or Sobol screening.

The Sobol generator is self-contained: Gray-code recurrence over direction
numbers derived from primitive polynomials with the Joe-Kuo initial values
(dimensions up to 21). Candidates are drawn in unconstrained space over a
per-dimension box mean +/- radius and screened by a forward loss evaluation
under common random numbers; the finite-loss argmin wins.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError

_MAXBIT = 32

# (degree s, coefficient bits a, initial values m_1..m_s) per dimension >= 2;
# dimension 1 is the base-2 van der Corput sequence.
_JOE_KUO = (
    (1, 0, (1,)),
    (2, 1, (1, 3)),
    (3, 1, (1, 3, 1)),
    (3, 2, (1, 1, 1)),
    (4, 1, (1, 1, 3, 3)),
    (4, 4, (1, 3, 5, 13)),
    (5, 2, (1, 1, 5, 5, 17)),
    (5, 4, (1, 1, 5, 5, 5)),
    (5, 7, (1, 1, 7, 11, 19)),
    (5, 11, (1, 1, 5, 1, 1)),
    (5, 13, (1, 1, 1, 3, 11)),
    (5, 14, (1, 3, 5, 5, 31)),
    (6, 1, (1, 3, 3, 9, 7, 49)),
    (6, 13, (1, 1, 1, 15, 21, 21)),
    (6, 16, (1, 3, 1, 13, 27, 49)),
    (6, 19, (1, 1, 1, 15, 7, 5)),
    (6, 22, (1, 3, 1, 15, 13, 25)),
    (6, 25, (1, 1, 5, 5, 19, 61)),
    (7, 1, (1, 3, 7, 11, 23, 15, 103)),
    (7, 4, (1, 3, 7, 13, 13, 15, 69)),
)

MAX_SOBOL_DIM = 1 + len(_JOE_KUO)


def _direction_numbers(dim_index: int, bits: int) -> np.ndarray:
    """v_1..v_bits for one dimension (0-based index), scaled by 2^_MAXBIT."""
    v = np.zeros(bits + 1, dtype=np.uint64)
    if dim_index == 0:
        for k in range(1, bits + 1):
            v[k] = np.uint64(1) << np.uint64(_MAXBIT - k)
        return v
    s, a, m = _JOE_KUO[dim_index - 1]
    for k in range(1, min(s, bits) + 1):
        v[k] = np.uint64(m[k - 1]) << np.uint64(_MAXBIT - k)
    for k in range(s + 1, bits + 1):
        vk = v[k - s] ^ (v[k - s] >> np.uint64(s))
        for i in range(1, s):
            if (a >> (s - 1 - i)) & 1:
                vk ^= v[k - i]
        v[k] = vk
    return v


def sobol_points(dim: int, count: int, skip_zero: bool = True) -> np.ndarray:
    """First `count` Sobol points in [0, 1)^dim (Gray-code order).

    The all-zeros first point of the raw sequence is skipped by default.
    """
    if dim < 1:
        raise ConfigError(f"Sobol dimension must be >= 1, got {dim}")
    if dim > MAX_SOBOL_DIM:
        raise ConfigError(
            f"Sobol dimension {dim} exceeds the available direction numbers "
            f"(max {MAX_SOBOL_DIM})"
        )
    total = count + (1 if skip_zero else 0)
    bits = max(total, 2).bit_length()
    v = np.stack([_direction_numbers(d, bits) for d in range(dim)])
    x = np.zeros(dim, dtype=np.uint64)
    points = np.empty((total, dim), dtype=np.float64)
    points[0] = 0.0
    for n in range(1, total):
        k = (n & -n).bit_length()  # 1-based index of the lowest set bit of n
        x = x ^ v[:, k]
        points[n] = x / float(1 << _MAXBIT)
    return points[1:] if skip_zero else points


@dataclass(frozen=True)
class InitializerConfig:
    method: str = "sobol"  # sobol | explicit
    iterations: int = 32
    mean: float = 0.0
    radius: float = 2.0
    values: dict | None = None

    def __post_init__(self):
        if self.method not in ("sobol", "explicit"):
            raise ConfigError(f"unknown initializer method {self.method!r}")
        if self.method == "sobol":
            if self.iterations < 1:
                raise ConfigError("initializer iterations must be >= 1")
            if self.radius <= 0.0:
                raise ConfigError("initializer radius must be positive")
        if self.method == "explicit" and not self.values:
            raise ConfigError("explicit initializer requires a values map")


@dataclass
class InitDiagnostics:
    """Screening record: candidates (unconstrained space), losses, winner."""

    matrix: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))
    losses: np.ndarray = field(default_factory=lambda: np.zeros(0))
    selected_index: int = -1


def sobol_candidates(dim: int, iterations: int, mean: float, radius: float) -> np.ndarray:
    """Sobol points mapped affinely onto [mean - radius, mean + radius]^dim."""
    pts = sobol_points(dim, iterations)
    return (mean - radius) + 2.0 * radius * pts


def screen_and_select(candidates: np.ndarray, evaluate) -> tuple:
    """Evaluate the forward loss per candidate and pick the finite argmin.

    ``evaluate`` maps a candidate vector to a scalar loss; it must use common
    random numbers across candidates so comparisons are low-variance. Ties
    break toward the lowest index.
    """
    losses = np.array([float(evaluate(c)) for c in candidates], dtype=np.float64)
    finite = np.isfinite(losses)
    if not finite.any():
        raise ConfigError(
            f"initializer screening failed: all {losses.size} candidate losses "
            f"are non-finite; losses={losses.tolist()}"
        )
    masked = np.where(finite, losses, np.inf)
    idx = int(np.argmin(masked))
    diag = InitDiagnostics(matrix=np.array(candidates), losses=losses, selected_index=idx)
    return np.array(candidates[idx], dtype=np.float64), diag
