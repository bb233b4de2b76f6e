"""Post-fit evaluation: trajectory exports, fit tables, prior summaries, averaging.

Everything here is a pure function of fit records; exports are long-format
row lists ready for CSV. Multi-run prior averaging weights each replication
by exp(-final total loss), normalized over runs, and pools samples by
weighted resampling.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np


def _ok_records(records):
    good = [r for r in records if r.error is None and r.results]
    if not good:
        raise ValueError("no successful fit records to evaluate")
    return good


def export_loss_trajectories(records) -> tuple:
    """Long-format (run, epoch, series, value) rows for total and components."""
    header = ("run", "epoch", "series", "value")
    rows = []
    for run, rec in enumerate(records):
        if rec.error is not None:
            continue
        for epoch, (total, comps) in enumerate(
            zip(rec.history["loss"], rec.history["loss_component"])
        ):
            rows.append((run, epoch, "total", total))
            for key in sorted(comps):
                rows.append((run, epoch, key, comps[key]))
    return header, rows


def export_hyperparameter_trajectories(records) -> tuple:
    """Long-format (run, epoch, hyperparameter, value) rows.

    Parametric runs emit one series per hyperparameter (constrained scale);
    deep runs emit the per-parameter marginal mean and sd series.
    """
    header = ("run", "epoch", "hyperparameter", "value")
    rows = []
    for run, rec in enumerate(records):
        if rec.error is not None:
            continue
        for epoch, snap in enumerate(rec.history["hyperparameter"]):
            for name in snap:
                rows.append((run, epoch, name, snap[name]))
    return header, rows


@dataclass
class ComparisonTable:
    """Expert vs model-implied statistics; one row per run, key, index."""

    rows: list = field(default_factory=list)  # (run, key, index, expert, model, abs_dev)
    max_abs_deviation: float = 0.0

    def max_deviation(self, key_prefix: str = "") -> float:
        devs = [r[5] for r in self.rows if r[1].startswith(key_prefix)]
        return max(devs) if devs else 0.0


def compare_elicits(records) -> ComparisonTable:
    """Batch-averaged model statistics next to the expert values.

    When a model statistic and its expert counterpart have equal length the
    comparison is elementwise; otherwise (identity queries against free-length
    sample vectors) the means of both sides are compared on a single row.
    """
    rows = []
    for run, rec in enumerate(_ok_records(records)):
        stats = rec.results["elicited_statistics"]
        expert = rec.results["expert_elicited_statistics"]
        for key in sorted(expert):
            model = np.asarray(stats[key], dtype=np.float64)
            model = model.mean(axis=0) if model.ndim > 1 else model
            want = np.asarray(expert[key], dtype=np.float64).reshape(-1)
            if model.size == want.size:
                for i, (m, w) in enumerate(zip(model.reshape(-1), want)):
                    rows.append((run, key, i, float(w), float(m), abs(float(m) - float(w))))
            else:
                m, w = float(model.mean()), float(want.mean())
                rows.append((run, key, "mean", w, m, abs(m - w)))
    return ComparisonTable(rows=rows, max_abs_deviation=max(r[5] for r in rows))


@dataclass
class AveragedPrior:
    """Per-run mixture weights and the pooled prior sample matrix."""

    weights: np.ndarray
    final_losses: np.ndarray
    samples: np.ndarray  # [pool_size, P]


def averaging_weights(final_losses) -> np.ndarray:
    """softmax(-loss): shift-invariant, non-negative, sums to one."""
    losses = np.asarray(final_losses, dtype=np.float64)
    if not np.isfinite(losses).any():
        raise ValueError("prior averaging needs at least one finite final loss")
    shifted = np.where(np.isfinite(losses), losses - np.nanmin(losses[np.isfinite(losses)]), np.inf)
    w = np.exp(-shifted)
    return w / w.sum()


def prior_average(records, pool_size: int = 4096, seed: int = 0) -> AveragedPrior:
    """Mixture over the replications' priors, weighted by final total loss."""
    good = _ok_records(records)
    losses = np.array(
        [r.history["loss"][-1] if r.history["loss"] else np.nan for r in good]
    )
    weights = averaging_weights(losses)
    rng = np.random.default_rng(seed)
    choices = rng.choice(len(good), size=pool_size, p=weights)
    pooled = []
    for r in choices:
        flat = good[r].results["prior_samples"].reshape(-1, good[r].results["prior_samples"].shape[-1])
        pooled.append(flat[rng.integers(flat.shape[0])])
    return AveragedPrior(weights=weights, final_losses=losses, samples=np.array(pooled))


def summarize_joint_prior(record, quantile_probs=(0.05, 0.25, 0.5, 0.75, 0.95)) -> dict:
    """Marginal mean/sd/quantiles and the Pearson correlation matrix."""
    flat = record.results["prior_samples"]
    flat = flat.reshape(-1, flat.shape[-1])
    corr = np.corrcoef(flat, rowvar=False)
    return {
        "mean": flat.mean(axis=0),
        "sd": flat.std(axis=0),
        "quantiles": {p: np.quantile(flat, p, axis=0) for p in quantile_probs},
        "correlation": np.atleast_2d(corr),
    }


def write_csv(path, header, rows) -> None:
    """UTF-8 CSV with header row, '.' decimal, floats via repr (lossless)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(v) if isinstance(v, float) else v for v in row])
