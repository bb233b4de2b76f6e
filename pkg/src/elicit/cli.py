"""Command-line interface.

Subcommands: fit (train and persist a bundle), diagnose (tables from a saved
bundle), average (multi-run prior averaging), template (expert-data skeleton
for a configuration), simulate-expert (oracle expert data from known
hyperparameter values).

Exit codes: 0 success, 1 validation error, 2 numerical failure. Every failure
prints a single machine-parsable line to stderr.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import diagnostics, svg
from .config import parse_config
from .engine import fit_parallel, get_expert_data_format, simulate_expert
from .errors import ConfigError
from .persist import load_bundle, save_bundle


def _ensure_dir(path: str) -> None:
    os.makedirs(path, exist_ok=True)


def _history_rows(records):
    """Wide history table: run,epoch,total_loss,<components>,<hypers>,grad_norm,time_s."""
    comp_cols: list = []
    hyper_cols: list = []
    for rec in records:
        if rec.error is not None or not rec.history["loss"]:
            continue
        comp_cols = sorted(rec.history["loss_component"][0])
        hyper_cols = list(rec.history["hyperparameter"][0])
        break
    header = ["run", "epoch", "total_loss", *comp_cols, *hyper_cols, "grad_norm", "time_s"]
    rows = []
    for run, rec in enumerate(records):
        if rec.error is not None:
            continue
        h = rec.history
        for epoch in range(len(h["loss"])):
            grads = h["hyperparameter_gradient"][epoch]
            global_norm = float(np.sqrt(sum(g * g for g in grads.values())))
            rows.append(
                [
                    run,
                    epoch,
                    h["loss"][epoch],
                    *[h["loss_component"][epoch][c] for c in comp_cols],
                    *[h["hyperparameter"][epoch][c] for c in hyper_cols],
                    global_norm,
                    h["time"][epoch],
                ]
            )
    return header, rows


def _prior_rows(records, param_names):
    header = ["run", *param_names]
    rows = []
    for run, rec in enumerate(records):
        if rec.error is not None or "prior_samples" not in rec.results:
            continue
        flat = rec.results["prior_samples"].reshape(-1, len(param_names))
        for sample in flat:
            rows.append([run, *[float(v) for v in sample]])
    return header, rows


def _elicit_rows(records):
    table = diagnostics.compare_elicits(records)
    return ["run", "key", "index", "expert", "model", "abs_deviation"], table.rows


def _write_trajectory_svgs(out_dir: str, stem: str, records) -> None:
    _, loss_rows = diagnostics.export_loss_trajectories(records)
    series: dict = {}
    for run, epoch, name, value in loss_rows:
        series.setdefault(f"run{run}/{name}", ([], []))
        series[f"run{run}/{name}"][0].append(epoch)
        series[f"run{run}/{name}"][1].append(value)
    svg.write_line_chart(
        os.path.join(out_dir, f"{stem}_loss.svg"), series, "loss trajectories", "epoch", "loss"
    )
    _, hyp_rows = diagnostics.export_hyperparameter_trajectories(records)
    series = {}
    for run, epoch, name, value in hyp_rows:
        series.setdefault(f"run{run}/{name}", ([], []))
        series[f"run{run}/{name}"][0].append(epoch)
        series[f"run{run}/{name}"][1].append(value)
    svg.write_line_chart(
        os.path.join(out_dir, f"{stem}_hyperparameters.svg"),
        series,
        "hyperparameter trajectories",
        "epoch",
        "value",
    )


def _cmd_fit(args) -> int:
    bundle = parse_config(args.config)
    records = fit_parallel(bundle, args.runs)
    _ensure_dir(args.out)
    save_bundle(os.path.join(args.out, "bundle.json"), bundle, records)
    header, rows = _history_rows(records)
    diagnostics.write_csv(os.path.join(args.out, "history.csv"), header, rows)
    failed = [(i, r.error) for i, r in enumerate(records) if r.error is not None]
    if len(failed) < len(records):
        header, rows = _elicit_rows(records)
        diagnostics.write_csv(os.path.join(args.out, "elicits.csv"), header, rows)
        header, rows = _prior_rows(records, [p.name for p in bundle.parameters])
        diagnostics.write_csv(os.path.join(args.out, "priors.csv"), header, rows)
        if args.svg:
            _write_trajectory_svgs(args.out, "fit", records)
    for run, err in failed:
        print(f"elicit: run {run} failed: {err}", file=sys.stderr)
    if failed:
        print(f"elicit: error: numerical: {len(failed)}/{len(records)} runs failed", file=sys.stderr)
        return 2
    return 0


def _cmd_diagnose(args) -> int:
    saved = load_bundle(args.bundle)
    records = saved.records
    if not records:
        raise ConfigError("bundle contains no fit records; run fit first")
    stem = os.path.splitext(os.path.basename(args.bundle))[0]
    _ensure_dir(args.out)
    header, rows = diagnostics.export_loss_trajectories(records)
    diagnostics.write_csv(os.path.join(args.out, f"{stem}_loss.csv"), header, rows)
    header, rows = diagnostics.export_hyperparameter_trajectories(records)
    diagnostics.write_csv(os.path.join(args.out, f"{stem}_hyperparameters.csv"), header, rows)
    header, rows = _elicit_rows(records)
    diagnostics.write_csv(os.path.join(args.out, f"{stem}_elicits.csv"), header, rows)
    param_names = [p.name for p in saved.bundle.parameters]
    header, rows = _prior_rows(records, param_names)
    diagnostics.write_csv(os.path.join(args.out, f"{stem}_priors.csv"), header, rows)
    if args.svg:
        _write_trajectory_svgs(args.out, stem, records)
    return 0


def _cmd_average(args) -> int:
    saved = load_bundle(args.bundle)
    if not saved.records:
        raise ConfigError("bundle contains no fit records; run fit first")
    avg = diagnostics.prior_average(saved.records, pool_size=args.pool_size, seed=args.seed)
    _ensure_dir(args.out)
    rows = [
        (run, float(loss), float(w))
        for run, (loss, w) in enumerate(zip(avg.final_losses, avg.weights))
    ]
    diagnostics.write_csv(
        os.path.join(args.out, "weights.csv"), ("run", "final_loss", "weight"), rows
    )
    param_names = [p.name for p in saved.bundle.parameters]
    diagnostics.write_csv(
        os.path.join(args.out, "pooled_priors.csv"),
        param_names,
        [[float(v) for v in row] for row in avg.samples],
    )
    return 0


def _cmd_template(args) -> int:
    bundle = parse_config(args.config)
    template = get_expert_data_format(bundle)
    skeleton = {
        key: [0.0] * length if length is not None else []
        for key, length in template.items()
    }
    print(json.dumps(skeleton, indent=2))
    return 0


def _parse_truth(spec: str) -> dict:
    truth = {}
    for item in spec.split(","):
        item = item.strip()
        if not item:
            continue
        if "=" not in item:
            raise ConfigError(f"--truth entries must be name=value, got {item!r}")
        name, _, value = item.partition("=")
        try:
            truth[name.strip()] = float(value)
        except ValueError:
            raise ConfigError(f"--truth {name.strip()!r}: not a number: {value!r}")
    if not truth:
        raise ConfigError("--truth is empty")
    return truth


def _cmd_simulate_expert(args) -> int:
    bundle = parse_config(args.config)
    data = simulate_expert(
        bundle, _parse_truth(args.truth), num_samples=args.samples, seed=args.seed
    )
    doc = {k: np.asarray(v).tolist() for k, v in data.items()}
    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
    print(f"wrote expert data for {len(doc)} statistics to {args.out}", file=sys.stderr)
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="elicit",
        description="Learn Bayesian priors from expert-elicited statistics.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="train prior hyperparameters from a configuration")
    p.add_argument("config")
    p.add_argument("--runs", type=int, default=1, help="independent replications")
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--svg", action="store_true", help="also write SVG charts")
    p.set_defaults(func=_cmd_fit)

    p = sub.add_parser("diagnose", help="export diagnostic tables from a saved bundle")
    p.add_argument("bundle")
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--svg", action="store_true", help="also write SVG charts")
    p.set_defaults(func=_cmd_diagnose)

    p = sub.add_parser("average", help="prior averaging over a bundle's replications")
    p.add_argument("bundle")
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--pool-size", type=int, default=4096)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_average)

    p = sub.add_parser("template", help="print the expert-data skeleton for a configuration")
    p.add_argument("config")
    p.set_defaults(func=_cmd_template)

    p = sub.add_parser(
        "simulate-expert", help="write oracle expert data simulated under known truth"
    )
    p.add_argument("config")
    p.add_argument("--truth", required=True, help="comma-separated name=value pairs")
    p.add_argument("--samples", type=int, default=10000)
    p.add_argument("--out", default="expert.json")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=_cmd_simulate_expert)
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"elicit: error: validation: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:
        print(f"elicit: error: numerical: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
