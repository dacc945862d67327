"""Command line entry point.

    cvsvm run --config exp.toml [--out DIR] [--threads N] [--quick]
    cvsvm audit --out DIR
    cvsvm generate --p 20 --n 20000 --snr 1.0 --seed 0 --out data.csv
    cvsvm select --data data.csv --gamma 100 300 --loss hinge [--standardize]

Failures exit with status 1 and print ``{"error": ..., "message": ...}``
on stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .cv import LossKind, average_fold_models
from .datagen import Dataset, generate_dataset, partition_folds
from .experiment import ExperimentConfig, audit, emit_plot_data, load_config, resolve_threads, run_experiment
from .search import SearchConfig, select_gamma, write_trace_csv


def _cmd_run(args):
    config = load_config(args.config) if args.config else ExperimentConfig()
    if args.quick:
        config = config.quick()
    out = Path(args.out or config.output_dir)
    threads = resolve_threads(args.threads, config)
    report = run_experiment(config, threads=threads)
    emit_plot_data(report, out)
    for w in report.warnings:
        logging.warning(w)
    print(json.dumps({"status": "ok", "output_dir": str(out),
                      "failed_cells": sum(1 for r in report.records if r.get("error"))}))
    return 0


def _cmd_audit(args):
    problems = audit(args.out)
    print(json.dumps({"status": "ok" if not problems else "mismatch", "problems": problems}))
    return 0 if not problems else 1


def _cmd_generate(args):
    data = generate_dataset(args.p, args.n, args.snr, args.seed, args.rho)
    data.to_csv(args.out)
    print(json.dumps({"status": "ok", "csv": str(args.out),
                      "sidecar": str(Path(args.out).with_suffix(".json"))}))
    return 0


def _cmd_select(args):
    data = Dataset.from_csv(args.data)
    X = data.features
    if args.standardize:
        sd = X.std(axis=0)
        sd[sd == 0] = 1.0
        X = (X - X.mean(axis=0)) / sd
    folds = partition_folds(data.n, args.folds, args.fold_seed)
    config = SearchConfig(mode=args.mode, wall_clock_budget=args.time_budget,
                          worker_count=args.threads or 1, restarts=args.restarts)
    kind = LossKind.parse(args.loss)
    selection = select_gamma([(X, data.labels)], [folds], args.gamma, kind, config)
    result = selection.chosen_results()[0]
    final = average_fold_models(result.best_evaluation)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "model.json").write_text(json.dumps(
        {**final.to_dict(), "gamma": selection.chosen_gamma, "loss_kind": kind.value,
         "standardized": bool(args.standardize)}, indent=1) + "\n")
    (out / "evaluation.json").write_text(json.dumps(
        {**result.best_evaluation.to_dict(), "completed": result.completed,
         "masks_evaluated": result.masks_evaluated,
         "mean_objective_by_gamma": selection.per_gamma_mean_objective}, indent=1) + "\n")
    write_trace_csv(result, out / "trace.csv")
    print(json.dumps({"status": "ok", "mask": final.mask.to_string(),
                      "objective": result.best_objective, "gamma": selection.chosen_gamma,
                      "completed": result.completed}))
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="cvsvm", description=__doc__.split("\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run the synthetic benchmark")
    run.add_argument("--config", help="TOML file with flat experiment keys")
    run.add_argument("--out", help="output directory (overrides output_dir)")
    run.add_argument("--threads", type=int, help="worker threads (overrides CVSVM_THREADS)")
    run.add_argument("--quick", action="store_true", help="1,900-sample test pool, first two seeds")
    run.set_defaults(func=_cmd_run)

    aud = sub.add_parser("audit", help="recompute metrics from a run's saved models")
    aud.add_argument("--out", required=True)
    aud.set_defaults(func=_cmd_audit)

    gen = sub.add_parser("generate", help="write a synthetic dataset as CSV + JSON sidecar")
    gen.add_argument("--p", type=int, default=20)
    gen.add_argument("--n", type=int, default=20000)
    gen.add_argument("--snr", type=float, default=1.0)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--rho", type=float, default=0.35)
    gen.add_argument("--out", required=True)
    gen.set_defaults(func=_cmd_generate)

    sel = sub.add_parser("select", help="select features on a CSV dataset")
    sel.add_argument("--data", required=True, help="CSV with header y,x1,...,xp")
    sel.add_argument("--gamma", type=float, nargs="+", default=[100.0, 300.0, 500.0, 700.0, 1000.0])
    sel.add_argument("--loss", choices=[k.value for k in LossKind], default="hinge")
    sel.add_argument("--folds", type=int, default=5)
    sel.add_argument("--fold-seed", type=int, default=0)
    sel.add_argument("--mode", choices=["exhaustive", "local"], default="exhaustive")
    sel.add_argument("--restarts", type=int, default=10)
    sel.add_argument("--time-budget", type=float, default=300.0)
    sel.add_argument("--threads", type=int)
    sel.add_argument("--standardize", action="store_true")
    sel.add_argument("--out", required=True)
    sel.set_defaults(func=_cmd_select)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except Exception as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
