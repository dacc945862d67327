"""Synthetic-data benchmark: SNR sweep x seeds x methods.

For every SNR and seed a dataset of ``n_total`` samples is drawn, the
first ``n_train`` rows train and the rest form the test pool.  The two
CV methods choose gamma by the mean best CV criterion over seeds and
then use each seed's solution at that gamma, averaged over folds.  The
baselines choose C by mean K-fold accuracy over seeds and refit on the
full training split.
"""

from __future__ import annotations

import csv
import json
import logging
import os
import platform
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .baselines import L1_C_GRID, argmax_smallest, cv_accuracy, svm_rfe, train_l1_svm
from .cv import FinalModel, LossKind, average_fold_models, decision_values
from .datagen import DEFAULT_RHO, generate_dataset, partition_folds
from .exceptions import InvalidParameterError
from .metrics import auc, feature_recovery, true_mask
from .search import SearchConfig, exhaustive_search_multi, local_search, select_gamma

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

logger = logging.getLogger(__name__)

METHODS = {
    "cv_svm": "CV-SVM",
    "cv_ls_svm": "CV-LS-SVM",
    "l1_svm": "L1-SVM",
    "svm_rfe": "SVM-RFE",
}
CV_LOSS = {"cv_svm": LossKind.HINGE, "cv_ls_svm": LossKind.SQUARED}
METRICS = ("auc", "f1", "nonzeros", "runtime")
PAPER_TEST_POOL = 19900
QUICK_TEST_POOL = 1900
THREADS_ENV = "CVSVM_THREADS"


@dataclass
class ExperimentConfig:
    p: int = 20
    n_train: int = 100
    n_total: int = 20000
    snr_list: tuple = (0.25, 1.0, 4.0)
    seeds: tuple = (0, 1, 2, 3, 4)
    K: int = 5
    gamma_grid: tuple = (100.0, 300.0, 500.0, 700.0, 1000.0)
    c_grid: tuple = L1_C_GRID
    methods: tuple = ("cv_svm", "cv_ls_svm", "l1_svm", "svm_rfe")
    search: SearchConfig = field(default_factory=SearchConfig)
    output_dir: str = "results"
    standardize: bool = False
    rho: float = DEFAULT_RHO
    fold_seed_offset: int = 0
    gamma_selection: str = "mean"

    def __post_init__(self):
        self.snr_list = tuple(float(s) for s in self.snr_list)
        self.seeds = tuple(int(s) for s in self.seeds)
        self.gamma_grid = tuple(float(g) for g in self.gamma_grid)
        self.c_grid = tuple(float(c) for c in self.c_grid)
        self.methods = tuple(self.methods)
        if not 1 <= self.n_train < self.n_total:
            raise InvalidParameterError("need 1 <= n_train < n_total")
        if not self.seeds:
            raise InvalidParameterError("seeds must be nonempty")
        for name, grid in (("snr_list", self.snr_list), ("gamma_grid", self.gamma_grid),
                           ("c_grid", self.c_grid)):
            if not grid or min(grid) <= 0:
                raise InvalidParameterError(f"{name} must be nonempty and positive")
        unknown = set(self.methods) - set(METHODS)
        if unknown:
            raise InvalidParameterError(f"unknown methods {sorted(unknown)}; choose from {list(METHODS)}")
        if self.gamma_selection not in ("mean", "per_seed"):
            raise InvalidParameterError("gamma_selection must be 'mean' or 'per_seed'")

    @property
    def test_pool(self) -> int:
        return self.n_total - self.n_train

    def quick(self) -> "ExperimentConfig":
        """Smaller test pool and the first two seeds, for smoke runs."""
        return replace(self, n_total=self.n_train + QUICK_TEST_POOL, seeds=self.seeds[:2])

    def to_dict(self) -> dict:
        out = asdict(self)
        out["search"] = asdict(self.search)
        return out


_SEARCH_KEYS = {
    "search_mode": "mode",
    "time_budget": "wall_clock_budget",
    "threads": "worker_count",
    "cardinality_bounds": "cardinality_bounds",
    "record_trace": "record_trace",
    "restarts": "restarts",
    "search_seed": "seed",
}


def config_from_mapping(data: dict) -> ExperimentConfig:
    """Build a config from flat keys (see README for the schema)."""
    data = dict(data)
    search_kwargs = {}
    for key, target in _SEARCH_KEYS.items():
        if key in data:
            search_kwargs[target] = data.pop(key)
    allowed = {f.name for f in fields(ExperimentConfig)} - {"search"}
    unknown = set(data) - allowed
    if unknown:
        raise InvalidParameterError(f"unknown config keys: {sorted(unknown)}")
    return ExperimentConfig(search=SearchConfig(**search_kwargs), **data)


def load_config(path) -> ExperimentConfig:
    with open(path, "rb") as fh:
        return config_from_mapping(tomllib.load(fh))


def resolve_threads(cli_threads: Optional[int], config: ExperimentConfig) -> int:
    if cli_threads is not None:
        return int(cli_threads)
    env = os.environ.get(THREADS_ENV)
    if env:
        return int(env)
    return config.search.worker_count


@dataclass
class ExperimentReport:
    config: ExperimentConfig
    records: list
    summary: list
    hyperparameters: dict
    traces: dict
    metadata: dict
    warnings: list = field(default_factory=list)

    def cell(self, method: str, snr: float) -> dict:
        for row in self.summary:
            if row["method"] == method and row["snr"] == snr:
                return row
        raise KeyError((method, snr))


def _prepare(config: ExperimentConfig, snr: float, seed: int):
    data = generate_dataset(config.p, config.n_total, snr, seed, config.rho)
    train, test = data.split(config.n_train)
    if config.standardize:
        mu = train.features.mean(axis=0)
        sd = train.features.std(axis=0)
        sd[sd == 0] = 1.0
        train = replace(train, features=(train.features - mu) / sd)
        test = replace(test, features=(test.features - mu) / sd)
    folds = partition_folds(config.n_train, config.K, seed + config.fold_seed_offset)
    return train, test, folds


def _score(model, test, w_star):
    rec = feature_recovery(model.mask, true_mask(w_star))
    return {
        "auc": auc(decision_values(model, test.features), test.labels),
        "f1": rec.f1,
        "precision": rec.precision,
        "recall": rec.recall,
        "nonzeros": rec.nonzeros,
    }


def _map(threads, fn, items):
    items = list(items)
    if threads <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _run_cv_methods(config, snr, prepared, methods, threads, records, hyper, traces):
    kinds = [CV_LOSS[m] for m in methods]
    search = replace(config.search, worker_count=threads)
    per_gamma = {kind: {} for kind in kinds}
    seconds = np.zeros((len(config.seeds),))
    for gamma in config.gamma_grid:
        for kind in kinds:
            per_gamma[kind][gamma] = []
        for s, (train, _test, folds) in enumerate(prepared):
            if search.mode == "exhaustive":
                res = exhaustive_search_multi(train.features, train.labels, folds, gamma, kinds, search)
                seconds[s] += next(iter(res.values())).elapsed
            else:
                res = {k: local_search(train.features, train.labels, folds, gamma, k, search)
                       for k in kinds}
                seconds[s] += sum(r.elapsed for r in res.values())
            for kind in kinds:
                per_gamma[kind][gamma].append(res[kind])

    for method in methods:
        kind = CV_LOSS[method]
        data = [(tr.features, tr.labels) for tr, _, _ in prepared]
        selection = select_gamma(data, [f for _, _, f in prepared], config.gamma_grid, kind, search,
                                 per_seed=config.gamma_selection == "per_seed",
                                 results=per_gamma[kind])
        hyper[(method, snr)] = {"gamma": selection.chosen_gamma,
                                "mean_objective_by_gamma": selection.per_gamma_mean_objective}
        for s, seed in enumerate(config.seeds):
            gamma = (selection.per_seed_gamma[s] if selection.per_seed_gamma
                     else selection.chosen_gamma)
            result = selection.results[gamma][s]
            train, test, _ = prepared[s]
            final = average_fold_models(result.best_evaluation)
            rec = {"method": method, "snr": snr, "seed": seed, "hyperparameter": gamma,
                   "seconds": float(seconds[s]), "completed": result.completed,
                   "objective": result.best_objective, "model": final.to_dict()}
            rec.update(_score(final, test, train.true_coefficients))
            records.append(rec)
            traces[(method, snr, seed)] = list(result.incumbent_trace)


def _run_l1(config, snr, prepared, threads, records, hyper):
    grid = config.c_grid

    def tune(args):
        C, s = args
        train, _, folds = prepared[s]
        t0 = time.perf_counter()
        acc = cv_accuracy(train.features, train.labels, C, folds)
        return acc, time.perf_counter() - t0

    jobs = [(C, s) for C in grid for s in range(len(prepared))]
    out = dict(zip(jobs, _map(threads, tune, jobs)))
    means = [float(np.mean([out[(C, s)][0] for s in range(len(prepared))])) for C in grid]
    C_star = argmax_smallest(grid, means)
    hyper[("l1_svm", snr)] = {"C": C_star, "mean_accuracy_by_C": means}
    for s, seed in enumerate(config.seeds):
        train, test, _ = prepared[s]
        t0 = time.perf_counter()
        model = train_l1_svm(train.features, train.labels, C_star)
        elapsed = time.perf_counter() - t0 + sum(out[(C, s)][1] for C in grid)
        final = FinalModel(model.weights, model.bias, model.mask)
        rec = {"method": "l1_svm", "snr": snr, "seed": seed, "hyperparameter": C_star,
               "seconds": elapsed, "completed": model.converged, "objective": float("nan"),
               "model": final.to_dict()}
        rec.update(_score(final, test, train.true_coefficients))
        records.append(rec)


def _run_rfe(config, snr, prepared, threads, records, hyper):
    grid = config.c_grid

    def tune(args):
        C, s = args
        train, _, folds = prepared[s]
        t0 = time.perf_counter()
        res = svm_rfe(train.features, train.labels, config.K, config.seeds[s] + config.fold_seed_offset, C)
        return res, time.perf_counter() - t0

    jobs = [(C, s) for C in grid for s in range(len(prepared))]
    out = dict(zip(jobs, _map(threads, tune, jobs)))
    means = [float(np.mean([out[(C, s)][0].inner_cv_accuracy_by_size.max()
                            for s in range(len(prepared))])) for C in grid]
    C_star = argmax_smallest(grid, means)
    hyper[("svm_rfe", snr)] = {"C": C_star, "mean_accuracy_by_C": means}
    for s, seed in enumerate(config.seeds):
        train, test, _ = prepared[s]
        res = out[(C_star, s)][0]
        m = res.model
        final = FinalModel(m.weights, m.bias, res.chosen_mask)
        rec = {"method": "svm_rfe", "snr": snr, "seed": seed, "hyperparameter": C_star,
               "seconds": sum(out[(C, s)][1] for C in grid), "completed": True,
               "objective": float("nan"), "model": final.to_dict()}
        rec.update(_score(final, test, train.true_coefficients))
        records.append(rec)


def _aggregate(config, records, warnings_out):
    summary = []
    for snr in config.snr_list:
        for method in config.methods:
            rows = [r for r in records if r["method"] == method and r["snr"] == snr and not r.get("error")]
            cell = {"method": method, "snr": snr, "n": len(rows),
                    "completed": all(r["completed"] for r in rows)}
            for metric in METRICS:
                key = "seconds" if metric == "runtime" else metric
                vals = np.array([r[key] for r in rows], dtype=np.float64)
                if vals.size == 0:
                    mean = se = float("nan")
                elif vals.size == 1:
                    mean, se = float(vals[0]), 0.0
                else:
                    mean = float(vals.mean())
                    se = float(vals.std(ddof=1) / np.sqrt(vals.size))
                cell[metric] = (mean, se)
            summary.append(cell)
    if len(config.seeds) == 1:
        warnings_out.append("single seed: standard errors are reported as 0")
    return summary


def run_experiment(config: ExperimentConfig, threads: Optional[int] = None) -> ExperimentReport:
    """Run every enabled method at every SNR and seed.

    A method that raises is recorded per cell with an ``error`` entry and
    the rest of the report is still produced.
    """
    threads = resolve_threads(threads, config)
    records, hyper, traces, warns = [], {}, {}, []
    if config.test_pool != PAPER_TEST_POOL:
        warns.append(f"test pool of {config.test_pool} samples (paper uses {PAPER_TEST_POOL})")
    t_start = time.perf_counter()
    for snr in config.snr_list:
        prepared = [_prepare(config, snr, seed) for seed in config.seeds]
        cv_methods = [m for m in config.methods if m in CV_LOSS]
        steps = []
        if cv_methods:
            steps.append((cv_methods, lambda: _run_cv_methods(config, snr, prepared, cv_methods,
                                                              threads, records, hyper, traces)))
        if "l1_svm" in config.methods:
            steps.append((["l1_svm"], lambda: _run_l1(config, snr, prepared, threads, records, hyper)))
        if "svm_rfe" in config.methods:
            steps.append((["svm_rfe"], lambda: _run_rfe(config, snr, prepared, threads, records, hyper)))
        for methods, step in steps:
            try:
                step()
            except Exception as exc:  # recorded per cell, report still produced
                logger.exception("methods %s failed at snr=%s", methods, snr)
                for method in methods:
                    for seed in config.seeds:
                        records.append({"method": method, "snr": snr, "seed": seed,
                                        "error": f"{type(exc).__name__}: {exc}"})
        logger.info("snr=%s done after %.1fs", snr, time.perf_counter() - t_start)

    for r in records:
        if not r.get("error") and not r["completed"] and r["method"] in CV_LOSS:
            warns.append(f"{METHODS[r['method']]} snr={r['snr']} seed={r['seed']}: "
                         "search stopped at the time budget (completed=false)")
    summary = _aggregate(config, records, warns)
    metadata = {
        "cvsvm_version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "platform": platform.platform(),
        "threads": threads,
        "test_pool": config.test_pool,
        "cv_methods_share_enumeration": config.search.mode == "exhaustive",
        "fold_reuse": "gamma selection and final models use the same folds",
        "total_seconds": time.perf_counter() - t_start,
    }
    return ExperimentReport(config, records, summary, hyper, traces, metadata, warns)


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17g}"
    return str(v)


def emit_plot_data(report: ExperimentReport, out_dir) -> list:
    """Write one CSV per metric plus per-seed rows, models, traces and metadata.

    ``auc.csv``, ``f1.csv``, ``nonzeros.csv`` and ``runtime.csv`` have columns
    ``snr,method,mean,stderr``.  Only ``runtime.csv``, the ``elapsed_s``
    column of the traces and ``report.json`` carry wall-clock values.
    """
    out = Path(out_dir)
    (out / "traces").mkdir(parents=True, exist_ok=True)
    written = []
    for metric in METRICS:
        path = out / f"{metric}.csv"
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["snr", "method", "mean", "stderr"])
            for cell in report.summary:
                mean, se = cell[metric]
                w.writerow([_fmt(cell["snr"]), METHODS[cell["method"]], _fmt(mean), _fmt(se)])
        written.append(path)

    path = out / "per_seed.csv"
    cols = ["method", "snr", "seed", "hyperparameter", "auc", "f1", "precision", "recall",
            "nonzeros", "objective", "completed", "error"]
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for r in report.records:
            w.writerow([METHODS[r["method"]] if c == "method" else _fmt(r.get(c, "")) for c in cols])
    written.append(path)

    models = [{"method": r["method"], "snr": r["snr"], "seed": r["seed"], **r["model"]}
              for r in report.records if "model" in r]
    path = out / "models.json"
    path.write_text(json.dumps({"config": report.config.to_dict(), "models": models}, indent=1) + "\n")
    written.append(path)

    for (method, snr, seed), trace in sorted(report.traces.items()):
        path = out / "traces" / f"{method}_snr{snr:g}_seed{seed}.csv"
        with path.open("w") as fh:
            fh.write("elapsed_s,objective,mask_bits\n")
            for t, obj, mask in trace:
                fh.write(f"{t:.6f},{obj:.17g},{mask}\n")
        written.append(path)

    meta = {
        "metadata": report.metadata,
        "warnings": report.warnings,
        "hyperparameters": [{"method": m, "snr": s, **v} for (m, s), v in report.hyperparameters.items()],
    }
    path = out / "report.json"
    path.write_text(json.dumps(meta, indent=1) + "\n")
    written.append(path)
    return written


def audit(out_dir) -> list:
    """Recompute per-seed metrics from ``models.json`` and regenerated test data.

    Returns a list of mismatch descriptions (empty when everything agrees).
    """
    out = Path(out_dir)
    blob = json.loads((out / "models.json").read_text())
    cfg = dict(blob["config"])
    search = cfg.pop("search")
    config = ExperimentConfig(search=SearchConfig(**search), **cfg)
    with (out / "per_seed.csv").open() as fh:
        rows = {(r["method"], float(r["snr"]), int(r["seed"])): r for r in csv.DictReader(fh)}
    problems = []
    for m in blob["models"]:
        _, test, _ = _prepare(config, m["snr"], m["seed"])
        model = FinalModel.from_dict(m)
        got = _score(model, test, test.true_coefficients)
        row = rows[(METHODS[m["method"]], float(m["snr"]), int(m["seed"]))]
        for key in ("auc", "f1", "nonzeros"):
            if float(row[key]) != float(got[key]):
                problems.append(f"{m['method']} snr={m['snr']} seed={m['seed']} {key}: "
                                f"stored {row[key]} recomputed {got[key]}")
    return problems
