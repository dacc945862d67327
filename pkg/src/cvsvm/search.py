"""Minimizing the CV criterion over feature masks.

``exhaustive_search`` enumerates every mask in Gray-code order so that
consecutive masks differ in one feature and each fold's Cholesky factor
is updated rather than rebuilt.  The sequence is cut into fixed blocks
that each start from a fresh factorization; blocks are independent, so
they can be spread over threads and the result does not depend on the
worker count.  ``local_search`` is the heuristic companion for p > 30.
"""

from __future__ import annotations

import logging
import time
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import _kernels
from .cv import CvEvaluation, LossKind, cv_objective, fold_grams
from .datagen import FoldPartition
from .exceptions import InvalidParameterError, NumericError, SearchError
from .lssvm import FeatureMask

logger = logging.getLogger(__name__)

MAX_EXHAUSTIVE_P = 30
BLOCK_BITS = 14


@dataclass
class SearchConfig:
    """Search settings.

    ``wall_clock_budget`` is in seconds.  ``cardinality_bounds`` restricts
    the search to masks with lo <= |S| <= hi.  ``tie_rtol`` is the relative
    gap under which two objectives count as tied, in which case the mask
    with fewer features (then the lexicographically smaller bit string)
    wins.
    """

    mode: str = "exhaustive"
    wall_clock_budget: float = 300.0
    worker_count: int = 1
    cardinality_bounds: Optional[tuple] = None
    record_trace: bool = True
    restarts: int = 10
    seed: int = 0
    tie_rtol: float = 1e-10

    def __post_init__(self):
        if self.mode not in ("exhaustive", "local"):
            raise InvalidParameterError(f"mode must be 'exhaustive' or 'local', got {self.mode!r}")
        if not self.wall_clock_budget > 0:
            raise InvalidParameterError("wall_clock_budget must be positive")
        if self.worker_count < 1:
            raise InvalidParameterError("worker_count must be >= 1")
        if self.restarts < 1:
            raise InvalidParameterError("restarts must be >= 1")
        if self.cardinality_bounds is not None:
            lo, hi = self.cardinality_bounds
            if not 0 <= lo <= hi:
                raise InvalidParameterError("cardinality_bounds must satisfy 0 <= lo <= hi")
            self.cardinality_bounds = (int(lo), int(hi))

    def bounds_for(self, p: int) -> tuple:
        if self.cardinality_bounds is None:
            return 0, p
        lo, hi = self.cardinality_bounds
        if hi > p:
            raise InvalidParameterError(f"cardinality upper bound {hi} exceeds p={p}")
        return lo, hi


@dataclass
class SearchResult:
    best_mask: FeatureMask
    best_objective: float
    best_evaluation: CvEvaluation
    masks_evaluated: int
    incumbent_trace: list = field(default_factory=list)
    completed: bool = True
    elapsed: float = 0.0
    refactorizations: int = 0

    def trace_rows(self):
        return [(t, obj, mask) for t, obj, mask in self.incumbent_trace]


@dataclass
class GammaSelection:
    grid: list
    per_gamma_mean_objective: list
    chosen_gamma: float
    results: dict = field(default_factory=dict, repr=False)
    per_seed_gamma: Optional[list] = None

    def chosen_results(self) -> list:
        return self.results[self.chosen_gamma]


def _tie_tol(best: float, rtol: float) -> float:
    return rtol * max(1.0, abs(best))


def pick_best(candidates, rtol: float = 1e-10):
    """(objective, mask) with the minimum objective under the tie rule."""
    candidates = list(candidates)
    if not candidates:
        return None
    best = min(obj for obj, _ in candidates)
    tol = _tie_tol(best, rtol)
    tied = [(obj, mask) for obj, mask in candidates if obj <= best + tol]
    return min(tied, key=lambda c: c[1].sort_key())


class _FoldArrays:
    """Per-fold systems and validation sets packed for the compiled walk."""

    def __init__(self, features, labels, folds: FoldPartition, gamma: float):
        self.p = features.shape[1]
        grams = fold_grams(features, labels, folds)
        K = folds.K
        P = self.p + 1
        sizes = folds.sizes()
        self.A = np.empty((K, P, P))
        self.rhs = np.empty((K, P))
        self.Xv = np.zeros((K, max(1, sizes.max()), P))
        self.yv = np.zeros((K, max(1, sizes.max())))
        self.nv = sizes.astype(np.int64)
        for k in range(K):
            self.A[k] = grams[k].augmented(gamma)
            self.rhs[k] = grams[k].rhs
            val = folds.validation_indices(k)
            self.Xv[k, : val.size, 0] = 1.0
            self.Xv[k, : val.size, 1:] = features[val]
            self.yv[k, : val.size] = labels[val]
        self.grams = grams

    def run_block(self, start: int, stop: int):
        hinge = np.empty(stop - start)
        sq = np.empty(stop - start)
        refactors, jittered = _kernels.gray_block(self.A, self.rhs, self.Xv, self.yv, self.nv,
                                                  self.p, start, stop, hinge, sq)
        if jittered < 0:
            raise NumericError("stationarity matrix is not positive definite")
        return hinge, sq, refactors


def _popcount_array(masks: np.ndarray) -> np.ndarray:
    counts = np.zeros(masks.shape, dtype=np.int64)
    m = masks.copy()
    while np.any(m):
        counts += m & 1
        m >>= 1
    return counts


def _validate(features, labels, folds, gamma):
    features = np.ascontiguousarray(features, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64).ravel()
    if features.ndim != 2 or features.shape[0] != labels.shape[0]:
        raise InvalidParameterError("features must be n x p with n matching labels")
    if folds.n != features.shape[0]:
        raise InvalidParameterError("fold partition does not match the number of samples")
    if not (np.isfinite(gamma) and gamma > 0):
        raise InvalidParameterError(f"gamma must be positive, got {gamma}")
    return features, labels


def exhaustive_search_multi(features, labels, folds: FoldPartition, gamma: float,
                            loss_kinds=(LossKind.HINGE, LossKind.SQUARED),
                            config: Optional[SearchConfig] = None) -> dict:
    """Exhaustive search for several loss kinds sharing one enumeration.

    The fold factorizations do not depend on the loss, so both criteria
    come out of a single walk.  Returns {LossKind: SearchResult}; every
    result reports the shared elapsed time.
    """
    config = config or SearchConfig()
    features, labels = _validate(features, labels, folds, gamma)
    loss_kinds = [LossKind.parse(k) for k in loss_kinds]
    p = features.shape[1]
    if p > MAX_EXHAUSTIVE_P:
        raise InvalidParameterError(
            f"exhaustive search is limited to p <= {MAX_EXHAUSTIVE_P} (got p={p}); "
            "use local search instead")
    lo, hi = config.bounds_for(p)
    t0 = time.perf_counter()
    arrays = _FoldArrays(features, labels, folds, gamma)

    total = 1 << p
    block = 1 << min(p, BLOCK_BITS)
    starts = list(range(0, total, block))

    state = {kind: {"cands": [], "best": np.inf, "trace": []} for kind in loss_kinds}
    evaluated = 0
    refactors = 0
    completed = True

    def consume(start, out):
        nonlocal evaluated, refactors
        hinge, sq, nref = out
        refactors += nref
        stop = start + hinge.size
        evaluated += hinge.size
        pos = np.arange(start, stop, dtype=np.int64)
        masks = pos ^ (pos >> 1)
        card = _popcount_array(masks)
        allowed = (card >= lo) & (card <= hi)
        if not np.any(allowed):
            return
        for kind in loss_kinds:
            values = hinge if kind is LossKind.HINGE else sq
            values = np.where(allowed, values, np.inf)
            bmin = float(values.min())
            near = np.flatnonzero(values <= bmin + _tie_tol(bmin, config.tie_rtol))
            cands = [(float(values[i]), FeatureMask.from_int(int(masks[i]), p)) for i in near]
            st = state[kind]
            st["cands"].extend(cands)
            if bmin < st["best"]:
                st["best"] = bmin
                if config.record_trace:
                    obj, mask = pick_best(cands, config.tie_rtol)
                    st["trace"].append((time.perf_counter() - t0, obj, mask.to_string()))

    deadline = t0 + config.wall_clock_budget
    if config.worker_count == 1:
        for start in starts:
            if time.perf_counter() > deadline:
                completed = False
                break
            consume(start, arrays.run_block(start, min(start + block, total)))
    else:
        with ThreadPoolExecutor(max_workers=config.worker_count) as pool:
            pending = deque()
            it = iter(starts)
            window = 2 * config.worker_count
            exhausted = False
            while True:
                while not exhausted and len(pending) < window:
                    if time.perf_counter() > deadline:
                        completed = False
                        exhausted = True
                        break
                    start = next(it, None)
                    if start is None:
                        exhausted = True
                        break
                    pending.append((start, pool.submit(arrays.run_block, start,
                                                       min(start + block, total))))
                if not pending:
                    break
                start, fut = pending.popleft()
                consume(start, fut.result())

    elapsed = time.perf_counter() - t0
    if not completed:
        logger.warning("exhaustive search stopped after %d of %d masks (budget %.1fs)",
                       evaluated, total, config.wall_clock_budget)
    results = {}
    for kind in loss_kinds:
        st = state[kind]
        picked = pick_best(st["cands"], config.tie_rtol)
        if picked is None:
            raise SearchError("no mask satisfies the cardinality bounds within the budget")
        obj, mask = picked
        evaluation = cv_objective(features, labels, folds, mask, gamma, kind, grams=arrays.grams)
        results[kind] = SearchResult(mask, obj, evaluation, evaluated, st["trace"],
                                     completed, elapsed, refactors)
    return results


def exhaustive_search(features, labels, folds: FoldPartition, gamma: float,
                      loss_kind=LossKind.HINGE, config: Optional[SearchConfig] = None) -> SearchResult:
    """Global minimizer of the CV criterion over all masks (p <= 30).

    Parameters
    ----------
    features, labels : training split
    folds : FoldPartition over the training split
    gamma : float
    loss_kind : LossKind or {"hinge", "squared"}
    config : SearchConfig, optional

    Returns
    -------
    SearchResult
        ``completed`` is False when the wall-clock budget ran out; the
        best mask seen so far is still returned.
    """
    kind = LossKind.parse(loss_kind)
    return exhaustive_search_multi(features, labels, folds, gamma, (kind,), config)[kind]


def _random_start(rng, p, lo, hi):
    size = int(rng.integers(lo, hi + 1))
    return FeatureMask.from_support(np.sort(rng.choice(p, size=size, replace=False)), p)


def local_search(features, labels, folds: FoldPartition, gamma: float,
                 loss_kind=LossKind.HINGE, config: Optional[SearchConfig] = None,
                 restarts: Optional[int] = None, initial_masks: Sequence = ()) -> SearchResult:
    """Multi-start steepest descent over 1-flip and 1-swap moves.

    Restart r starts from ``initial_masks[r]`` when given, otherwise from
    a random mask drawn from a generator seeded by (config.seed, r), so
    a run with more restarts visits a superset of the starts of a run with
    fewer.  ``completed`` reports whether every restart reached a local
    optimum within the budget.
    """
    config = config or SearchConfig(mode="local")
    features, labels = _validate(features, labels, folds, gamma)
    kind = LossKind.parse(loss_kind)
    restarts = config.restarts if restarts is None else int(restarts)
    if restarts < 1:
        raise InvalidParameterError("restarts must be >= 1")
    p = features.shape[1]
    lo, hi = config.bounds_for(p)
    grams = fold_grams(features, labels, folds)
    t0 = time.perf_counter()
    deadline = t0 + config.wall_clock_budget
    memo = {}

    def value(mask):
        if mask not in memo:
            memo[mask] = cv_objective(features, labels, folds, mask, gamma, kind,
                                      grams=grams).objective
        return memo[mask]

    def neighbours(mask):
        bits = mask.bits
        card = mask.cardinality
        out = []
        for j in range(p):
            if lo <= card + (-1 if bits[j] else 1) <= hi:
                out.append(mask.flip(j))
        on = np.flatnonzero(bits)
        off = np.flatnonzero(~bits)
        for i in on:
            for j in off:
                out.append(mask.flip(i).flip(j))
        return out

    best = None
    trace = []
    completed = True
    for r in range(restarts):
        if r < len(initial_masks):
            current = initial_masks[r]
            if not isinstance(current, FeatureMask):
                current = FeatureMask(current)
        else:
            current = _random_start(np.random.Generator(np.random.PCG64([config.seed, r])), p, lo, hi)
        current_val = value(current)
        while True:
            if time.perf_counter() > deadline:
                completed = False
                break
            cands = [(value(m), m) for m in neighbours(current)]
            if not cands:
                break
            nb_val, nb = pick_best(cands, config.tie_rtol)
            if nb_val < current_val - _tie_tol(current_val, config.tie_rtol):
                current, current_val = nb, nb_val
            else:
                break
        if best is None:
            best = (current_val, current)
        else:
            best = pick_best([best, (current_val, current)], config.tie_rtol)
        if config.record_trace and (not trace or best[0] < trace[-1][1]):
            trace.append((time.perf_counter() - t0, best[0], best[1].to_string()))
        if not completed:
            break
    obj, mask = best
    evaluation = cv_objective(features, labels, folds, mask, gamma, kind, grams=grams)
    return SearchResult(mask, obj, evaluation, len(memo), trace, completed,
                        time.perf_counter() - t0)


def run_search(features, labels, folds, gamma, loss_kind, config: Optional[SearchConfig] = None):
    config = config or SearchConfig()
    if config.mode == "local":
        return local_search(features, labels, folds, gamma, loss_kind, config)
    return exhaustive_search(features, labels, folds, gamma, loss_kind, config)


def select_gamma(datasets: Sequence, folds: Sequence[FoldPartition], grid: Sequence[float],
                 loss_kind=LossKind.HINGE, config: Optional[SearchConfig] = None,
                 per_seed: bool = False, results: Optional[dict] = None) -> GammaSelection:
    """Pick gamma from ``grid`` by the mean best CV objective over datasets.

    ``datasets`` holds (features, labels) pairs (or Dataset objects) for
    each seed, ``folds`` the matching partitions.  Ties go to the smaller
    gamma.  With ``per_seed`` each dataset's own argmin is also recorded.
    ``results`` may supply precomputed {gamma: [SearchResult, ...]}.
    """
    grid = [float(g) for g in grid]
    if not grid:
        raise InvalidParameterError("gamma grid is empty")
    if not datasets:
        raise InvalidParameterError("need at least one dataset")
    if len(folds) != len(datasets):
        raise InvalidParameterError("one fold partition per dataset is required")
    kind = LossKind.parse(loss_kind)
    results = dict(results or {})
    for gamma in grid:
        if gamma in results:
            continue
        per = []
        for data, fp in zip(datasets, folds):
            X, y = (data.features, data.labels) if hasattr(data, "features") else data
            try:
                per.append(run_search(X, y, fp, gamma, kind, config))
            except Exception as exc:
                partial = GammaSelection(grid, [], float("nan"), results)
                raise SearchError(f"search failed at gamma={gamma}: {exc}", partial) from exc
        results[gamma] = per
    means = [float(np.mean([r.best_objective for r in results[g]])) for g in grid]
    order = sorted(range(len(grid)), key=lambda i: (means[i], grid[i]))
    chosen = grid[order[0]]
    per_seed_gamma = None
    if per_seed:
        per_seed_gamma = []
        for s in range(len(datasets)):
            vals = [(results[g][s].best_objective, g) for g in grid]
            per_seed_gamma.append(min(vals)[1])
    return GammaSelection(grid, means, chosen, results, per_seed_gamma)


def write_trace_csv(result: SearchResult, path) -> None:
    with open(path, "w") as fh:
        fh.write("elapsed_s,objective,mask_bits\n")
        for t, obj, mask in result.incumbent_trace:
            fh.write(f"{t:.6f},{obj:.17g},{mask}\n")
