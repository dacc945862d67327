"""Comparison methods: L1-regularized SVM and SVM-RFE.

Both use the squared hinge max(0, 1 - y f)^2 as the data term.  The L1
model is fitted by accelerated proximal gradient with soft-thresholding
(so unselected weights are exact zeros); the L2 model inside RFE is
fitted by a generalized Newton method.  The bias is never penalized.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .cv import predict_labels
from .datagen import FoldPartition, partition_folds
from .exceptions import InvalidParameterError, NumericError
from .lssvm import FeatureMask

L1_C_GRID = (0.001, 0.01, 0.1, 1.0, 10.0, 100.0, 1000.0)


@dataclass(frozen=True)
class L1SvmModel:
    weights: np.ndarray
    bias: float
    C: float
    converged: bool = True
    n_iter: int = 0
    objective_history: tuple = field(default=(), repr=False)

    @property
    def mask(self) -> FeatureMask:
        return FeatureMask(self.weights != 0)

    def to_dict(self) -> dict:
        return {
            "method": "l1_svm",
            "C": self.C,
            "mask": self.mask.to_string(),
            "weights": [float(v) for v in self.weights],
            "bias": float(self.bias),
            "converged": self.converged,
        }


@dataclass(frozen=True)
class LinearModel:
    """Weights over all p features (zero outside ``mask``) and a bias."""

    weights: np.ndarray
    bias: float
    mask: FeatureMask


@dataclass(frozen=True)
class RfeResult:
    ranking: np.ndarray
    chosen_mask: FeatureMask
    inner_cv_accuracy_by_size: np.ndarray
    C: float
    model: LinearModel = field(repr=False, default=None)

    def to_dict(self) -> dict:
        return {
            "method": "svm_rfe",
            "C": self.C,
            "ranking": [int(j) for j in self.ranking],
            "mask": self.chosen_mask.to_string(),
            "inner_cv_accuracy_by_size": [float(a) for a in self.inner_cv_accuracy_by_size],
            "weights": [float(v) for v in self.model.weights],
            "bias": float(self.model.bias),
        }


def soft_threshold(v, t):
    """Proximal operator of t * |.|, elementwise."""
    v = np.asarray(v, dtype=np.float64)
    return np.sign(v) * np.maximum(np.abs(v) - t, 0.0)


def _sq_hinge_parts(Xa, y, theta, C):
    h = np.maximum(0.0, 1.0 - y * (Xa @ theta))
    loss = C * float(h @ h)
    grad = -2.0 * C * (Xa.T @ (h * y))
    return loss, grad


def _augment(features):
    features = np.asarray(features, dtype=np.float64)
    return np.hstack([features, np.ones((features.shape[0], 1))])


def l1_svm_objective(weights, bias, features, labels, C):
    h = np.maximum(0.0, 1.0 - labels * (features @ weights + bias))
    return float(np.abs(weights).sum() + C * (h @ h))


def train_l1_svm(features, labels, C: float, tol: float = 1e-6, max_iter: int = 50000) -> L1SvmModel:
    """||w||_1 + C * sum max(0, 1 - y (w'x + b))^2 by accelerated proximal gradient.

    Momentum is reset whenever it would raise the objective, so the
    recorded objective sequence never increases.  Stops when the
    proximal-gradient mapping (the KKT residual of the composite problem)
    is below ``tol`` in max norm; hitting ``max_iter`` returns the last
    iterate with ``converged=False``.
    """
    if not C > 0:
        raise InvalidParameterError(f"C must be positive, got {C}")
    labels = np.asarray(labels, dtype=np.float64)
    Xa = _augment(features)
    if not np.all(np.isfinite(Xa)):
        raise NumericError("non-finite features")
    p = Xa.shape[1] - 1
    lip = 2.0 * C * max(np.linalg.eigvalsh(Xa.T @ Xa)[-1], 1e-12)
    step = 1.0 / lip

    def prox(v):
        out = v.copy()
        out[:p] = soft_threshold(v[:p], step)
        return out

    def total(theta):
        loss, grad = _sq_hinge_parts(Xa, labels, theta, C)
        return loss + float(np.abs(theta[:p]).sum()), grad

    theta = np.zeros(p + 1)
    f_cur, g_cur = total(theta)
    history = [f_cur]
    z = theta.copy()
    t = 1.0
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        if np.max(np.abs(theta - prox(theta - step * g_cur))) <= tol * step:
            converged = True
            break
        _, g = _sq_hinge_parts(Xa, labels, z, C)
        cand = prox(z - step * g)
        f_cand, g_cand = total(cand)
        if f_cand > f_cur:
            # momentum overshot: plain proximal step from the current point
            cand = prox(theta - step * g_cur)
            f_cand, g_cand = total(cand)
            t = 1.0
            z = cand.copy()
        else:
            t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
            z = cand + ((t - 1.0) / t_next) * (cand - theta)
            t = t_next
        theta, f_cur, g_cur = cand, min(f_cand, f_cur), g_cand
        history.append(f_cur)
    return L1SvmModel(theta[:p].copy(), float(theta[p]), float(C), converged, it, tuple(history))


def train_l2_svm(features, labels, C: float, tol: float = 1e-10, max_iter: int = 100) -> LinearModel:
    """0.5 ||w||^2 + C * sum max(0, 1 - y (w'x + b))^2 by generalized Newton."""
    if not C > 0:
        raise InvalidParameterError(f"C must be positive, got {C}")
    labels = np.asarray(labels, dtype=np.float64)
    Xa = _augment(features)
    p = Xa.shape[1] - 1
    reg = np.ones(p + 1)
    reg[p] = 0.0

    def fun(theta):
        loss, grad = _sq_hinge_parts(Xa, labels, theta, C)
        w = theta * reg
        return 0.5 * float(w @ w) + loss, grad + w

    theta = np.zeros(p + 1)
    f, g = fun(theta)
    for _ in range(max_iter):
        if np.max(np.abs(g)) <= tol * max(1.0, abs(f)):
            break
        active = (labels * (Xa @ theta)) < 1.0
        Xs = Xa[active]
        H = np.diag(reg + 1e-12) + 2.0 * C * (Xs.T @ Xs)
        direction = -np.linalg.solve(H, g)
        slope = float(g @ direction)
        step = 1.0
        while step > 1e-12:
            f_new, g_new = fun(theta + step * direction)
            if f_new <= f + 1e-4 * step * slope:
                break
            step *= 0.5
        else:
            break
        theta = theta + step * direction
        f, g = f_new, g_new
    weights = theta[:p].copy()
    return LinearModel(weights, float(theta[p]), FeatureMask.full(p))


def _accuracy(model, features, labels):
    return float(np.mean(predict_labels(model, features) == labels))


def cv_accuracy(features, labels, C: float, folds: FoldPartition, trainer=None) -> float:
    """Mean validation accuracy over the folds (f = 0 counts as +1)."""
    trainer = trainer or train_l1_svm
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)
    accs = []
    for k in range(folds.K):
        tr, va = folds.train_indices(k), folds.validation_indices(k)
        model = trainer(features[tr], labels[tr], C)
        accs.append(_accuracy(model, features[va], labels[va]))
    return float(np.mean(accs))


def argmax_smallest(grid: Sequence[float], scores: Sequence[float]) -> float:
    """Grid value with the highest score; ties go to the smallest value."""
    best = max(scores)
    return min(g for g, s in zip(grid, scores) if s == best)


def tune_l1_svm(features, labels, grid=L1_C_GRID, K: int = 5, seed: int = 0):
    """Choose C by K-fold accuracy, then refit on all of ``features``.

    Returns
    -------
    (C_star, L1SvmModel)
    """
    grid = [float(c) for c in grid]
    if not grid:
        raise InvalidParameterError("C grid is empty")
    folds = partition_folds(len(labels), K, seed)
    scores = [cv_accuracy(features, labels, C, folds) for C in grid]
    C_star = argmax_smallest(grid, scores)
    return C_star, train_l1_svm(features, labels, C_star)


def _elimination_order(features, labels, C):
    remaining = list(range(features.shape[1]))
    order = []
    while len(remaining) > 1:
        w = train_l2_svm(features[:, remaining], labels, C).weights
        drop = int(np.argmin(w * w))
        order.append(remaining.pop(drop))
    order.extend(remaining)
    return order


def _fit_on(features, labels, keep, C):
    p = features.shape[1]
    sub = train_l2_svm(features[:, keep], labels, C)
    weights = np.zeros(p)
    weights[keep] = sub.weights
    return LinearModel(weights, sub.bias, FeatureMask.from_support(sorted(keep), p))


def svm_rfe(features, labels, K: int = 5, seed: int = 0, C: float = 1.0) -> RfeResult:
    """Recursive feature elimination with an L2 squared-hinge linear SVM.

    One feature (smallest w_j^2) is dropped per round.  The subset size is
    the one with the best mean K-fold accuracy, where each fold ranks
    features on its own training part; ties go to the smaller size.  The
    returned ranking is the elimination order on all samples, first
    eliminated first.
    """
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)
    n, p = features.shape
    if p < 1:
        raise InvalidParameterError("need at least one feature")
    folds = partition_folds(n, K, seed)
    acc = np.zeros((folds.K, p))
    for k in range(folds.K):
        tr, va = folds.train_indices(k), folds.validation_indices(k)
        order = _elimination_order(features[tr], labels[tr], C)
        for size in range(1, p + 1):
            model = _fit_on(features[tr], labels[tr], order[p - size:], C)
            acc[k, size - 1] = _accuracy(model, features[va], labels[va])
    by_size = acc.mean(axis=0)
    size = int(np.argmax(by_size)) + 1
    ranking = np.array(_elimination_order(features, labels, C), dtype=np.int64)
    keep = sorted(int(j) for j in ranking[p - size:])
    model = _fit_on(features, labels, keep, C)
    return RfeResult(ranking, FeatureMask.from_support(keep, p), by_size, float(C), model)
