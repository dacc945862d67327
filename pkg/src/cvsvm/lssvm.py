"""Closed-form LS-SVM training restricted to a feature subset.

For a subset S the LS-SVM objective

    0.5 * ||w_S||^2 + gamma / 2 * sum_i (1 - y_i (w_S' x_iS + b))^2

is strongly convex in (w_S, b), and its unique minimizer solves the SPD
system

    [ m        1'X_S            ] [ b   ]   [ 1'y    ]
    [ X_S'1    X_S'X_S + I/gamma] [ w_S ] = [ X_S'y  ]

(the stationarity conditions divided by gamma).  ``FoldGram`` caches the
cross-products once per training set so any subset is a gather away, and
``SubsetFactorization`` keeps a Cholesky factor that follows single
feature additions and removals in O(|S|^2).
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import _kernels
from .exceptions import ContractViolation, InvalidParameterError, NumericError

logger = logging.getLogger(__name__)

PIVOT_TOL = _kernels.PIVOT_TOL
JITTER = _kernels.JITTER


class FeatureMask:
    """Binary selection vector z over p features.

    Masks compare equal when their bits agree, hash by their bits, and
    order by ``sort_key`` (smaller cardinality first, then the
    lexicographically smallest bit string z_1 z_2 ... z_p).
    """

    __slots__ = ("_bits",)

    def __init__(self, bits):
        bits = np.array(bits, dtype=bool).ravel()
        bits.setflags(write=False)
        self._bits = bits

    @classmethod
    def from_support(cls, support, p: int) -> "FeatureMask":
        bits = np.zeros(p, dtype=bool)
        support = np.asarray(support, dtype=np.int64)
        if support.size and (support.min() < 0 or support.max() >= p):
            raise InvalidParameterError("support index out of range")
        bits[support] = True
        return cls(bits)

    @classmethod
    def from_int(cls, value: int, p: int) -> "FeatureMask":
        """Bit j of ``value`` selects feature j (0-based)."""
        return cls([(int(value) >> j) & 1 for j in range(p)])

    @classmethod
    def from_string(cls, text: str) -> "FeatureMask":
        if set(text) - {"0", "1"}:
            raise InvalidParameterError(f"mask string must be 0/1, got {text!r}")
        return cls([c == "1" for c in text])

    @classmethod
    def full(cls, p: int) -> "FeatureMask":
        return cls(np.ones(p, dtype=bool))

    @classmethod
    def empty(cls, p: int) -> "FeatureMask":
        return cls(np.zeros(p, dtype=bool))

    @property
    def bits(self) -> np.ndarray:
        return self._bits

    @property
    def p(self) -> int:
        return self._bits.size

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(self._bits)

    @property
    def cardinality(self) -> int:
        return int(self._bits.sum())

    def to_int(self) -> int:
        return sum(1 << int(j) for j in self.support)

    def to_string(self) -> str:
        return "".join("1" if b else "0" for b in self._bits)

    def flip(self, j: int) -> "FeatureMask":
        bits = self._bits.copy()
        bits[j] = not bits[j]
        return FeatureMask(bits)

    def sort_key(self):
        return (self.cardinality, self.to_string())

    def __len__(self):
        return self.p

    def __eq__(self, other):
        if not isinstance(other, FeatureMask):
            return NotImplemented
        return np.array_equal(self._bits, other._bits)

    def __hash__(self):
        return hash(self._bits.tobytes())

    def __repr__(self):
        return f"FeatureMask('{self.to_string()}')"


def as_mask(mask, p: int) -> FeatureMask:
    if isinstance(mask, FeatureMask):
        if mask.p != p:
            raise InvalidParameterError(f"mask has length {mask.p}, data has p={p}")
        return mask
    if isinstance(mask, str):
        return as_mask(FeatureMask.from_string(mask), p)
    return as_mask(FeatureMask(mask), p)


@dataclass(frozen=True)
class FoldModel:
    """Linear classifier trained on one fold; ``weights`` is zero off the mask."""

    weights: np.ndarray
    bias: float
    mask: FeatureMask
    gamma: float
    fold_id: int = 0
    jittered: bool = False

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        if w.shape != (self.mask.p,):
            raise ContractViolation("weights and mask disagree on p")
        if np.any(w[~self.mask.bits] != 0.0):
            raise ContractViolation("nonzero weight outside the mask")
        if not (np.all(np.isfinite(w)) and np.isfinite(self.bias)):
            raise NumericError("fold model has non-finite parameters")
        object.__setattr__(self, "weights", w)


def _check_gamma(gamma):
    if not (np.isfinite(gamma) and gamma > 0):
        raise InvalidParameterError(f"gamma must be a positive finite number, got {gamma}")


def _check_xy(features, labels):
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64).ravel()
    if features.ndim != 2 or features.shape[0] != labels.shape[0]:
        raise InvalidParameterError("features must be m x p with m matching labels")
    if features.shape[0] < 1:
        raise InvalidParameterError("need at least one training sample")
    if not (np.all(np.isfinite(features)) and np.all(np.isfinite(labels))):
        raise NumericError("training data contain non-finite entries")
    return features, labels


class FoldGram:
    """Cross-products of one training set over augmented indices [bias, x_1..x_p].

    ``gram`` holds [[m, 1'X], [X'1, X'X]] and ``rhs`` holds [1'y, X'y];
    the ridge term I/gamma is added when a subset system is assembled.
    """

    def __init__(self, features, labels):
        features, labels = _check_xy(features, labels)
        m, p = features.shape
        aug = np.empty((m, p + 1))
        aug[:, 0] = 1.0
        aug[:, 1:] = features
        self.p = p
        self.m = m
        self.gram = aug.T @ aug
        self.rhs = aug.T @ labels

    def augmented(self, gamma: float) -> np.ndarray:
        A = self.gram.copy()
        diag = np.arange(1, self.p + 1)
        A[diag, diag] += 1.0 / gamma
        return A

    def system(self, mask: FeatureMask, gamma: float):
        """Gathered (|S|+1)x(|S|+1) matrix and right-hand side, bias first."""
        idx = np.concatenate(([0], mask.support + 1))
        A = self.gram[np.ix_(idx, idx)]
        A[np.arange(1, idx.size), np.arange(1, idx.size)] += 1.0 / gamma
        return A, self.rhs[idx]

    def solve(self, mask: FeatureMask, gamma: float, fold_id: int = 0) -> FoldModel:
        _check_gamma(gamma)
        mask = as_mask(mask, self.p)
        A, r = self.system(mask, gamma)
        theta, jittered = _spd_solve(A, r)
        weights = np.zeros(self.p)
        weights[mask.support] = theta[1:]
        return FoldModel(weights, float(theta[0]), mask, float(gamma), fold_id, jittered)


def _spd_solve(A, r):
    """Cholesky solve with a one-shot diagonal jitter when a pivot is tiny."""
    jittered = False
    try:
        L = scipy.linalg.cholesky(A, lower=True)
        ok = np.min(np.diag(L)) ** 2 > PIVOT_TOL
    except scipy.linalg.LinAlgError:
        ok = False
    if not ok:
        jittered = True
        msg = f"stationarity matrix near-singular; added {JITTER:g} to the diagonal"
        warnings.warn(msg, RuntimeWarning, stacklevel=3)
        logger.warning(msg)
        try:
            L = scipy.linalg.cholesky(A + JITTER * np.eye(A.shape[0]), lower=True)
        except scipy.linalg.LinAlgError as exc:
            raise NumericError("stationarity matrix is not positive definite") from exc
    return scipy.linalg.cho_solve((L, True), r), jittered


def train_lssvm(train_features, train_labels, mask, gamma: float, fold_id: int = 0) -> FoldModel:
    """Unique LS-SVM minimizer with weights outside ``mask`` fixed to zero.

    Parameters
    ----------
    train_features : array of shape (m, p)
    train_labels : array of shape (m,), entries in {-1, +1}
    mask : FeatureMask, 0/1 string or boolean array of length p
    gamma : float
        Positive weight on the squared residuals.

    Returns
    -------
    FoldModel
    """
    _check_gamma(gamma)
    return FoldGram(train_features, train_labels).solve(mask, gamma, fold_id)


def lssvm_objective(weights, bias, features, labels, gamma):
    """0.5 ||w||^2 + gamma/2 sum (1 - y (w'x + b))^2."""
    weights = np.asarray(weights, dtype=np.float64)
    resid = 1.0 - np.asarray(labels) * (np.asarray(features) @ weights + bias)
    return 0.5 * float(weights @ weights) + 0.5 * gamma * float(resid @ resid)


def stationarity_residual(model: FoldModel, train_features, train_labels, gamma: float) -> float:
    """Largest violation of the restricted first-order conditions.

    Returns the max of |w_j - gamma * sum_i r_i x_ij| over selected j and
    |gamma * sum_i r_i|, where r_i = y_i - w'x_i - b.  Zero exactly at the
    restricted LS-SVM optimum.
    """
    features, labels = _check_xy(train_features, train_labels)
    w = np.asarray(model.weights, dtype=np.float64)
    if not np.all(np.isfinite(w)) or not np.isfinite(model.bias):
        raise NumericError("model has non-finite parameters")
    r = labels - features @ w - model.bias
    support = model.mask.support
    parts = [abs(gamma * r.sum())]
    if support.size:
        parts.append(np.max(np.abs(w[support] - gamma * (features[:, support].T @ r))))
    return float(max(parts))


class SubsetFactorization:
    """Cholesky factor of one fold's stationarity system that tracks a mask.

    Single-owner mutable state: ``update`` toggles one feature in place.
    When an insertion or deletion meets a pivot at or below 1e-12 the
    factor is rebuilt from scratch and ``refactorized`` is set.
    """

    def __init__(self, gram: FoldGram, gamma: float, mask=None):
        _check_gamma(gamma)
        self.gram = gram
        self.gamma = float(gamma)
        self.p = gram.p
        self._A = gram.augmented(gamma)
        self._L = np.zeros((self.p + 1, self.p + 1))
        self._idx = np.zeros(self.p + 1, dtype=np.int64)
        self._work = np.zeros(self.p + 1)
        self.mask = FeatureMask.empty(self.p) if mask is None else as_mask(mask, self.p)
        self.refactorized = False
        self.jittered = False
        self._rebuild()

    @classmethod
    def from_data(cls, features, labels, gamma, mask=None):
        return cls(FoldGram(features, labels), gamma, mask)

    @property
    def size(self) -> int:
        return self._n

    def _rebuild(self):
        n, status = _kernels.refactor(self._L, self._idx, self._A, self.mask.to_int(), self.p)
        if status < 0:
            raise NumericError("stationarity matrix is not positive definite")
        if status:
            self.jittered = True
            warnings.warn("stationarity matrix near-singular; jitter added", RuntimeWarning,
                          stacklevel=3)
        self._n = n

    def update(self, j: int) -> "SubsetFactorization":
        """Add feature ``j`` if absent, remove it if present."""
        if not 0 <= j < self.p:
            raise InvalidParameterError(f"feature index {j} out of range")
        self.mask = self.mask.flip(j)
        self.refactorized = False
        n, ok = _kernels.flip_feature(self._L, self._idx, self._n, self._A,
                                      self.mask.to_int(), j, self.p, self._work)
        if ok:
            self._n = n
        else:
            self.refactorized = True
            logger.debug("pivot below tolerance toggling feature %d; refactorizing", j)
            self._rebuild()
        return self

    def factor(self) -> np.ndarray:
        return np.tril(self._L[: self._n, : self._n])

    def order(self) -> np.ndarray:
        """Augmented indices of the factor rows (0 is the bias)."""
        return self._idx[: self._n].copy()

    def matrix(self) -> np.ndarray:
        idx = self.order()
        return self._A[np.ix_(idx, idx)]

    def reconstruction_error(self) -> float:
        """Relative Frobenius error of L L' against the stationarity matrix."""
        L = self.factor()
        A = self.matrix()
        return float(np.linalg.norm(L @ L.T - A) / np.linalg.norm(A))

    def solve(self, fold_id: int = 0) -> FoldModel:
        n = self._n
        theta = np.zeros(n)
        _kernels.solve_factored(self._L, self._idx, n, self.gram.rhs, np.zeros(n), theta)
        weights = np.zeros(self.p)
        weights[self._idx[1:n] - 1] = theta[1:]
        return FoldModel(weights, float(theta[0]), self.mask, self.gamma, fold_id, self.jittered)


def update_subset(fact: SubsetFactorization, index: int, expect_present=None) -> SubsetFactorization:
    """Toggle ``index`` in ``fact`` (in place) and return it.

    ``expect_present`` optionally asserts the feature's current state:
    True for a removal, False for an addition.
    """
    if expect_present is not None and bool(fact.mask.bits[index]) != bool(expect_present):
        state = "in" if fact.mask.bits[index] else "not in"
        raise InvalidParameterError(f"feature {index} is {state} the current support")
    return fact.update(index)
