"""Synthetic classification instances and K-fold partitions.

Feature vectors are drawn from N(0, Sigma) with Sigma_jj' = rho^|j-j'|,
continuous responses t = w*'x + eps are thresholded at zero to give
labels in {-1, +1}, and the noise variance is set from a target
signal-to-noise ratio.  All randomness flows through a PCG64 generator
seeded explicitly, so datasets are bit-reproducible across platforms.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .exceptions import InvalidParameterError, NumericError

DEFAULT_RHO = 0.35


def _rng(seed) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


@dataclass
class Dataset:
    """Feature matrix, +/-1 labels and (for synthetic data) the true coefficients."""

    features: np.ndarray
    labels: np.ndarray
    true_coefficients: Optional[np.ndarray] = None
    seed: Optional[int] = None
    snr: Optional[float] = None

    def __post_init__(self):
        self.features = np.ascontiguousarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.float64).ravel()
        if self.features.ndim != 2:
            raise InvalidParameterError("features must be a 2-d array")
        if self.labels.shape[0] != self.features.shape[0]:
            raise InvalidParameterError("features and labels disagree on n")
        if not np.all(np.isin(self.labels, (-1.0, 1.0))):
            raise InvalidParameterError("labels must be exactly -1 or +1")
        if not np.all(np.isfinite(self.features)):
            raise NumericError("features contain non-finite entries")
        if self.true_coefficients is not None:
            self.true_coefficients = np.asarray(self.true_coefficients, dtype=np.float64)
            if self.true_coefficients.shape != (self.p,):
                raise InvalidParameterError("true_coefficients must have length p")

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def p(self) -> int:
        return self.features.shape[1]

    @property
    def true_support(self) -> Optional[np.ndarray]:
        if self.true_coefficients is None:
            return None
        return self.true_coefficients != 0

    def subset(self, rows) -> "Dataset":
        return Dataset(self.features[rows], self.labels[rows],
                       self.true_coefficients, self.seed, self.snr)

    def split(self, n_train: int) -> tuple["Dataset", "Dataset"]:
        """First ``n_train`` rows for training, the rest for testing."""
        if not 1 <= n_train < self.n:
            raise InvalidParameterError(f"n_train must be in [1, {self.n - 1}]")
        return self.subset(slice(0, n_train)), self.subset(slice(n_train, None))

    # -- serialization -------------------------------------------------

    def to_csv(self, path, sidecar: bool = True) -> None:
        """Write ``y,x1,...,xp`` rows with 17 significant digits (exact round trip)."""
        path = Path(path)
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["y"] + [f"x{j + 1}" for j in range(self.p)])
            for yi, row in zip(self.labels, self.features):
                writer.writerow([f"{int(yi):d}"] + [f"{v:.17g}" for v in row])
        if sidecar:
            meta = {
                "p": self.p,
                "n": self.n,
                "snr": self.snr,
                "seed": self.seed,
                "w_star": None if self.true_coefficients is None
                else [float(v) for v in self.true_coefficients],
            }
            path.with_suffix(".json").write_text(json.dumps(meta, indent=2) + "\n")

    @classmethod
    def from_csv(cls, path) -> "Dataset":
        path = Path(path)
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2, dtype=np.float64)
        meta_path = path.with_suffix(".json")
        w_star = seed = snr = None
        if meta_path.exists():
            meta = json.loads(meta_path.read_text())
            w_star = meta.get("w_star")
            seed = meta.get("seed")
            snr = meta.get("snr")
        return cls(data[:, 1:], data[:, 0], w_star, seed, snr)


@dataclass(frozen=True)
class FoldPartition:
    """Disjoint K-way split of ``range(n)``; fold k is validation, the rest training."""

    K: int
    fold_of_sample: np.ndarray = field(repr=False)

    @property
    def n(self) -> int:
        return self.fold_of_sample.shape[0]

    def validation_indices(self, k: int) -> np.ndarray:
        return np.flatnonzero(self.fold_of_sample == k)

    def train_indices(self, k: int) -> np.ndarray:
        return np.flatnonzero(self.fold_of_sample != k)

    def sizes(self) -> np.ndarray:
        return np.bincount(self.fold_of_sample, minlength=self.K)

    def relabel(self, permutation) -> "FoldPartition":
        """Rename fold ``k`` to ``permutation[k]``."""
        permutation = np.asarray(permutation)
        return FoldPartition(self.K, permutation[self.fold_of_sample])


def make_true_coefficients(p: int) -> np.ndarray:
    """Alternating ``(1, 0, 1, 0, ...)`` of length ``p``."""
    if p < 1:
        raise InvalidParameterError(f"p must be >= 1, got {p}")
    w = np.zeros(p)
    w[::2] = 1.0
    return w


def make_covariance(p: int, rho: float = DEFAULT_RHO) -> np.ndarray:
    if p < 1:
        raise InvalidParameterError(f"p must be >= 1, got {p}")
    if not abs(rho) < 1:
        raise InvalidParameterError(f"|rho| must be < 1, got {rho}")
    lags = np.abs(np.subtract.outer(np.arange(p), np.arange(p)))
    return np.power(float(rho), lags)


def noise_variance(w_star, sigma_matrix, snr: float) -> float:
    """Noise variance giving ``snr = w*' Sigma w* / sigma^2``."""
    if not snr > 0:
        raise InvalidParameterError(f"snr must be positive, got {snr}")
    w_star = np.asarray(w_star, dtype=np.float64)
    sigma_matrix = np.asarray(sigma_matrix, dtype=np.float64)
    if sigma_matrix.shape != (w_star.size, w_star.size):
        raise InvalidParameterError("covariance and coefficient dimensions disagree")
    return float(w_star @ sigma_matrix @ w_star) / snr


def generate_dataset(p: int, n_total: int, snr: float, seed: int,
                     rho: float = DEFAULT_RHO) -> Dataset:
    """Draw ``n_total`` labelled samples.

    Parameters
    ----------
    p : int
        Number of candidate features.
    n_total : int
        Number of samples (training and test pool together).
    snr : float
        Target ratio Var(w*'x) / Var(eps).
    seed : int
        Seed of the PCG64 stream; the same arguments always give the
        same dataset.
    rho : float
        Correlation decay base of the feature covariance.

    Returns
    -------
    Dataset
    """
    if n_total < 1:
        raise InvalidParameterError(f"n_total must be >= 1, got {n_total}")
    w_star = make_true_coefficients(p)
    sigma = make_covariance(p, rho)
    var = noise_variance(w_star, sigma, snr)
    try:
        chol = np.linalg.cholesky(sigma)
    except np.linalg.LinAlgError as exc:
        raise NumericError("feature covariance is not positive definite") from exc

    rng = _rng(seed)
    z = rng.standard_normal((n_total, p))
    eps = rng.standard_normal(n_total) * np.sqrt(var)
    x = z @ chol.T
    t = x @ w_star + eps
    y = np.where(t >= 0, 1.0, -1.0)
    return Dataset(x, y, w_star, seed, float(snr))


def partition_folds(n: int, K: int, seed: int) -> FoldPartition:
    """Shuffle ``range(n)`` and deal it round-robin into ``K`` folds."""
    if not 1 <= K <= n:
        raise InvalidParameterError(f"need 1 <= K <= n, got K={K}, n={n}")
    perm = _rng(seed).permutation(n)
    fold_of_sample = np.empty(n, dtype=np.int64)
    fold_of_sample[perm] = np.arange(n) % K
    return FoldPartition(K, fold_of_sample)
