"""Classification and feature-recovery metrics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from .exceptions import InvalidParameterError, UndefinedMetricError
from .lssvm import FeatureMask


@dataclass(frozen=True)
class FeatureRecovery:
    precision: float
    recall: float
    f1: float
    nonzeros: int


def auc(scores, labels) -> float:
    """ROC AUC as the Mann-Whitney statistic, ties credited 0.5.

    Uses average ranks, so the cost is one sort.
    """
    scores = np.asarray(scores, dtype=np.float64).ravel()
    labels = np.asarray(labels).ravel()
    if scores.shape != labels.shape:
        raise InvalidParameterError("scores and labels must have the same length")
    pos = labels == 1
    n_pos = int(pos.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError("AUC needs at least one positive and one negative label")
    ranks = rankdata(scores)
    u = ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def _bits(z):
    if isinstance(z, FeatureMask):
        return z.bits
    if isinstance(z, str):
        return FeatureMask.from_string(z).bits
    return np.asarray(z).astype(bool).ravel()


def true_mask(w_star) -> FeatureMask:
    return FeatureMask(np.asarray(w_star) != 0)


def feature_recovery(z_hat, z_star) -> FeatureRecovery:
    """Precision, recall and F1 of a selected mask against the true support.

    An empty selection has precision 0, an empty truth has recall 0, and
    F1 is 0 whenever precision + recall is 0.
    """
    zh, zs = _bits(z_hat), _bits(z_star)
    if zh.shape != zs.shape:
        raise InvalidParameterError("masks must have equal length")
    hits = int(np.sum(zh & zs))
    selected = int(zh.sum())
    relevant = int(zs.sum())
    precision = hits / selected if selected else 0.0
    recall = hits / relevant if relevant else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return FeatureRecovery(precision, recall, f1, selected)
