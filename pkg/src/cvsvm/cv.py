"""Cross-validation criterion for a fixed feature mask.

Each fold trains the restricted LS-SVM on the complementary folds and
scores its own samples with either the hinge loss (the optimal slack sum
of the MILP form) or the squared margin residual (the MIQP form).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .datagen import FoldPartition
from .exceptions import ContractViolation, InvalidParameterError
from .lssvm import FeatureMask, FoldGram, FoldModel, as_mask


class LossKind(str, enum.Enum):
    HINGE = "hinge"
    SQUARED = "squared"

    @classmethod
    def parse(cls, value) -> "LossKind":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise InvalidParameterError(f"unknown loss kind {value!r}") from None


@dataclass(frozen=True)
class FinalModel:
    weights: np.ndarray
    bias: float
    mask: FeatureMask

    def to_dict(self) -> dict:
        return {
            "mask": self.mask.to_string(),
            "weights": [float(v) for v in self.weights],
            "bias": float(self.bias),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "FinalModel":
        mask = FeatureMask.from_string(data["mask"])
        return cls(np.asarray(data["weights"], dtype=np.float64), float(data["bias"]), mask)


@dataclass(frozen=True)
class CvEvaluation:
    mask: FeatureMask
    gamma: float
    loss_kind: LossKind
    fold_models: tuple
    fold_losses: np.ndarray
    objective: float
    per_sample_slack: Optional[np.ndarray] = field(default=None, repr=False)

    def to_dict(self) -> dict:
        out = {
            "mask": self.mask.to_string(),
            "gamma": self.gamma,
            "loss_kind": self.loss_kind.value,
            "objective": self.objective,
            "fold_losses": [float(v) for v in self.fold_losses],
            "fold_models": [
                {"fold_id": m.fold_id, "weights": [float(v) for v in m.weights], "bias": m.bias}
                for m in self.fold_models
            ],
        }
        if self.per_sample_slack is not None:
            out["per_sample_slack"] = [float(v) for v in self.per_sample_slack]
        return out


def decision_values(model, features) -> np.ndarray:
    """f(x) = w'x + b for every row."""
    return np.asarray(features, dtype=np.float64) @ model.weights + model.bias


def predict_labels(model, features) -> np.ndarray:
    """Sign of the decision value, with f(x) = 0 mapped to +1."""
    return np.where(decision_values(model, features) >= 0, 1.0, -1.0)


def _margins(model, features, labels):
    return np.asarray(labels, dtype=np.float64) * decision_values(model, features)


def hinge_validation_loss(model, val_features, val_labels) -> float:
    return float(np.maximum(0.0, 1.0 - _margins(model, val_features, val_labels)).sum())


def squared_validation_loss(model, val_features, val_labels) -> float:
    r = 1.0 - _margins(model, val_features, val_labels)
    return float(r @ r)


def _per_sample(loss_kind, model, features, labels):
    r = 1.0 - _margins(model, features, labels)
    if loss_kind is LossKind.HINGE:
        return np.maximum(0.0, r)
    return r * r


def fold_grams(features, labels, folds: FoldPartition) -> list:
    """One FoldGram per fold, built from that fold's training rows."""
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)
    if folds.n != features.shape[0]:
        raise InvalidParameterError("fold partition does not match the number of samples")
    return [FoldGram(features[folds.train_indices(k)], labels[folds.train_indices(k)])
            for k in range(folds.K)]


def cv_objective(features, labels, folds: FoldPartition, mask, gamma: float,
                 loss_kind=LossKind.HINGE, keep_slack: bool = False,
                 grams: Optional[Sequence[FoldGram]] = None) -> CvEvaluation:
    """Sum over folds of the validation loss of the fold-trained LS-SVM.

    ``grams`` may carry precomputed per-fold cross-products (see
    ``fold_grams``) so repeated evaluations skip the O(m p^2) setup.
    ``keep_slack`` retains the per-sample losses, indexed like ``labels``.
    """
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)
    loss_kind = LossKind.parse(loss_kind)
    mask = as_mask(mask, features.shape[1])
    if grams is None:
        grams = fold_grams(features, labels, folds)
    models = []
    losses = np.zeros(folds.K)
    slack = np.zeros(labels.shape[0]) if keep_slack else None
    for k in range(folds.K):
        model = grams[k].solve(mask, gamma, fold_id=k)
        val = folds.validation_indices(k)
        per = _per_sample(loss_kind, model, features[val], labels[val])
        losses[k] = per.sum()
        if keep_slack:
            slack[val] = per
        models.append(model)
    objective = 0.0
    for v in losses:
        objective += v
    return CvEvaluation(mask, float(gamma), loss_kind, tuple(models), losses, objective, slack)


def average_fold_models(evaluation) -> FinalModel:
    """Mean of the fold weight vectors and biases."""
    models = evaluation.fold_models if isinstance(evaluation, CvEvaluation) else tuple(evaluation)
    if not models:
        raise ContractViolation("no fold models to average")
    mask = models[0].mask
    if any(m.mask != mask for m in models):
        raise ContractViolation("fold models were trained on different masks")
    K = len(models)
    weights = np.sum([m.weights for m in models], axis=0) / K
    bias = sum(m.bias for m in models) / K
    weights[~mask.bits] = 0.0
    return FinalModel(weights, float(bias), mask)
