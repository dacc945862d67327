"""scikit-learn estimators wrapping the selection methods.

All three are binary classifiers and feature selectors: ``fit`` learns a
linear decision function and a support, ``predict`` thresholds the
decision value at zero (f = 0 goes to the second class in ``classes_``),
and ``transform`` keeps the selected columns.
"""

from __future__ import annotations

from numbers import Real

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.feature_selection import SelectorMixin
from sklearn.utils.multiclass import check_classification_targets
from sklearn.utils.validation import check_is_fitted, validate_data

from .baselines import svm_rfe, train_l1_svm
from .cv import average_fold_models
from .datagen import partition_folds
from .exceptions import InvalidParameterError
from .search import SearchConfig, run_search, select_gamma


class _LinearBinaryMixin:
    def _encode_labels(self, y):
        check_classification_targets(y)
        self.classes_ = np.unique(y)
        if self.classes_.size != 2:
            raise InvalidParameterError(
                f"binary classification only; got {self.classes_.size} classes")
        return np.where(y == self.classes_[1], 1.0, -1.0)

    def decision_function(self, X):
        check_is_fitted(self, "coef_")
        X = validate_data(self, X, reset=False)
        return X @ self.coef_ + self.intercept_

    def predict(self, X):
        return self.classes_[(self.decision_function(X) >= 0).astype(int)]

    def _get_support_mask(self):
        check_is_fitted(self, "support_")
        return self.support_


class CvSubsetSVC(_LinearBinaryMixin, ClassifierMixin, SelectorMixin, BaseEstimator):
    """Linear classifier on the feature subset that minimizes the K-fold CV criterion.

    Each fold trains an LS-SVM restricted to the candidate subset; the
    criterion is the summed hinge (``loss="hinge"``) or squared
    (``loss="squared"``) margin loss on the held-out folds.  The final
    model averages the K fold models of the best subset.

    Parameters
    ----------
    gamma : float or sequence of float
        LS-SVM loss weight.  A sequence is treated as a grid and the value
        with the smallest best CV criterion is used.
    loss : {"hinge", "squared"}
    n_folds : int
    fold_seed : int
        Seed of the shuffled round-robin fold assignment.
    search : {"exhaustive", "local"}
        Exhaustive search is exact and needs p <= 30.
    restarts : int
        Random restarts of the local search.
    time_budget : float
        Wall-clock seconds per search.
    n_jobs : int
        Threads used by the exhaustive search.
    cardinality_bounds : (int, int) or None
    random_state : int
        Seed for local-search restarts.

    Attributes
    ----------
    coef_ : ndarray of shape (n_features,)
    intercept_ : float
    support_ : ndarray of bool
    gamma_ : float
    search_result_ : SearchResult
    """

    def __init__(self, gamma=100.0, loss="hinge", n_folds=5, fold_seed=0, search="exhaustive",
                 restarts=10, time_budget=300.0, n_jobs=1, cardinality_bounds=None, random_state=0):
        self.gamma = gamma
        self.loss = loss
        self.n_folds = n_folds
        self.fold_seed = fold_seed
        self.search = search
        self.restarts = restarts
        self.time_budget = time_budget
        self.n_jobs = n_jobs
        self.cardinality_bounds = cardinality_bounds
        self.random_state = random_state

    def fit(self, X, y):
        X, y = validate_data(self, X, y, dtype=np.float64)
        y_pm = self._encode_labels(y)
        folds = partition_folds(X.shape[0], self.n_folds, self.fold_seed)
        config = SearchConfig(mode=self.search, wall_clock_budget=self.time_budget,
                              worker_count=self.n_jobs, cardinality_bounds=self.cardinality_bounds,
                              restarts=self.restarts, seed=self.random_state)
        if isinstance(self.gamma, Real):
            self.gamma_ = float(self.gamma)
            result = run_search(X, y_pm, folds, self.gamma_, self.loss, config)
        else:
            selection = select_gamma([(X, y_pm)], [folds], self.gamma, self.loss, config)
            self.gamma_ = selection.chosen_gamma
            self.gamma_selection_ = selection
            result = selection.chosen_results()[0]
        final = average_fold_models(result.best_evaluation)
        self.search_result_ = result
        self.folds_ = folds
        self.coef_ = final.weights
        self.intercept_ = final.bias
        self.support_ = final.mask.bits.copy()
        return self


class L1SVC(_LinearBinaryMixin, ClassifierMixin, SelectorMixin, BaseEstimator):
    """L1-penalized squared-hinge linear SVM; exact zeros define the support."""

    def __init__(self, C=1.0, tol=1e-6, max_iter=50000):
        self.C = C
        self.tol = tol
        self.max_iter = max_iter

    def fit(self, X, y):
        X, y = validate_data(self, X, y, dtype=np.float64)
        y_pm = self._encode_labels(y)
        model = train_l1_svm(X, y_pm, self.C, self.tol, self.max_iter)
        self.model_ = model
        self.coef_ = model.weights
        self.intercept_ = model.bias
        self.support_ = model.weights != 0
        self.converged_ = model.converged
        return self


class SVMRFE(_LinearBinaryMixin, ClassifierMixin, SelectorMixin, BaseEstimator):
    """Recursive feature elimination with CV-chosen subset size."""

    def __init__(self, C=1.0, n_folds=5, random_state=0):
        self.C = C
        self.n_folds = n_folds
        self.random_state = random_state

    def fit(self, X, y):
        X, y = validate_data(self, X, y, dtype=np.float64)
        y_pm = self._encode_labels(y)
        result = svm_rfe(X, y_pm, self.n_folds, self.random_state, self.C)
        self.result_ = result
        self.ranking_ = result.ranking
        self.coef_ = result.model.weights
        self.intercept_ = result.model.bias
        self.support_ = result.chosen_mask.bits.copy()
        return self
