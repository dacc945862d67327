"""Best feature subset selection for linear SVMs by the cross-validation criterion."""

__version__ = "0.1.0"

from .cv import (
    CvEvaluation,
    FinalModel,
    LossKind,
    average_fold_models,
    cv_objective,
    decision_values,
    hinge_validation_loss,
    predict_labels,
    squared_validation_loss,
)
from .datagen import (
    Dataset,
    FoldPartition,
    generate_dataset,
    make_covariance,
    make_true_coefficients,
    noise_variance,
    partition_folds,
)
from .estimators import L1SVC, SVMRFE, CvSubsetSVC
from .lssvm import (
    FeatureMask,
    FoldModel,
    SubsetFactorization,
    stationarity_residual,
    train_lssvm,
    update_subset,
)
from .metrics import FeatureRecovery, auc, feature_recovery
from .search import (
    GammaSelection,
    SearchConfig,
    SearchResult,
    exhaustive_search,
    local_search,
    select_gamma,
)

__all__ = [
    "CvEvaluation", "CvSubsetSVC", "Dataset", "FeatureMask", "FeatureRecovery", "FinalModel",
    "FoldModel", "FoldPartition", "GammaSelection", "L1SVC", "LossKind", "SVMRFE",
    "SearchConfig", "SearchResult", "SubsetFactorization", "auc", "average_fold_models",
    "cv_objective", "decision_values", "exhaustive_search", "feature_recovery",
    "generate_dataset", "hinge_validation_loss", "local_search", "make_covariance",
    "make_true_coefficients", "noise_variance", "partition_folds", "predict_labels",
    "select_gamma", "squared_validation_loss", "stationarity_residual", "train_lssvm",
    "update_subset",
]
