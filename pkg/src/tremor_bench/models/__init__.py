"""Eight binary classifiers behind one fit / predict / decision_score contract."""
from .base import (
    ALGORITHMS,
    DEFAULTS,
    THRESHOLDS,
    ModelSpec,
    TrainedModel,
    decision_score,
    fit,
    predict,
)
from .svm import fit_svm
from .tree import fit_decision_tree, fit_random_forest
from .linear import fit_logistic_regression, logistic_objective
from .knn import fit_knn
from .boosting import fit_adaboost, fit_gradient_boosting, fit_xgboost_style

__all__ = [
    "ALGORITHMS", "DEFAULTS", "THRESHOLDS", "ModelSpec", "TrainedModel",
    "fit", "predict", "decision_score",
    "fit_svm", "fit_decision_tree", "fit_random_forest", "fit_logistic_regression",
    "fit_knn", "fit_gradient_boosting", "fit_adaboost", "fit_xgboost_style",
    "logistic_objective",
]
