"""Trainable binary classifiers under a uniform fit/score/label contract."""

from .base import (ClassifierConfig, Scaler, check_predict_input,
                   check_training_inputs, count_parameters, fit_scaler,
                   linear_svc_config, lr_config, predict_labels,
                   predict_scores, rbf_svc_config, rf_config, sigmoid,
                   stratified_fold_ids)
from .forest import RandomForestModel, Tree, fit_random_forest
from .linear_svc import LinearSvcModel, fit_linear_svc
from .logistic import LogisticModel, fit_logistic_regression
from .rbf_svc import (DEFAULT_ROW_CAP, RbfSvcModel, RowCapExceeded,
                      fit_rbf_svc, gamma_value, rbf_kernel)

_FITTERS = {
    "lr": fit_logistic_regression,
    "linear_svc": fit_linear_svc,
    "rf": fit_random_forest,
}


def fit_classifier(X, y, cfg: ClassifierConfig, row_cap: int = DEFAULT_ROW_CAP):
    """Train the classifier named by cfg.kind; rbf_svc honours the row cap."""
    if cfg.kind == "rbf_svc":
        return fit_rbf_svc(X, y, cfg, row_cap=row_cap)
    return _FITTERS[cfg.kind](X, y, cfg)


__all__ = [
    "ClassifierConfig", "Scaler", "Tree",
    "LogisticModel", "LinearSvcModel", "RbfSvcModel", "RandomForestModel",
    "fit_logistic_regression", "fit_linear_svc", "fit_rbf_svc",
    "fit_random_forest", "fit_classifier",
    "predict_scores", "predict_labels", "count_parameters",
    "lr_config", "linear_svc_config", "rbf_svc_config", "rf_config",
    "stratified_fold_ids", "sigmoid", "rbf_kernel", "gamma_value",
    "RowCapExceeded", "DEFAULT_ROW_CAP",
]
