"""Shared classifier plumbing: config, input checks, the score/label contract."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional, Union

import numpy as np

from ..seeding import rng_for

KINDS = ("lr", "linear_svc", "rbf_svc", "rf")

_DEFAULT_TOL = {"lr": 1e-4, "linear_svc": 1e-4, "rbf_svc": 1e-3, "rf": 0.0}
_DEFAULT_MAX_ITER = {"lr": 1000, "linear_svc": 1000, "rbf_svc": 200_000, "rf": 0}


@dataclass(frozen=True)
class ClassifierConfig:
    """Training settings for one base classifier.

    ``tol`` and ``max_iter`` default per kind: 1000 iterations for the linear
    models, a much larger pair-update budget for SMO.  ``rbf_gamma`` is either
    the string "scale" (1 / (d * Var(X))) or an explicit positive value.
    """

    kind: str
    max_iter: int = 0            # 0 = per-kind default
    n_estimators: int = 10
    c: float = 1.0
    tol: float = 0.0             # 0 = per-kind default
    rbf_gamma: Union[str, float] = "scale"
    seed: int = 0
    standardize: bool = False

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown classifier kind {self.kind!r}")
        if self.max_iter == 0:
            object.__setattr__(self, "max_iter", _DEFAULT_MAX_ITER[self.kind])
        if self.tol == 0.0:
            object.__setattr__(self, "tol", _DEFAULT_TOL[self.kind])
        if self.kind != "rf" and self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if self.n_estimators < 1:
            raise ValueError("n_estimators must be >= 1")
        if self.c <= 0:
            raise ValueError("regularization c must be positive")
        if isinstance(self.rbf_gamma, str):
            if self.rbf_gamma != "scale":
                raise ValueError(f"rbf_gamma must be 'scale' or a positive number")
        elif self.rbf_gamma <= 0:
            raise ValueError("rbf_gamma must be positive")

    def with_seed(self, seed: int) -> "ClassifierConfig":
        return replace(self, seed=seed)


def lr_config(**kw) -> ClassifierConfig:
    return ClassifierConfig(kind="lr", **kw)


def linear_svc_config(**kw) -> ClassifierConfig:
    return ClassifierConfig(kind="linear_svc", **kw)


def rbf_svc_config(**kw) -> ClassifierConfig:
    return ClassifierConfig(kind="rbf_svc", **kw)


def rf_config(**kw) -> ClassifierConfig:
    return ClassifierConfig(kind="rf", **kw)


@dataclass(frozen=True)
class Scaler:
    """Per-column z-scoring fitted on training data, applied at predict time."""

    mean: np.ndarray
    scale: np.ndarray  # std with zeros replaced by 1 (constant columns pass through)

    def apply(self, X: np.ndarray) -> np.ndarray:
        return (X - self.mean) / self.scale


def fit_scaler(X: np.ndarray) -> Scaler:
    mean = X.mean(axis=0, dtype=np.float64)
    std = X.std(axis=0, dtype=np.float64)
    scale = np.where(std > 0, std, 1.0)
    return Scaler(mean=mean, scale=scale)


def check_training_inputs(X, y) -> tuple[np.ndarray, np.ndarray]:
    """Validate (X, y) for binary training; returns float64 X and uint8 y."""
    X = np.asarray(X)
    if X.ndim != 2:
        raise ValueError(f"X must be 2-D, got shape {X.shape}")
    if X.shape[1] < 1:
        raise ValueError("X has zero feature columns")
    y = np.asarray(y).reshape(-1)
    if X.shape[0] != y.shape[0]:
        raise ValueError(f"X has {X.shape[0]} rows but y has {y.shape[0]}")
    if X.shape[0] < 2:
        raise ValueError("need at least 2 training rows")
    y = y.astype(np.uint8)
    if not np.isin(y, (0, 1)).all():
        raise ValueError("labels must be 0/1")
    if y.min() == y.max():
        raise ValueError("training labels contain a single class")
    return X.astype(np.float64), y


def check_predict_input(X, dim: int) -> np.ndarray:
    X = np.asarray(X)
    if X.ndim != 2:
        raise ValueError(f"X must be 2-D, got shape {X.shape}")
    if X.shape[1] != dim:
        raise ValueError(f"X has {X.shape[1]} columns, model expects {dim}")
    return X


def sigmoid(z: np.ndarray) -> np.ndarray:
    """Numerically stable logistic function."""
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def predict_scores(model, X) -> np.ndarray:
    """Class-1 probabilities (or squashed scores) in [0, 1], one per row.

    Row-independent by construction: scoring any contiguous block of rows
    gives bit-identical values to scoring the whole matrix.
    """
    X = check_predict_input(X, model.dim)
    return model.scores(X)


def predict_labels(model, X, threshold: float = 0.5) -> np.ndarray:
    """Binary labels: 1 iff score >= threshold."""
    if not (0.0 <= threshold <= 1.0):
        raise ValueError(f"threshold must lie in [0, 1], got {threshold}")
    return (predict_scores(model, X) >= threshold).astype(np.uint8)


def count_parameters(model) -> int:
    """Learned-parameter count under this toolkit's fixed counting rule."""
    return model.parameter_count()


def stratified_fold_ids(y: np.ndarray, folds: int, seed: int) -> np.ndarray:
    """Assign rows to k folds, each class dealt round-robin after a shuffle.

    Guarantees both classes appear in every fold whenever each class has at
    least ``folds`` rows; raises otherwise.
    """
    y = np.asarray(y)
    if folds < 2:
        raise ValueError("folds must be >= 2")
    if folds > y.shape[0]:
        raise ValueError(f"folds ({folds}) exceeds row count ({y.shape[0]})")
    ids = np.empty(y.shape[0], dtype=np.int32)
    for cls in (0, 1):
        idx = np.flatnonzero(y == cls)
        if idx.size < folds:
            raise ValueError(
                f"class {cls} has {idx.size} rows, fewer than {folds} folds"
            )
        rng = rng_for("folds", seed, cls)
        shuffled = rng.permutation(idx)
        ids[shuffled] = np.arange(shuffled.size, dtype=np.int32) % folds
    return ids
