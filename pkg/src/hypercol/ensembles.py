"""Weighted soft-voting and out-of-fold stacking over the base classifiers.

Voting averages member probabilities with fixed weights.  Stacking trains a
logistic-regression meta-learner on out-of-fold base scores (so no base ever
scores a row it saw during training), then refits every base on the full
training set for inference.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .classifiers import (ClassifierConfig, fit_classifier,
                          fit_logistic_regression, linear_svc_config,
                          lr_config, rbf_svc_config, rf_config,
                          stratified_fold_ids)
from .classifiers.rbf_svc import DEFAULT_ROW_CAP
from .seeding import derive_seed

_CONFIG_BUILDERS = {
    "lr": lr_config,
    "linear_svc": linear_svc_config,
    "rbf_svc": rbf_svc_config,
    "rf": rf_config,
}


def _member_config(kind: str, overrides: dict, seed: int) -> ClassifierConfig:
    cfg = overrides.get(kind)
    if cfg is None:
        cfg = _CONFIG_BUILDERS[kind]()
    return cfg.with_seed(seed)


@dataclass(frozen=True)
class VotingConfig:
    """Soft-voting roster and weights (defaults: RF, RBF-SVC, LR at .4/.4/.2)."""

    members: tuple[str, ...] = ("rf", "rbf_svc", "lr")
    weights: tuple[float, ...] = (0.4, 0.4, 0.2)
    member_configs: dict = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        if len(self.weights) != len(self.members):
            raise ValueError("one weight per member required")
        if any(w < 0 for w in self.weights):
            raise ValueError("weights must be non-negative")
        if abs(sum(self.weights) - 1.0) > 1e-9:
            raise ValueError(f"weights must sum to 1, got {sum(self.weights)}")


@dataclass(frozen=True)
class StackingConfig:
    """Stacking roster: base models plus a logistic-regression meta-learner."""

    bases: tuple[str, ...] = ("rf", "linear_svc")
    meta: Optional[ClassifierConfig] = None
    folds: int = 5
    seed: int = 0

    def __post_init__(self):
        if self.folds < 2:
            raise ValueError("folds must be >= 2")
        if not self.bases:
            raise ValueError("stacking needs at least one base model")


@dataclass
class VotingModel:
    kind: str
    dim: int
    members: list
    weights: np.ndarray
    seed: int

    def scores(self, X: np.ndarray) -> np.ndarray:
        out = np.zeros(X.shape[0])
        for w, member in zip(self.weights, self.members):
            out += w * member.scores(X)
        return out

    def parameter_count(self) -> int:
        return sum(m.parameter_count() for m in self.members) + len(self.weights)


@dataclass
class StackingModel:
    kind: str
    dim: int
    bases: list
    base_kinds: tuple[str, ...]
    meta: object
    seed: int

    def scores(self, X: np.ndarray) -> np.ndarray:
        meta_X = np.column_stack([b.scores(X) for b in self.bases])
        return self.meta.scores(meta_X)

    def parameter_count(self) -> int:
        return sum(b.parameter_count() for b in self.bases) + self.meta.parameter_count()


def fit_voting(X, y, cfg: VotingConfig,
               row_cap: int = DEFAULT_ROW_CAP) -> VotingModel:
    """Train every member on the same (X, y); score is the weighted mean."""
    members = []
    for kind in cfg.members:
        mcfg = _member_config(kind, cfg.member_configs, derive_seed(cfg.seed, "vote", kind))
        members.append(fit_classifier(X, y, mcfg, row_cap=row_cap))
    return VotingModel(
        kind="voting",
        dim=members[0].dim,
        members=members,
        weights=np.asarray(cfg.weights, dtype=np.float64),
        seed=cfg.seed,
    )


def oof_base_scores(X, y, cfg: StackingConfig,
                    row_cap: int = DEFAULT_ROW_CAP):
    """Out-of-fold score matrix (rows, n_bases) plus the fold id of every row.

    Row i's scores come from base models trained on the complement of fold
    fold_ids[i], so no base scored a row it trained on.
    """
    y = np.asarray(y).reshape(-1)
    fold_ids = stratified_fold_ids(y, cfg.folds, derive_seed(cfg.seed, "stack-folds"))
    meta_X = np.empty((y.shape[0], len(cfg.bases)), dtype=np.float64)
    for b, kind in enumerate(cfg.bases):
        for f in range(cfg.folds):
            held = fold_ids == f
            mcfg = _member_config(kind, {}, derive_seed(cfg.seed, "stack-oof", kind, f))
            model = fit_classifier(X[~held], y[~held], mcfg, row_cap=row_cap)
            meta_X[held, b] = model.scores(X[held])
    return meta_X, fold_ids


def fit_stacking(X, y, cfg: StackingConfig,
                 row_cap: int = DEFAULT_ROW_CAP) -> "StackingModel":
    X = np.asarray(X)
    meta_X, _ = oof_base_scores(X, y, cfg, row_cap=row_cap)
    meta_cfg = (cfg.meta or lr_config()).with_seed(derive_seed(cfg.seed, "stack-meta"))
    meta = fit_logistic_regression(meta_X, y, meta_cfg)
    bases = []
    for kind in cfg.bases:
        mcfg = _member_config(kind, {}, derive_seed(cfg.seed, "stack-full", kind))
        bases.append(fit_classifier(X, y, mcfg, row_cap=row_cap))
    return StackingModel(kind="stacking", dim=bases[0].dim, bases=bases,
                         base_kinds=tuple(cfg.bases), meta=meta, seed=cfg.seed)
