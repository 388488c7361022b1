"""Linear SVC with squared-hinge loss, trained by dual coordinate descent.

Primal (bias folded in as a constant augmented feature, so it is regularized):

    min_w  0.5 ||w||^2 + C * sum_i max(0, 1 - t_i * w.x^_i)^2,   x^ = [x, 1]

The dual is box-free (alpha_i >= 0 only) with a diagonal shift of 1/(2C);
one epoch sweeps the rows in a seeded random permutation.  Training stops
when the primal-dual gap falls below tol * max(1, primal).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from numba import njit

from ..seeding import rng_for
from .base import (ClassifierConfig, Scaler, check_training_inputs,
                   fit_scaler, sigmoid)


@njit(cache=True)
def _cd_epochs(Xa, t, alpha, w, qii, orders, inv2c):
    """Run one permutation sweep per row of ``orders``, updating alpha & w."""
    for e in range(orders.shape[0]):
        for k in range(orders.shape[1]):
            i = orders[e, k]
            xi = Xa[i]
            g = 0.0
            for j in range(w.shape[0]):
                g += w[j] * xi[j]
            g = t[i] * g - 1.0 + alpha[i] * inv2c
            new_a = alpha[i] - g / qii[i]
            if new_a < 0.0:
                new_a = 0.0
            delta = (new_a - alpha[i]) * t[i]
            if delta != 0.0:
                for j in range(w.shape[0]):
                    w[j] += delta * xi[j]
                alpha[i] = new_a


def _objectives(Xa, t, alpha, w, c):
    margins = 1.0 - t * (Xa @ w)
    hinge = np.maximum(margins, 0.0)
    primal = 0.5 * float(w @ w) + c * float(hinge @ hinge)
    dual = float(alpha.sum()) - 0.5 * float(w @ w) - float(alpha @ alpha) / (4.0 * c)
    return primal, dual


def dual_gradient(Xa, t, alpha, w, c):
    """Gradient of the dual objective; used by KKT diagnostics and tests."""
    return t * (Xa @ w) - 1.0 + alpha / (2.0 * c)


@dataclass
class LinearSvcModel:
    kind: str
    dim: int
    weights: np.ndarray   # (dim,) float64, bias excluded
    intercept: float
    iterations: int       # epochs actually run
    seed: int
    scaler: Optional[Scaler] = None
    dual_alpha: Optional[np.ndarray] = None  # training diagnostic, not serialized

    def decision(self, X: np.ndarray) -> np.ndarray:
        X = X.astype(np.float64, copy=False)
        if self.scaler is not None:
            X = self.scaler.apply(X)
        return X @ self.weights + self.intercept

    def scores(self, X: np.ndarray) -> np.ndarray:
        # no native probability; squashed decision values keep stacking inputs in [0,1]
        return sigmoid(self.decision(X))

    def parameter_count(self) -> int:
        return self.dim + 1


def fit_linear_svc(X, y, cfg: ClassifierConfig) -> LinearSvcModel:
    X, y = check_training_inputs(X, y)
    scaler = fit_scaler(X) if cfg.standardize else None
    if scaler is not None:
        X = scaler.apply(X)
    n, d = X.shape
    t = y.astype(np.float64) * 2.0 - 1.0

    Xa = np.ascontiguousarray(np.hstack([X, np.ones((n, 1))]))
    inv2c = 1.0 / (2.0 * cfg.c)
    qii = (Xa * Xa).sum(axis=1) + inv2c
    alpha = np.zeros(n)
    w = np.zeros(d + 1)

    rng = rng_for("linear_svc", cfg.seed)
    epochs_run = 0
    batch = 1  # gap check after every sweep; sweeps stay cheap under numba
    while epochs_run < cfg.max_iter:
        todo = min(batch, cfg.max_iter - epochs_run)
        orders = np.stack([rng.permutation(n) for _ in range(todo)]).astype(np.int64)
        _cd_epochs(Xa, t, alpha, w, qii, orders, inv2c)
        epochs_run += todo
        primal, dual = _objectives(Xa, t, alpha, w, cfg.c)
        if primal - dual <= cfg.tol * max(1.0, abs(primal)):
            break

    return LinearSvcModel(
        kind="linear_svc",
        dim=d,
        weights=w[:-1].copy(),
        intercept=float(w[-1]),
        iterations=epochs_run,
        seed=cfg.seed,
        scaler=scaler,
        dual_alpha=alpha,
    )
