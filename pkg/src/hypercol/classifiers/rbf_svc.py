"""Soft-margin RBF kernel SVC trained by SMO, with Platt-scaled probabilities.

The dual problem

    min  0.5 a'Qa - sum(a)   s.t.  0 <= a_i <= C,  sum_i t_i a_i = 0,
with Q_ij = t_i t_j k(x_i, x_j)  and  k(a, b) = exp(-gamma * ||a - b||^2)

is solved by repeatedly taking the maximal-KKT-violating pair and solving the
two-variable subproblem analytically.  Kernel columns are computed on demand
and kept in a bounded FIFO cache, so memory stays O(n) plus the cache.

Probabilities come from Platt scaling fitted on out-of-fold decision values
(3 folds); prediction applies sigmoid(-(A*f + B)) to the decision value f.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..seeding import rng_for
from .base import (ClassifierConfig, Scaler, check_training_inputs, fit_scaler,
                   stratified_fold_ids)

PLATT_FOLDS = 3
DEFAULT_ROW_CAP = 20_000
_CACHE_BYTES = 256 * 1024 * 1024


class RowCapExceeded(ValueError):
    """Training-row count is above the configured kernel-cache budget."""


def gamma_value(gamma, X: np.ndarray) -> float:
    """Resolve 'scale' to 1 / (d * Var(X)); pass explicit values through."""
    if isinstance(gamma, str):
        var = float(np.asarray(X, dtype=np.float64).var())
        if var <= 0:
            var = 1.0
        return 1.0 / (X.shape[1] * var)
    return float(gamma)


def rbf_kernel(A: np.ndarray, B: np.ndarray, gamma: float) -> np.ndarray:
    """exp(-gamma * ||a - b||^2) for every row pair; (len(A), len(B))."""
    a2 = np.einsum("ij,ij->i", A, A)
    b2 = np.einsum("ij,ij->i", B, B)
    d2 = a2[:, None] + b2[None, :] - 2.0 * (A @ B.T)
    np.maximum(d2, 0.0, out=d2)
    return np.exp(-gamma * d2)


class _ColumnCache:
    """Bounded FIFO cache of kernel columns keyed by training-row index."""

    def __init__(self, X: np.ndarray, gamma: float, budget_bytes: int = _CACHE_BYTES):
        self.X = X
        self.gamma = gamma
        self.sq = np.einsum("ij,ij->i", X, X)
        self.cols: dict[int, np.ndarray] = {}
        self.capacity = max(2, budget_bytes // (8 * X.shape[0]))

    def column(self, i: int) -> np.ndarray:
        col = self.cols.get(i)
        if col is None:
            d2 = self.sq + self.sq[i] - 2.0 * (self.X @ self.X[i])
            np.maximum(d2, 0.0, out=d2)
            col = np.exp(-self.gamma * d2)
            if len(self.cols) >= self.capacity:
                self.cols.pop(next(iter(self.cols)))
            self.cols[i] = col
        return col


def _smo(X: np.ndarray, t: np.ndarray, c: float, gamma: float, tol: float,
         max_iter: int):
    """Maximal-violating-pair SMO; returns (alpha, b, iterations, objective)."""
    n = X.shape[0]
    alpha = np.zeros(n)
    grad = -np.ones(n)  # G = Q a - e
    cache = _ColumnCache(X, gamma)
    pos = t > 0

    it = 0
    m = M = 0.0
    while it < max_iter:
        viol = -t * grad
        up = (pos & (alpha < c)) | (~pos & (alpha > 0))
        low = (pos & (alpha > 0)) | (~pos & (alpha < c))
        up_vals = np.where(up, viol, -np.inf)
        low_vals = np.where(low, viol, np.inf)
        i = int(np.argmax(up_vals))
        j = int(np.argmin(low_vals))
        m = up_vals[i]
        M = low_vals[j]
        if m - M <= tol:
            break

        ki = cache.column(i)
        kj = cache.column(j)
        quad = ki[i] + kj[j] - 2.0 * ki[j]
        lam = (m - M) / max(quad, 1e-12)
        # box headroom along the feasible direction (a_i += t_i*lam, a_j -= t_j*lam)
        lam = min(lam,
                  (c - alpha[i]) if t[i] > 0 else alpha[i],
                  alpha[j] if t[j] > 0 else (c - alpha[j]))
        alpha[i] += t[i] * lam
        alpha[j] -= t[j] * lam
        np.clip(alpha, 0.0, c, out=alpha)
        grad += (lam * t) * (ki - kj)
        it += 1

    b = 0.5 * (m + M)
    objective = 0.5 * float(alpha @ grad) - 0.5 * float(alpha.sum())
    return alpha, float(b), it, objective


def _platt_fit(decisions: np.ndarray, y: np.ndarray,
               max_iter: int = 100) -> tuple[float, float]:
    """Regularized sigmoid fit p = 1/(1 + exp(A*f + B)) by Newton descent."""
    prior1 = int(y.sum())
    prior0 = y.shape[0] - prior1
    hi = (prior1 + 1.0) / (prior1 + 2.0)
    lo = 1.0 / (prior0 + 2.0)
    target = np.where(y == 1, hi, lo)

    a, b = 0.0, math.log((prior0 + 1.0) / (prior1 + 1.0))
    sigma = 1e-12
    min_step, eps = 1e-10, 1e-5

    def objective(av, bv):
        fApB = decisions * av + bv
        up = fApB >= 0
        out = np.empty_like(fApB)
        out[up] = target[up] * fApB[up] + np.log1p(np.exp(-fApB[up]))
        out[~up] = (target[~up] - 1.0) * fApB[~up] + np.log1p(np.exp(fApB[~up]))
        return float(out.sum())

    fval = objective(a, b)
    for _ in range(max_iter):
        fApB = decisions * a + b
        up = fApB >= 0
        p = np.empty_like(fApB)
        q = np.empty_like(fApB)
        e_neg = np.exp(-fApB[up])
        p[up] = e_neg / (1.0 + e_neg)
        q[up] = 1.0 / (1.0 + e_neg)
        e_pos = np.exp(fApB[~up])
        p[~up] = 1.0 / (1.0 + e_pos)
        q[~up] = e_pos / (1.0 + e_pos)

        d1 = target - p
        g1 = float((decisions * d1).sum())
        g2 = float(d1.sum())
        if abs(g1) < eps and abs(g2) < eps:
            break
        d2 = p * q
        h11 = float((decisions * decisions * d2).sum()) + sigma
        h22 = float(d2.sum()) + sigma
        h21 = float((decisions * d2).sum())
        det = h11 * h22 - h21 * h21
        dA = -(h22 * g1 - h21 * g2) / det
        dB = -(-h21 * g1 + h11 * g2) / det
        gd = g1 * dA + g2 * dB

        step = 1.0
        while step >= min_step:
            new_a, new_b = a + step * dA, b + step * dB
            new_f = objective(new_a, new_b)
            if new_f < fval + 1e-4 * step * gd:
                a, b, fval = new_a, new_b, new_f
                break
            step *= 0.5
        else:
            break  # line search failed; keep current (A, B)
    return a, b


@dataclass
class RbfSvcModel:
    kind: str
    dim: int
    support_vectors: np.ndarray   # (n_sv, dim) float64
    dual_coef: np.ndarray         # (n_sv,) alpha_i * t_i
    intercept: float
    gamma: float
    platt_a: float
    platt_b: float
    iterations: int
    seed: int
    scaler: Optional[Scaler] = None
    train_alpha: Optional[np.ndarray] = None      # diagnostics, not serialized
    train_objective: Optional[float] = None

    @property
    def n_support(self) -> int:
        return self.support_vectors.shape[0]

    def decision(self, X: np.ndarray) -> np.ndarray:
        X = X.astype(np.float64, copy=False)
        if self.scaler is not None:
            X = self.scaler.apply(X)
        k = rbf_kernel(X, self.support_vectors, self.gamma)
        return k @ self.dual_coef + self.intercept

    def scores(self, X: np.ndarray) -> np.ndarray:
        f = self.decision(X)
        z = self.platt_a * f + self.platt_b
        # p = 1/(1+exp(z)) computed stably
        out = np.empty_like(z)
        nonneg = z >= 0
        out[nonneg] = np.exp(-z[nonneg]) / (1.0 + np.exp(-z[nonneg]))
        out[~nonneg] = 1.0 / (1.0 + np.exp(z[~nonneg]))
        return out

    def parameter_count(self) -> int:
        n_sv = self.n_support
        return n_sv * self.dim + n_sv + 1 + 2


def fit_rbf_svc(X, y, cfg: ClassifierConfig,
                row_cap: int = DEFAULT_ROW_CAP) -> RbfSvcModel:
    X, y = check_training_inputs(X, y)
    if X.shape[0] > row_cap:
        raise RowCapExceeded(
            f"{X.shape[0]} training rows exceed the kernel cache cap ({row_cap})"
        )
    scaler = fit_scaler(X) if cfg.standardize else None
    if scaler is not None:
        X = scaler.apply(X)
    t = y.astype(np.float64) * 2.0 - 1.0
    gamma = gamma_value(cfg.rbf_gamma, X)

    # out-of-fold decision values for the probability calibration
    counts = np.bincount(y, minlength=2)
    oof = np.empty(X.shape[0])
    if counts.min() >= PLATT_FOLDS and X.shape[0] > PLATT_FOLDS:
        fold_ids = stratified_fold_ids(y, PLATT_FOLDS, cfg.seed)
        for f in range(PLATT_FOLDS):
            held = fold_ids == f
            Xf, tf = X[~held], t[~held]
            af, bf, _, _ = _smo(Xf, tf, cfg.c, gamma, cfg.tol, cfg.max_iter)
            sv = af > 0
            kf = rbf_kernel(X[held], Xf[sv], gamma)
            oof[held] = kf @ (af[sv] * tf[sv]) + bf
        calib_y = y
    else:
        oof = None  # degenerate split; calibrate in-sample below
        calib_y = y

    alpha, b, iters, objective = _smo(X, t, cfg.c, gamma, cfg.tol, cfg.max_iter)
    sv = alpha > 0
    model = RbfSvcModel(
        kind="rbf_svc",
        dim=X.shape[1],
        support_vectors=X[sv].copy(),
        dual_coef=(alpha[sv] * t[sv]).copy(),
        intercept=b,
        gamma=gamma,
        platt_a=0.0,
        platt_b=0.0,
        iterations=iters,
        seed=cfg.seed,
        scaler=None,  # X already standardized here; attach below for raw inputs
        train_alpha=alpha,
        train_objective=objective,
    )
    decis = oof if oof is not None else model.decision(X)
    model.platt_a, model.platt_b = _platt_fit(np.asarray(decis), calib_y)
    model.scaler = scaler
    return model
