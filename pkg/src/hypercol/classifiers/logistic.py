"""L2-regularized logistic regression trained with limited-memory BFGS.

Objective (labels mapped to t in {-1, +1}, intercept unpenalized):

    loss(w, b) = sum_i log(1 + exp(-t_i * (w.x_i + b))) + ||w||^2 / (2C)
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .base import (ClassifierConfig, Scaler, check_predict_input,
                   check_training_inputs, fit_scaler, sigmoid)


def loss_and_grad(theta: np.ndarray, X: np.ndarray, t: np.ndarray, c: float):
    """Objective value and gradient at theta = (w, b).  X is (n, d), t is +-1."""
    w, b = theta[:-1], theta[-1]
    z = X @ w + b
    u = -t * z
    # log(1 + exp(u)) without overflow
    loss = float(np.sum(np.maximum(u, 0.0) + np.log1p(np.exp(-np.abs(u)))))
    loss += 0.5 * float(w @ w) / c
    r = -t * sigmoid(u)  # d loss / d z
    grad = np.empty_like(theta)
    grad[:-1] = X.T @ r + w / c
    grad[-1] = r.sum()
    return loss, grad


def _lbfgs(fun, x0: np.ndarray, tol: float, max_iter: int, memory: int = 10):
    """Minimize fun (returning (loss, grad)) by L-BFGS with Armijo backtracking.

    Stops when the gradient max-norm drops below tol or the iteration budget
    runs out; returns (x, iterations).
    """
    x = x0.copy()
    f, g = fun(x)
    s_hist: list[np.ndarray] = []
    y_hist: list[np.ndarray] = []
    rho_hist: list[float] = []
    it = 0
    while it < max_iter and np.max(np.abs(g)) >= tol:
        # two-loop recursion
        q = g.copy()
        alphas = []
        for s, y, rho in zip(reversed(s_hist), reversed(y_hist), reversed(rho_hist)):
            a = rho * (s @ q)
            alphas.append(a)
            q -= a * y
        if y_hist:
            gamma = (s_hist[-1] @ y_hist[-1]) / (y_hist[-1] @ y_hist[-1])
            q *= gamma
        for (s, y, rho), a in zip(zip(s_hist, y_hist, rho_hist), reversed(alphas)):
            beta = rho * (y @ q)
            q += (a - beta) * s
        p = -q

        gtp = g @ p
        if gtp >= 0:  # not a descent direction; fall back to steepest descent
            p = -g
            gtp = g @ p
        step = 1.0
        f_new, g_new, x_new = f, g, x
        for _ in range(60):
            x_new = x + step * p
            f_new, g_new = fun(x_new)
            if f_new <= f + 1e-4 * step * gtp:
                break
            step *= 0.5
        else:
            break  # line search stalled; accept current point as converged

        s = x_new - x
        yv = g_new - g
        sy = s @ yv
        if sy > 1e-12 * np.linalg.norm(s) * np.linalg.norm(yv):
            s_hist.append(s)
            y_hist.append(yv)
            rho_hist.append(1.0 / sy)
            if len(s_hist) > memory:
                s_hist.pop(0)
                y_hist.pop(0)
                rho_hist.pop(0)
        x, f, g = x_new, f_new, g_new
        it += 1
    return x, it


@dataclass
class LogisticModel:
    kind: str
    dim: int
    weights: np.ndarray   # (dim,) float64
    intercept: float
    iterations: int
    seed: int
    scaler: Optional[Scaler] = None

    def decision(self, X: np.ndarray) -> np.ndarray:
        X = X.astype(np.float64, copy=False)
        if self.scaler is not None:
            X = self.scaler.apply(X)
        return X @ self.weights + self.intercept

    def scores(self, X: np.ndarray) -> np.ndarray:
        return sigmoid(self.decision(X))

    def parameter_count(self) -> int:
        return self.dim + 1


def fit_logistic_regression(X, y, cfg: ClassifierConfig) -> LogisticModel:
    X, y = check_training_inputs(X, y)
    scaler = fit_scaler(X) if cfg.standardize else None
    if scaler is not None:
        X = scaler.apply(X)
    t = y.astype(np.float64) * 2.0 - 1.0
    theta0 = np.zeros(X.shape[1] + 1)
    theta, iters = _lbfgs(
        lambda th: loss_and_grad(th, X, t, cfg.c),
        theta0, tol=cfg.tol, max_iter=cfg.max_iter,
    )
    return LogisticModel(
        kind="lr",
        dim=X.shape[1],
        weights=theta[:-1],
        intercept=float(theta[-1]),
        iterations=iters,
        seed=cfg.seed,
        scaler=scaler,
    )
