"""Paired nonparametric testing: Wilcoxon signed-rank and relative gains."""

from __future__ import annotations

import math

import numpy as np

EXACT_LIMIT = 25  # largest effective n that uses the exact null distribution


class DegenerateSampleError(ValueError):
    """All paired differences are zero; the test statistic is undefined."""


def _average_ranks(values: np.ndarray) -> np.ndarray:
    """Ranks 1..n of ``values`` with ties sharing their average rank."""
    order = np.argsort(values, kind="stable")
    ranks = np.empty(values.size, dtype=np.float64)
    i = 0
    while i < values.size:
        j = i
        while j + 1 < values.size and values[order[j + 1]] == values[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def _exact_pvalue(ranks: np.ndarray, w_plus: float) -> float:
    """Two-sided exact p for the positive-rank sum under the signed-rank null.

    Builds the full null distribution of W+ over all 2^n sign assignments
    (tabulated by dynamic programming on doubled ranks, so tied average ranks
    stay on an integer lattice), then takes 2*min(P(W+ <= w+), P(W+ >= w+)),
    capped at 1.
    """
    doubled = np.rint(2.0 * ranks).astype(np.int64)
    total = int(doubled.sum())
    counts = np.zeros(total + 1, dtype=np.float64)
    counts[0] = 1.0
    top = 0
    for r in doubled:
        counts[r : top + r + 1] += counts[: top + 1]
        top += r
    counts /= counts.sum()
    w2 = int(np.rint(2.0 * w_plus))
    p_low = counts[: w2 + 1].sum()
    p_high = counts[w2:].sum()
    return min(1.0, 2.0 * min(p_low, p_high))


def _normal_pvalue(ranks: np.ndarray, w: float) -> float:
    """Two-sided normal approximation with tie and continuity corrections."""
    n = ranks.size
    mu = n * (n + 1) / 4.0
    var = n * (n + 1) * (2 * n + 1) / 24.0
    _, tie_counts = np.unique(ranks, return_counts=True)
    var -= ((tie_counts**3 - tie_counts).sum()) / 48.0
    if var <= 0:
        raise DegenerateSampleError("zero variance: all ranks tied to one value")
    z = (w - mu + 0.5) / math.sqrt(var)  # w = min(W+, W-) <= mu; shift toward mu
    p = math.erfc(-z / math.sqrt(2.0))  # = 2 * Phi(z)
    return min(1.0, p)


def wilcoxon_signed_rank(a, b) -> tuple[float, float]:
    """Two-sided Wilcoxon signed-rank test on paired samples.

    Zero differences are dropped; |differences| are ranked with average ranks
    for ties; the statistic is W = min(W+, W-).  Effective n up to 25 uses the
    exact sign-assignment null, larger n a tie- and continuity-corrected
    normal approximation.  Returns (W, p).
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError(f"paired samples must be equal-length 1-D, got {a.shape} vs {b.shape}")
    if a.size < 1:
        raise ValueError("paired samples must be non-empty")
    d = a - b
    d = d[d != 0.0]
    if d.size == 0:
        raise DegenerateSampleError("all paired differences are zero")
    ranks = _average_ranks(np.abs(d))
    w_plus = float(ranks[d > 0].sum())
    w_minus = float(ranks[d < 0].sum())
    w = min(w_plus, w_minus)
    if d.size <= EXACT_LIMIT:
        p = _exact_pvalue(ranks, w_plus)
    else:
        p = _normal_pvalue(ranks, w)
    return w, p


def relative_gain(candidate_mean: float, baseline_mean: float) -> float:
    """Percentage change of candidate over baseline, rounded to two decimals."""
    if baseline_mean == 0:
        raise ValueError("baseline mean must be nonzero")
    return round(100.0 * (candidate_mean - baseline_mean) / baseline_mean, 2)
