"""Random forest of CART trees: Gini splits, per-tree bootstrap, sqrt-feature
candidate draws, grown until pure or down to a single row.

Trees are stored as flat arrays (feature, threshold, left, right, leaf value)
so batch prediction is a vectorized level-by-level descent.  Leaf value is
the class-1 fraction of the bootstrap rows that reached it; the forest score
is the mean leaf value over trees.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..seeding import rng_for
from .base import (ClassifierConfig, Scaler, check_predict_input,
                   check_training_inputs, fit_scaler)

_LEAF = -1


@dataclass
class Tree:
    feature: np.ndarray     # (nodes,) int32, -1 marks a leaf
    threshold: np.ndarray   # (nodes,) float64
    left: np.ndarray        # (nodes,) int32
    right: np.ndarray       # (nodes,) int32
    value: np.ndarray       # (nodes,) float64 class-1 fraction at leaves

    @property
    def nodes(self) -> int:
        return self.feature.shape[0]

    @property
    def internal_nodes(self) -> int:
        return int(np.count_nonzero(self.feature != _LEAF))

    @property
    def leaves(self) -> int:
        return self.nodes - self.internal_nodes

    @property
    def depth(self) -> int:
        depths = np.zeros(self.nodes, dtype=np.int32)
        for i in range(self.nodes):
            if self.feature[i] != _LEAF:
                depths[self.left[i]] = depths[i] + 1
                depths[self.right[i]] = depths[i] + 1
        return int(depths.max()) if self.nodes else 0

    def scores(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(X.shape[0], dtype=np.int32)
        active = np.flatnonzero(self.feature[node] != _LEAF)
        while active.size:
            cur = node[active]
            go_left = X[active, self.feature[cur]] <= self.threshold[cur]
            node[active] = np.where(go_left, self.left[cur], self.right[cur])
            active = active[self.feature[node[active]] != _LEAF]
        return self.value[node]


def _best_split(X: np.ndarray, rows: np.ndarray, ys: np.ndarray,
                candidates: np.ndarray):
    """Best (gini, feature, threshold) over candidate features, None if no split.

    Ties resolve to the first candidate and lowest threshold encountered, so
    results are reproducible for a fixed candidate order.
    """
    n = ys.shape[0]
    total_pos = int(ys.sum())
    best = None
    for f in candidates:
        col = X[rows, f]
        order = np.argsort(col, kind="stable")
        sv = col[order]
        sy = ys[order]
        boundary = np.flatnonzero(sv[1:] > sv[:-1])  # split after position k
        if boundary.size == 0:
            continue  # constant candidate
        nl = boundary + 1
        pl = np.cumsum(sy)[boundary].astype(np.float64)
        nr = n - nl
        pr = total_pos - pl
        gl = 1.0 - (pl / nl) ** 2 - ((nl - pl) / nl) ** 2
        gr = 1.0 - (pr / nr) ** 2 - ((nr - pr) / nr) ** 2
        weighted = (nl * gl + nr * gr) / n
        k = int(np.argmin(weighted))
        thr = 0.5 * (sv[boundary[k]] + sv[boundary[k] + 1])
        if not (sv[boundary[k]] < thr <= sv[boundary[k] + 1]):
            thr = sv[boundary[k]]  # adjacent floats; keep left side <= thr
        if best is None or weighted[k] < best[0]:
            best = (float(weighted[k]), int(f), float(thr))
    return best


def _grow_tree(X: np.ndarray, y: np.ndarray, n_candidates: int,
               rng: np.random.Generator) -> Tree:
    d = X.shape[1]
    feature, threshold, left, right, value = [], [], [], [], []

    def new_node() -> int:
        feature.append(_LEAF)
        threshold.append(0.0)
        left.append(0)
        right.append(0)
        value.append(0.0)
        return len(feature) - 1

    root = new_node()
    stack = [(root, np.arange(X.shape[0]))]
    while stack:
        node, rows = stack.pop()
        ys = y[rows]
        pos = int(ys.sum())
        value[node] = pos / rows.size
        if pos == 0 or pos == rows.size or rows.size < 2:
            continue
        candidates = rng.choice(d, size=min(n_candidates, d), replace=False)
        split = _best_split(X, rows, ys, candidates)
        if split is None:
            continue
        _, f, thr = split
        go_left = X[rows, f] <= thr
        feature[node] = f
        threshold[node] = thr
        lnode, rnode = new_node(), new_node()
        left[node], right[node] = lnode, rnode
        # right first so the left child is processed (and numbered) depth-first
        stack.append((rnode, rows[~go_left]))
        stack.append((lnode, rows[go_left]))

    return Tree(
        feature=np.array(feature, dtype=np.int32),
        threshold=np.array(threshold, dtype=np.float64),
        left=np.array(left, dtype=np.int32),
        right=np.array(right, dtype=np.int32),
        value=np.array(value, dtype=np.float64),
    )


@dataclass
class RandomForestModel:
    kind: str
    dim: int
    trees: list[Tree]
    seed: int
    scaler: Optional[Scaler] = None

    def scores(self, X: np.ndarray) -> np.ndarray:
        X = X.astype(np.float64, copy=False)
        if self.scaler is not None:
            X = self.scaler.apply(X)
        acc = np.zeros(X.shape[0])
        for tree in self.trees:
            acc += tree.scores(X)
        return acc / len(self.trees)

    def parameter_count(self) -> int:
        # feature + threshold per internal node, one fraction per leaf
        return sum(2 * t.internal_nodes + t.leaves for t in self.trees)


def fit_random_forest(X, y, cfg: ClassifierConfig) -> RandomForestModel:
    X, y = check_training_inputs(X, y)
    scaler = fit_scaler(X) if cfg.standardize else None
    if scaler is not None:
        X = scaler.apply(X)
    n, d = X.shape
    n_candidates = math.ceil(math.sqrt(d))
    trees = []
    for k in range(cfg.n_estimators):
        rng = rng_for("rf", cfg.seed, k)
        boot = rng.integers(0, n, size=n)
        trees.append(_grow_tree(X[boot], y[boot], n_candidates, rng))
    return RandomForestModel(kind="rf", dim=d, trees=trees, seed=cfg.seed,
                             scaler=scaler)
