"""Pixel-level segmentation metrics and Monte Carlo run aggregation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

METRIC_NAMES = ("accuracy", "precision", "recall", "jaccard", "dice")


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


@dataclass(frozen=True)
class MetricVector:
    accuracy: float
    precision: float
    recall: float
    jaccard: float
    dice: float

    def as_tuple(self) -> tuple[float, ...]:
        return (self.accuracy, self.precision, self.recall, self.jaccard, self.dice)


@dataclass(frozen=True)
class RunSummary:
    """Per-run means plus across-run mean and population std for each metric."""

    per_run: tuple[MetricVector, ...]
    mean: MetricVector
    std: MetricVector

    @property
    def runs(self) -> int:
        return len(self.per_run)


def confusion_counts(pred: np.ndarray, gt: np.ndarray) -> ConfusionCounts:
    """Count TP/FP/TN/FN between two same-shape binary grids."""
    pred = np.asarray(pred)
    gt = np.asarray(gt)
    if pred.shape != gt.shape:
        raise ValueError(f"shape mismatch: pred {pred.shape} vs gt {gt.shape}")
    p = pred.astype(bool)
    g = gt.astype(bool)
    tp = int(np.count_nonzero(p & g))
    fp = int(np.count_nonzero(p & ~g))
    fn = int(np.count_nonzero(~p & g))
    tn = p.size - tp - fp - fn
    return ConfusionCounts(tp=tp, fp=fp, tn=tn, fn=fn)


def segmentation_metrics(c: ConfusionCounts) -> MetricVector:
    """Accuracy, precision, recall, Jaccard and Dice from confusion counts.

    Empty-denominator convention: with no predicted positives, precision is
    1.0 iff there were also no missed positives (fn == 0), else 0.0; likewise
    recall when there are no actual positives.  tp == fp == fn == 0 means both
    masks are empty, which counts as perfect overlap (Jaccard = Dice = 1.0).
    """
    if c.total <= 0:
        raise ValueError("confusion counts describe zero pixels")
    tp, fp, tn, fn = c.tp, c.fp, c.tn, c.fn
    accuracy = (tp + tn) / c.total
    precision = tp / (tp + fp) if tp + fp > 0 else (1.0 if fn == 0 else 0.0)
    recall = tp / (tp + fn) if tp + fn > 0 else (1.0 if fp == 0 else 0.0)
    denom = tp + fp + fn
    jaccard = tp / denom if denom > 0 else 1.0
    dice = 2 * tp / (2 * tp + fp + fn) if denom > 0 else 1.0
    return MetricVector(accuracy, precision, recall, jaccard, dice)


def mean_metrics(items: list[MetricVector]) -> MetricVector:
    if not items:
        raise ValueError("cannot average zero metric vectors")
    cols = np.array([m.as_tuple() for m in items], dtype=np.float64)
    return MetricVector(*cols.mean(axis=0))


def aggregate_runs(per_image_metrics: list[list[MetricVector]]) -> RunSummary:
    """Per run: unweighted mean over images; across runs: mean and population std."""
    if not per_image_metrics or any(not run for run in per_image_metrics):
        raise ValueError("need at least one run with at least one image")
    per_run = tuple(mean_metrics(run) for run in per_image_metrics)
    table = np.array([m.as_tuple() for m in per_run], dtype=np.float64)
    return RunSummary(
        per_run=per_run,
        mean=MetricVector(*table.mean(axis=0)),
        std=MetricVector(*table.std(axis=0)),  # population (ddof=0)
    )
