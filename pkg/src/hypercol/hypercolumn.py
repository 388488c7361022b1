"""Hypercolumn assembly and stratified subsampling.

A dense hypercolumn is the full (H*W, d) matrix of per-pixel multi-scale
feature vectors for one image; training stacks N of them row-wise and then
draws a class-stratified subset (the sparse hypercolumn) so that foreground
pixels, a small minority in tumour masks, keep their exact proportion.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .hcf import Sample, validate_sample
from .seeding import rng_for
from .tensor import bilinear_upsample, concat_channels, flatten_pixels


@dataclass(frozen=True)
class HypercolumnConfig:
    """Geometry and sampling-rate settings for hypercolumn construction."""

    input_h: int = 224
    input_w: int = 224
    expected_taps: int = 5
    expected_channels: int = 1472  # 64+128+256+512+512 block-final widths
    subsample_rate: float = 0.1

    def __post_init__(self):
        if self.input_h < 1 or self.input_w < 1:
            raise ValueError("input size must be positive")
        if self.expected_taps < 1:
            raise ValueError("expected_taps must be positive")
        if self.expected_channels < 1:
            raise ValueError("expected_channels must be positive")
        if not (0.0 < self.subsample_rate <= 1.0):
            raise ValueError(f"subsample_rate must be in (0, 1], got {self.subsample_rate}")


@dataclass(eq=False)
class LabeledPixels:
    """Per-pixel feature rows with binary labels and source provenance.

    Provenance is stored columnar: ``image_ids[row_image[i]]`` names the image
    row i came from and ``row_pixel[i]`` is its y*W + x index there.
    """

    features: np.ndarray          # (rows, cols) float32
    labels: np.ndarray            # (rows,) uint8 in {0, 1}
    image_ids: tuple[str, ...]
    row_image: np.ndarray         # (rows,) int32 index into image_ids
    row_pixel: np.ndarray         # (rows,) int32

    def __post_init__(self):
        self.features = np.ascontiguousarray(self.features, dtype=np.float32)
        self.labels = np.ascontiguousarray(self.labels, dtype=np.uint8)
        self.row_image = np.ascontiguousarray(self.row_image, dtype=np.int32)
        self.row_pixel = np.ascontiguousarray(self.row_pixel, dtype=np.int32)
        if self.features.ndim != 2:
            raise ValueError(f"features must be 2-D, got shape {self.features.shape}")
        rows = self.features.shape[0]
        for name, arr in (("labels", self.labels), ("row_image", self.row_image),
                          ("row_pixel", self.row_pixel)):
            if arr.shape != (rows,):
                raise ValueError(f"{name} length {arr.shape} != feature rows {rows}")
        if self.labels.size and not np.isin(self.labels, (0, 1)).all():
            raise ValueError("labels must contain only 0 and 1")

    @property
    def rows(self) -> int:
        return self.features.shape[0]

    @property
    def cols(self) -> int:
        return self.features.shape[1]

    def provenance(self, i: int) -> tuple[str, int]:
        return self.image_ids[self.row_image[i]], int(self.row_pixel[i])

    def class_counts(self) -> tuple[int, int]:
        pos = int(self.labels.sum())
        return self.rows - pos, pos

    def take(self, idx: np.ndarray) -> "LabeledPixels":
        return LabeledPixels(
            features=self.features[idx],
            labels=self.labels[idx],
            image_ids=self.image_ids,
            row_image=self.row_image[idx],
            row_pixel=self.row_pixel[idx],
        )


def build_dense_hypercolumn(sample: Sample, cfg: HypercolumnConfig) -> LabeledPixels:
    """Upsample every tap to the input size, concat channels, flatten to rows.

    Row y*W + x carries pixel (y, x); its label is the mask value there.
    """
    problems = validate_sample(sample, cfg)
    if problems:
        raise ValueError(f"invalid sample {sample.image_id!r}: " + "; ".join(problems))
    upsampled = [bilinear_upsample(t, cfg.input_h, cfg.input_w) for t in sample.taps]
    features = flatten_pixels(concat_channels(upsampled))
    rows = cfg.input_h * cfg.input_w
    return LabeledPixels(
        features=features,
        labels=sample.mask.reshape(rows),
        image_ids=(sample.image_id,),
        row_image=np.zeros(rows, dtype=np.int32),
        row_pixel=np.arange(rows, dtype=np.int32),
    )


def concat_hypercolumns(parts: list[LabeledPixels]) -> LabeledPixels:
    """Stack hypercolumns row-wise, in list order, keeping provenance intact."""
    if not parts:
        raise ValueError("concat_hypercolumns requires at least one part")
    cols = parts[0].cols
    for i, p in enumerate(parts):
        if p.cols != cols:
            raise ValueError(f"column mismatch: part 0 has {cols}, part {i} has {p.cols}")
    if len(parts) == 1:
        p = parts[0]
        return LabeledPixels(p.features.copy(), p.labels.copy(), p.image_ids,
                             p.row_image.copy(), p.row_pixel.copy())

    merged_ids: list[str] = []
    seen: dict[str, int] = {}
    remaps = []
    for p in parts:
        remap = np.empty(len(p.image_ids), dtype=np.int32)
        for j, img in enumerate(p.image_ids):
            if img not in seen:
                seen[img] = len(merged_ids)
                merged_ids.append(img)
            remap[j] = seen[img]
        remaps.append(remap)

    return LabeledPixels(
        features=np.concatenate([p.features for p in parts], axis=0),
        labels=np.concatenate([p.labels for p in parts]),
        image_ids=tuple(merged_ids),
        row_image=np.concatenate([remap[p.row_image] for p, remap in zip(parts, remaps)]),
        row_pixel=np.concatenate([p.row_pixel for p in parts]),
    )


def stratified_count(rate: float, class_rows: int) -> int:
    """Rows to keep for one class: round(rate*M) half-up, at least 1 when M>=1."""
    if class_rows == 0:
        return 0
    n = int(math.floor(rate * class_rows + 0.5))
    return max(n, 1) if rate < 1.0 else class_rows


def select_stratified_indices(labels: np.ndarray, rate: float, seed: int) -> np.ndarray:
    """Choose row indices for a class-stratified subsample, sorted ascending.

    Per class, draws round(rate*M_c) rows uniformly without replacement via a
    seeded shuffle of that class's index list.  Counts depend only on rate and
    the class sizes, never on the seed.
    """
    if not (0.0 < rate <= 1.0):
        raise ValueError(f"rate must be in (0, 1], got {rate}")
    labels = np.asarray(labels)
    if rate == 1.0:
        return np.arange(labels.shape[0], dtype=np.int64)
    chosen = []
    for cls in (0, 1):
        idx = np.flatnonzero(labels == cls)
        n = stratified_count(rate, idx.size)
        if n == 0:
            continue
        if n == idx.size:
            chosen.append(idx)
            continue
        rng = rng_for("stratified", seed, cls)
        chosen.append(rng.permutation(idx)[:n])
    if not chosen:
        return np.empty(0, dtype=np.int64)
    return np.sort(np.concatenate(chosen))


def stratified_subsample(lp: LabeledPixels, rate: float, seed: int) -> LabeledPixels:
    """Class-stratified row subsample; output rows keep ascending input order."""
    idx = select_stratified_indices(lp.labels, rate, seed)
    return lp.take(idx)
