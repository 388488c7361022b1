"""Synthetic multi-scale segmentation datasets with controllable difficulty.

Each generated image is an elliptical foreground blob on a dark background.
Tap k is a single-channel map at its own scale whose intensity tracks the
blob (downsampled by block averaging) with additive pixel noise, plus a
per-image intensity offset shared by every pixel of that image.  Offsets are
drawn orthogonal to the vector of tap amplitudes, so the amplitude-weighted
channel combination separates the classes across images while individual
channels drift from image to image — linear models generalize, per-feature
threshold rules degrade, which is the regime the pipeline targets.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .hcf import Sample, write_container_file
from .seeding import rng_for

DEFAULT_TAP_SCALES = (224, 112, 56, 28, 14)
DEFAULT_AMPS = (2.0, 1.6, 1.2, 1.0, 0.8)


@dataclass(frozen=True)
class SyntheticSpec:
    size: int = 224
    tap_scales: tuple[int, ...] = DEFAULT_TAP_SCALES
    amps: tuple[float, ...] = DEFAULT_AMPS
    noise: float = 0.35          # per-pixel noise std at native tap scale
    offset_scale: float = 0.6    # per-image offset std before projection
    min_axis: float = 0.08       # ellipse semi-axis range, fraction of size
    max_axis: float = 0.20

    def __post_init__(self):
        if len(self.amps) != len(self.tap_scales):
            raise ValueError("one amplitude per tap scale required")
        for s in self.tap_scales:
            if self.size % s != 0:
                raise ValueError(f"tap scale {s} does not divide size {self.size}")


def ellipse_mask(size: int, rng: np.random.Generator, min_axis: float,
                 max_axis: float) -> np.ndarray:
    """Random rotated ellipse as a uint8 {0,1} grid."""
    cy, cx = rng.uniform(0.3 * size, 0.7 * size, size=2)
    a = rng.uniform(min_axis * size, max_axis * size)
    b = rng.uniform(min_axis * size, max_axis * size)
    theta = rng.uniform(0.0, np.pi)
    yy, xx = np.mgrid[0:size, 0:size]
    dy, dx = yy - cy, xx - cx
    u = dx * np.cos(theta) + dy * np.sin(theta)
    v = -dx * np.sin(theta) + dy * np.cos(theta)
    return ((u / a) ** 2 + (v / b) ** 2 <= 1.0).astype(np.uint8)


def block_mean(grid: np.ndarray, target: int) -> np.ndarray:
    """Downsample a square grid by averaging equal blocks."""
    size = grid.shape[0]
    f = size // target
    return grid.reshape(target, f, target, f).mean(axis=(1, 3))


def synthetic_sample(index: int, seed: int, spec: SyntheticSpec = SyntheticSpec()) -> Sample:
    """Deterministic sample ``index`` of the dataset keyed by ``seed``."""
    rng = rng_for("synthetic", seed, index)
    mask = ellipse_mask(spec.size, rng, spec.min_axis, spec.max_axis)

    amps = np.asarray(spec.amps, dtype=np.float64)
    unit = amps / np.linalg.norm(amps)
    offset = rng.normal(0.0, spec.offset_scale, size=amps.size)
    offset -= (offset @ unit) * unit  # keep the amplitude direction clean

    blob = mask.astype(np.float64)
    taps = []
    for k, scale in enumerate(spec.tap_scales):
        local = blob if scale == spec.size else block_mean(blob, scale)
        tap = amps[k] * local + offset[k] + rng.normal(0.0, spec.noise, size=(scale, scale))
        taps.append(tap[None, :, :].astype(np.float32))
    return Sample(image_id=f"synth-{index:04d}", taps=taps, mask=mask)


def make_synthetic_dataset(out_dir, n_images: int = 60, n_train: int = 40,
                           seed: int = 7,
                           spec: SyntheticSpec = SyntheticSpec()) -> str:
    """Write ``n_images`` HCF containers plus a manifest; returns manifest path.

    The first ``n_train`` images form the training split, the rest the test
    split.  Re-running with the same arguments reproduces every byte.
    """
    if not (0 < n_train < n_images):
        raise ValueError("need 0 < n_train < n_images")
    os.makedirs(out_dir, exist_ok=True)
    lines = []
    for i in range(n_images):
        sample = synthetic_sample(i, seed, spec)
        fname = f"{sample.image_id}.hcf"
        write_container_file(sample, os.path.join(out_dir, fname))
        lines.append(("train" if i < n_train else "test") + " " + fname)
    manifest_path = os.path.join(out_dir, "manifest.txt")
    with open(manifest_path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    return manifest_path
