"""Dense feature-map operations: bilinear upsampling, channel concat, flattening.

A feature map is a float32 ndarray of shape (channels, height, width); a pixel
matrix is a float32 ndarray of shape (rows, cols) whose row ``y*W + x`` holds
the per-channel vector of pixel (y, x).  All operations are pure functions.
"""

from __future__ import annotations

import numpy as np


def as_feature_map(data: np.ndarray) -> np.ndarray:
    """Validate and coerce an array to (C, H, W) float32 feature-map layout."""
    arr = np.asarray(data)
    if arr.ndim != 3:
        raise ValueError(f"feature map must be 3-D (C, H, W), got shape {arr.shape}")
    if min(arr.shape) < 1:
        raise ValueError(f"feature map dimensions must be positive, got {arr.shape}")
    arr = np.ascontiguousarray(arr, dtype=np.float32)
    if not np.isfinite(arr).all():
        raise ValueError("feature map contains non-finite values")
    return arr


def bilinear_upsample(fm: np.ndarray, target_h: int, target_w: int) -> np.ndarray:
    """Upsample (C, H, W) -> (C, target_h, target_w) with half-pixel centers.

    Source coordinate for output x is ``(x + 0.5) * W/target_w - 0.5``, clamped
    to the valid range (edge clamp), and likewise for y; each output value is
    the bilinear blend of the four clamped neighbours.  Interpolation runs in
    float64 and the result is stored as float32.  Channels are independent.
    """
    fm = as_feature_map(fm)
    c, h, w = fm.shape
    if target_h < h or target_w < w:
        raise ValueError(
            f"target ({target_h}, {target_w}) smaller than source ({h}, {w})"
        )
    if target_h == h and target_w == w:
        return fm.copy()

    src = fm.astype(np.float64)

    ys = np.clip((np.arange(target_h) + 0.5) * (h / target_h) - 0.5, 0.0, h - 1.0)
    xs = np.clip((np.arange(target_w) + 0.5) * (w / target_w) - 0.5, 0.0, w - 1.0)
    y0 = np.floor(ys).astype(np.intp)
    x0 = np.floor(xs).astype(np.intp)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    wy = (ys - y0)[None, :, None]
    wx = (xs - x0)[None, None, :]

    top = src[:, y0[:, None], x0[None, :]] * (1.0 - wx) + src[:, y0[:, None], x1[None, :]] * wx
    bot = src[:, y1[:, None], x0[None, :]] * (1.0 - wx) + src[:, y1[:, None], x1[None, :]] * wx
    out = top * (1.0 - wy) + bot * wy
    return out.astype(np.float32)


def concat_channels(maps: list[np.ndarray]) -> np.ndarray:
    """Stack feature maps along the channel axis, preserving list order."""
    if not maps:
        raise ValueError("concat_channels requires at least one feature map")
    maps = [as_feature_map(m) for m in maps]
    hw = maps[0].shape[1:]
    for i, m in enumerate(maps):
        if m.shape[1:] != hw:
            raise ValueError(
                f"spatial mismatch: map 0 is {hw}, map {i} is {m.shape[1:]}"
            )
    if len(maps) == 1:
        return maps[0].copy()
    return np.concatenate(maps, axis=0)


def flatten_pixels(fm: np.ndarray) -> np.ndarray:
    """Reorder (C, H, W) into a (H*W, C) pixel matrix; row index is y*W + x."""
    fm = as_feature_map(fm)
    c, h, w = fm.shape
    return np.ascontiguousarray(fm.transpose(1, 2, 0).reshape(h * w, c))


def unflatten_pixels(pm: np.ndarray, height: int, width: int) -> np.ndarray:
    """Inverse of flatten_pixels: (H*W, C) back to (C, H, W)."""
    pm = np.asarray(pm, dtype=np.float32)
    if pm.ndim != 2:
        raise ValueError(f"pixel matrix must be 2-D, got shape {pm.shape}")
    rows, cols = pm.shape
    if rows != height * width:
        raise ValueError(f"{rows} rows cannot reshape to {height}x{width} pixels")
    return np.ascontiguousarray(pm.reshape(height, width, cols).transpose(2, 0, 1))
