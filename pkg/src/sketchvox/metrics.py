"""Shape evaluation: voxel IoU, IoU with a scale search, visible-depth agreement."""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from .grid import VoxelGrid, reorient
from .render import render_depth
from .sketch import SketchSet


def default_scales() -> list[float]:
    """20 log-uniform scales in [0.5, 2.0] plus the identity scale."""
    scales = np.geomspace(0.5, 2.0, 20).tolist()
    return sorted(set(scales) | {1.0})


def _check_dims(a: VoxelGrid, b: VoxelGrid) -> None:
    if a.dims != b.dims:
        raise ValueError(f"grid dims differ: {a.dims} vs {b.dims}")


def _iou_masks(a: np.ndarray, b: np.ndarray) -> float:
    union = np.count_nonzero(a | b)
    if union == 0:
        return 1.0
    return np.count_nonzero(a & b) / union


def iou(a: VoxelGrid, b: VoxelGrid, tau: float = 0.5) -> float:
    """|A and B| / |A or B| of the grids binarized at ``v >= tau``; 1.0 if both are empty."""
    _check_dims(a, b)
    return _iou_masks(a.values >= tau, b.values >= tau)


def rescale_mask(mask: np.ndarray, scale: float, out_dims=None) -> np.ndarray:
    """Nearest-neighbour rescale of a boolean grid about its geometric centre."""
    src = np.asarray(mask, dtype=bool)
    out_dims = src.shape if out_dims is None else tuple(out_dims)
    idx, valid = [], []
    for n_src, n_out in zip(src.shape, out_dims):
        pos = np.floor(n_src / 2 + (np.arange(n_out) + 0.5 - n_out / 2) / scale).astype(np.int64)
        valid.append((pos >= 0) & (pos < n_src))
        idx.append(np.clip(pos, 0, n_src - 1))
    inside = valid[0][:, None, None] & valid[1][None, :, None] & valid[2][None, None, :]
    return src[np.ix_(*idx)] & inside


def iou_scale_search(
    pred: VoxelGrid, gt: VoxelGrid, tau: float = 0.5, scales: Sequence[float] | None = None
) -> tuple[float, float]:
    """Best IoU over rescalings of ``pred``; returns ``(best_iou, best_scale)``.

    Ties go to the scale closest to 1.0 in log distance, then to the smaller scale.
    """
    _check_dims(pred, gt)
    scales = default_scales() if scales is None else list(scales)
    if not scales or any(s <= 0 for s in scales):
        raise ValueError("scales must be a non-empty list of positive numbers")
    p = pred.values >= tau
    g = gt.values >= tau
    best = None
    for s in scales:
        score = _iou_masks(rescale_mask(p, s, g.shape), g)
        key = (-score, abs(math.log(s)), s)
        if best is None or key < best[0]:
            best = (key, score, s)
    return best[1], float(best[2])


def depth_agreement(pred: VoxelGrid, sketch: SketchSet, tau: float = 0.5, tol_voxels: float = 1.0) -> float:
    """Share of sketch-foreground pixels whose rendered depth is within ``tol_voxels``."""
    local = reorient(pred, sketch.view)
    if local.dims[:2] != sketch.size:
        raise ValueError(f"grid dims {pred.dims} seen from {sketch.view} do not match sketch size {sketch.size}")
    target = sketch.depth.values
    fg = np.isfinite(target)
    if not fg.any():
        return 1.0
    rendered = render_depth(local, tau).values
    both = fg & np.isfinite(rendered)
    close = np.zeros_like(fg)
    close[both] = np.abs(rendered[both] - target[both]) <= tol_voxels
    return float(np.count_nonzero(close) / np.count_nonzero(fg))
