"""Orthographic forward model: voxel grid -> depth, silhouette and normal sketches."""

from __future__ import annotations

import numpy as np

from .grid import ViewAxis, VoxelGrid, reorient
from .sketch import BACKGROUND, DepthMap, NormalMap, SilhouetteMask, SketchSet

FRONTAL = np.array([0.0, 0.0, -1.0])

# 8-neighbourhood scan order used when a normal has to be copied
_NEIGHBOURS = ((-1, 0), (1, 0), (0, -1), (0, 1), (-1, -1), (1, -1), (-1, 1), (1, 1))


def _check_tau(tau: float) -> None:
    if not 0.0 < tau < 1.0:
        raise ValueError(f"tau must lie in (0, 1), got {tau}")


def render_depth(grid: VoxelGrid, tau: float = 0.5) -> DepthMap:
    """First-hit depth: ``min{z : v[x, y, z] >= tau}``, +inf where the ray misses."""
    _check_tau(tau)
    hit = grid.values >= tau
    first = np.argmax(hit, axis=2).astype(np.float64)
    first[~hit.any(axis=2)] = BACKGROUND
    return DepthMap(first)


def render_silhouette(grid: VoxelGrid, tau: float = 0.5) -> SilhouetteMask:
    _check_tau(tau)
    return SilhouetteMask((grid.values >= tau).any(axis=2))


def _axis_slope(d: np.ndarray, fg: np.ndarray, axis: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-pixel depth derivative along ``axis`` and a mask of where it exists."""
    pad_d = np.pad(d, [(1, 1) if a == axis else (0, 0) for a in range(2)], constant_values=BACKGROUND)
    pad_f = np.pad(fg, [(1, 1) if a == axis else (0, 0) for a in range(2)], constant_values=False)
    sl = [slice(None), slice(None)]
    sl[axis] = slice(0, -2)
    prev_d, prev_f = pad_d[tuple(sl)], pad_f[tuple(sl)]
    sl[axis] = slice(2, None)
    next_d, next_f = pad_d[tuple(sl)], pad_f[tuple(sl)]

    slope = np.zeros_like(d)
    both = fg & prev_f & next_f
    fwd = fg & next_f & ~prev_f
    bwd = fg & prev_f & ~next_f
    with np.errstate(invalid="ignore"):
        slope[both] = 0.5 * (next_d[both] - prev_d[both])
        slope[fwd] = next_d[fwd] - d[fwd]
        slope[bwd] = d[bwd] - prev_d[bwd]
    return slope, both | fwd | bwd


def render_normals(depth: DepthMap) -> NormalMap:
    """Screen-space normals ``(dd/dx, dd/dy, -1)`` normalised, from finite differences.

    Foreground pixels with no foreground neighbour along x or y take the normal
    of the 8-neighbour whose depth is closest (repeated until nothing changes);
    isolated pixels fall back to the frontal normal ``(0, 0, -1)``.
    """
    d = depth.values
    fg = depth.foreground
    sx, okx = _axis_slope(d, fg, 0)
    sy, oky = _axis_slope(d, fg, 1)

    n = np.zeros(d.shape + (3,))
    ok = okx & oky
    raw = np.stack([sx[ok], sy[ok], -np.ones(int(ok.sum()))], axis=1)
    n[ok] = raw / np.linalg.norm(raw, axis=1, keepdims=True)

    pending = fg & ~ok
    w, h = d.shape
    while pending.any():
        filled = []
        for x, y in np.argwhere(pending):
            best = None
            for dx, dy in _NEIGHBOURS:
                u, v = x + dx, y + dy
                if 0 <= u < w and 0 <= v < h and ok[u, v]:
                    gap = abs(d[u, v] - d[x, y])
                    if best is None or gap < best[0]:
                        best = (gap, u, v)
            if best is not None:
                filled.append((x, y, best[1], best[2]))
        if not filled:
            break
        # copy from the previous round's values so the result is order-independent
        for x, y, u, v in filled:
            n[x, y] = n[u, v]
        for x, y, _, _ in filled:
            ok[x, y] = True
            pending[x, y] = False
    n[pending] = FRONTAL
    return NormalMap(n)


def render_sketchset(grid: VoxelGrid, view: ViewAxis = ViewAxis.POS_Z, tau: float = 0.5) -> SketchSet:
    view = ViewAxis.parse(view)
    local = reorient(grid, view)
    depth = render_depth(local, tau)
    return SketchSet(depth, render_normals(depth), SilhouetteMask(depth.foreground), view)
