"""Depth, silhouette and surface-normal reprojection losses with analytic gradients.

Per voxel along the ray of pixel ``(x, y)`` with surface depth ``d``::

    depth loss      v**2          if z < d   (also every z when d is background)
                    (1 - v)**2    if z == d
                    0             if z > d

For a foreground pixel at ``z = round(d)`` with normal ``(na, nb, nc)`` the
normal loss asks four neighbouring voxels to be occupied::

    (x, y-1, z + nb/nc)   (x, y+1, z - nb/nc)
    (x-1, y, z + na/nc)   (x+1, y, z - na/nc)

each contributing ``(1 - v_target)**2``. Fractional target depths are rounded
to nearest with ties away from zero. A target counts only if it lies in the
grid and its own pixel is inside the silhouette; ``|nc| < nc_epsilon`` skips
the pixel. The objective is ``depth + normal_weight * normal`` summed, not
averaged, over the image.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import ViewAxis, VoxelGrid, reorient_array, view_dims
from .sketch import BACKGROUND, SketchSet

ROUND_NEAREST = "round-nearest"


@dataclass(frozen=True)
class LossConfig:
    normal_weight: float = 0.5
    nc_epsilon: float = 0.1
    fractional_policy: str = ROUND_NEAREST

    def __post_init__(self):
        if self.normal_weight < 0:
            raise ValueError(f"normal_weight must be >= 0, got {self.normal_weight}")
        if self.nc_epsilon <= 0:
            raise ValueError(f"nc_epsilon must be > 0, got {self.nc_epsilon}")
        if self.fractional_policy != ROUND_NEAREST:
            raise ValueError(f"unsupported fractional_policy {self.fractional_policy!r}")


@dataclass(frozen=True)
class LossReport:
    depth_loss: float
    normal_loss: float
    total: float
    depth_terms: int
    normal_terms: int

    def as_lines(self) -> list[str]:
        return [
            f"depth_loss={self.depth_loss:.17g}",
            f"normal_loss={self.normal_loss:.17g}",
            f"total={self.total:.17g}",
            f"depth_terms={self.depth_terms}",
            f"normal_terms={self.normal_terms}",
        ]


def round_half_away(x):
    """Round to nearest integer, ties away from zero."""
    x = np.asarray(x, dtype=np.float64)
    return (np.sign(x) * np.floor(np.abs(x) + 0.5)).astype(np.int64)


def _is_background(d) -> bool:
    return d is None or d == BACKGROUND


# ---------------------------------------------------------------------------
# scalar forms


def depth_loss_at(v: float, z: int, d) -> float:
    if _is_background(d) or z < d:
        return v * v
    if z == d:
        return (1.0 - v) ** 2
    return 0.0


def depth_grad_at(v: float, z: int, d) -> float:
    if _is_background(d) or z < d:
        return 2.0 * v
    if z == d:
        return 2.0 * (v - 1.0)
    return 0.0


def ray_depth_loss(column, d) -> float:
    """Depth loss summed along one ray; a background ``d`` gives ``sum(v**2)``.

    Terms are accumulated front to back, one at a time.
    """
    col = [float(v) for v in np.asarray(column, dtype=np.float64).ravel()]
    if not _is_background(d) and (d != int(d) or d < 0 or d >= len(col)):
        raise ValueError(f"depth {d} is not a layer index of a column of length {len(col)}")
    total = 0.0
    for z, v in enumerate(col):
        total += depth_loss_at(v, z, d)
    return total


def _normal_targets(x: int, y: int, z: int, n) -> list[tuple[int, int, int]]:
    na, nb, nc = (float(c) for c in n)
    rb, ra = nb / nc, na / nc
    return [
        (x, y - 1, int(round_half_away(z + rb))),
        (x, y + 1, int(round_half_away(z - rb))),
        (x - 1, y, int(round_half_away(z + ra))),
        (x + 1, y, int(round_half_away(z - ra))),
    ]


def normal_loss_at(grid: VoxelGrid, x: int, y: int, z: int, n, sil, cfg: LossConfig = LossConfig()):
    """Normal loss of one pixel; returns ``(loss, term_count)``.

    ``grid`` must already be in the sketch's view frame; ``sil`` is a
    :class:`SilhouetteMask` or boolean array indexed ``[x, y]``.
    """
    if abs(float(n[2])) < cfg.nc_epsilon:
        return 0.0, 0
    sil = getattr(sil, "values", sil)
    nx, ny, nz = grid.dims
    loss, count = 0.0, 0
    for tx, ty, tz in _normal_targets(x, y, z, n):
        if 0 <= tx < nx and 0 <= ty < ny and 0 <= tz < nz and sil[tx, ty]:
            loss += (1.0 - grid.values[tx, ty, tz]) ** 2
            count += 1
    return loss, count


# ---------------------------------------------------------------------------
# whole-image form


@dataclass(frozen=True, eq=False)
class Constraints:
    """Loss supports of one sketch expressed as flat indices into the *source* grid.

    ``front`` holds cells pushed toward 0, ``hit`` cells pushed toward 1 by the
    depth loss, and ``targets`` the normal-loss targets (with multiplicity).
    """

    dims: tuple[int, int, int]
    front: np.ndarray
    hit: np.ndarray
    targets: np.ndarray
    normal_weight: float

    def evaluate(self, flat: np.ndarray, want_grad: bool = True):
        vf = flat[self.front]
        vh = flat[self.hit]
        vt = flat[self.targets]
        depth = float(np.sum(vf * vf) + np.sum((1.0 - vh) ** 2))
        normal = float(np.sum((1.0 - vt) ** 2))
        report = LossReport(
            depth_loss=depth,
            normal_loss=normal,
            total=depth + self.normal_weight * normal,
            depth_terms=int(self.front.size + self.hit.size),
            normal_terms=int(self.targets.size),
        )
        if not want_grad:
            return report, None
        grad = np.zeros(flat.size)
        grad[self.front] = 2.0 * vf
        grad[self.hit] = 2.0 * (vh - 1.0)
        if self.targets.size:
            grad += self.normal_weight * np.bincount(self.targets, weights=2.0 * (vt - 1.0), minlength=flat.size)
        return report, grad


def prepare(dims, sketch: SketchSet, cfg: LossConfig = LossConfig()) -> Constraints:
    """Precompute the constraint supports of ``sketch`` for a grid of ``dims``."""
    dims = tuple(int(s) for s in dims)
    view = ViewAxis.parse(sketch.view)
    lx, ly, lz = view_dims(dims, view)
    if sketch.size != (lx, ly):
        raise ValueError(
            f"sketch size {sketch.size} does not match grid dims {dims} seen from {view} "
            f"(expected {(lx, ly)})"
        )
    # view-frame cell -> flat index in the source grid
    index = reorient_array(np.arange(np.prod(dims)).reshape(dims), view)

    d = sketch.depth.values
    fg = d != BACKGROUND
    layer = np.full(d.shape, lz, dtype=np.int64)
    layer[fg] = round_half_away(d[fg])
    if fg.any() and (layer[fg].min() < 0 or layer[fg].max() >= lz):
        bad = np.argwhere(fg & ((layer < 0) | (layer >= lz)))[0]
        raise ValueError(f"depth {d[tuple(bad)]} at pixel {tuple(bad)} outside the grid's {lz} depth layers")
    z = np.arange(lz)
    front = z[None, None, :] < layer[:, :, None]
    hit = z[None, None, :] == layer[:, :, None]

    targets = _image_targets(layer, fg, sketch, (lx, ly, lz), cfg)
    return Constraints(
        dims=dims,
        front=index[front],
        hit=index[hit],
        targets=index[targets] if targets[0].size else np.zeros(0, dtype=np.int64),
        normal_weight=cfg.normal_weight,
    )


def _image_targets(layer, fg, sketch: SketchSet, local_dims, cfg: LossConfig):
    lx, ly, lz = local_dims
    n = sketch.normal.values
    sil = sketch.silhouette.values
    src = fg & (np.abs(n[:, :, 2]) >= cfg.nc_epsilon)
    xs, ys = np.nonzero(src)
    zs = layer[xs, ys]
    na, nb, nc = n[xs, ys, 0], n[xs, ys, 1], n[xs, ys, 2]
    rb, ra = nb / nc, na / nc
    tx = np.concatenate([xs, xs, xs - 1, xs + 1])
    ty = np.concatenate([ys - 1, ys + 1, ys, ys])
    tz = np.concatenate(
        [round_half_away(zs + rb), round_half_away(zs - rb), round_half_away(zs + ra), round_half_away(zs - ra)]
    )
    keep = (tx >= 0) & (tx < lx) & (ty >= 0) & (ty < ly) & (tz >= 0) & (tz < lz)
    tx, ty, tz = tx[keep], ty[keep], tz[keep]
    keep = sil[tx, ty]
    return tx[keep], ty[keep], tz[keep]


def total_loss(grid: VoxelGrid, sketch: SketchSet, cfg: LossConfig = LossConfig()) -> LossReport:
    report, _ = prepare(grid.dims, sketch, cfg).evaluate(grid.values.ravel(), want_grad=False)
    return report


def total_loss_grad(grid: VoxelGrid, sketch: SketchSet, cfg: LossConfig = LossConfig()):
    """Loss report and d(total)/dv as an array shaped like ``grid`` (source frame)."""
    report, grad = prepare(grid.dims, sketch, cfg).evaluate(grid.values.ravel())
    return report, grad.reshape(grid.dims)


def finite_diff_check(
    grid: VoxelGrid,
    sketch: SketchSet,
    cfg: LossConfig = LossConfig(),
    h: float = 1e-3,
    samples: int = 200,
    seed: int = 0,
) -> float:
    """Largest |analytic - numeric| gradient gap over ``samples`` random cells.

    Central differences are used where ``v +- h`` stays in [0, 1]; near the
    box boundary the second-order one-sided stencil is used instead.
    """
    if h <= 0:
        raise ValueError(f"h must be > 0, got {h}")
    cons = prepare(grid.dims, sketch, cfg)
    flat = grid.values.ravel().copy()
    _, grad = cons.evaluate(flat)
    rng = np.random.default_rng(seed)
    cells = rng.choice(flat.size, size=min(samples, flat.size), replace=False)

    def loss_at(i, value):
        old = flat[i]
        flat[i] = value
        out = cons.evaluate(flat, want_grad=False)[0].total
        flat[i] = old
        return out

    worst = 0.0
    for i in cells:
        v = flat[i]
        if v - h >= 0.0 and v + h <= 1.0:
            numeric = (loss_at(i, v + h) - loss_at(i, v - h)) / (2 * h)
        elif v + 2 * h <= 1.0:
            numeric = (-3 * loss_at(i, v) + 4 * loss_at(i, v + h) - loss_at(i, v + 2 * h)) / (2 * h)
        else:
            numeric = (3 * loss_at(i, v) - 4 * loss_at(i, v - h) + loss_at(i, v - 2 * h)) / (2 * h)
        worst = max(worst, abs(grad[i] - numeric))
    return float(worst)
