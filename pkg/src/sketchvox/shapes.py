"""Seeded procedural solid shapes used as ground truth.

Randomness comes from SplitMix64 (Steele, Lea & Flood 2014) with its
standard constants; a uniform draw in [a, b) is ``a + (b - a) * (r >> 11) / 2**53``.
Draws are consumed in the order written in each generator below, so a
``(kind, seed, resolution)`` triple maps to the same grid on every platform.

Layout conventions: ``y`` is the vertical axis with "up" toward ``y = 0``,
so a +Z rendering shows shapes upright in image coordinates. All extents are
drawn from [0.3n, 0.8n] and the bounding-box centre is jittered by at most
0.1n per axis.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .grid import VoxelGrid

MASK64 = (1 << 64) - 1


class SplitMix64:
    def __init__(self, seed: int):
        self.state = seed & MASK64

    def next_u64(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
        return z ^ (z >> 31)

    def uniform(self, lo: float, hi: float) -> float:
        return lo + (hi - lo) * ((self.next_u64() >> 11) / float(1 << 53))


class ShapeKind(str, enum.Enum):
    BOX = "box"
    SPHERE = "sphere"
    CYLINDER = "cylinder"
    CHAIR = "chair"


@dataclass(frozen=True)
class ShapeSpec:
    kind: ShapeKind
    seed: int
    resolution: int

    def __post_init__(self):
        object.__setattr__(self, "kind", ShapeKind(self.kind))
        if self.resolution < 8:
            raise ValueError(f"resolution must be >= 8, got {self.resolution}")
        if not 0 <= self.seed <= MASK64:
            raise ValueError(f"seed must be an unsigned 64-bit integer, got {self.seed}")


def _centres(n: int) -> np.ndarray:
    return np.arange(n) + 0.5


def _interval(centre: float, extent: float, n: int) -> tuple[int, int]:
    lo = int(np.floor(centre - extent / 2 + 0.5))
    hi = lo + max(1, int(np.floor(extent + 0.5)))
    return max(lo, 0), min(hi, n)


def _jittered_centre(rng: SplitMix64, n: int) -> float:
    return n / 2 + rng.uniform(-0.1 * n, 0.1 * n)


def _box(rng: SplitMix64, n: int) -> np.ndarray:
    extents = [rng.uniform(0.3 * n, 0.8 * n) for _ in range(3)]
    centres = [_jittered_centre(rng, n) for _ in range(3)]
    out = np.zeros((n, n, n), dtype=bool)
    (x0, x1), (y0, y1), (z0, z1) = (_interval(c, e, n) for c, e in zip(centres, extents))
    out[x0:x1, y0:y1, z0:z1] = True
    return out


def _sphere(rng: SplitMix64, n: int) -> np.ndarray:
    radius = rng.uniform(0.3 * n, 0.8 * n) / 2
    cx, cy, cz = (_jittered_centre(rng, n) for _ in range(3))
    c = _centres(n)
    r2 = (c[:, None, None] - cx) ** 2 + (c[None, :, None] - cy) ** 2 + (c[None, None, :] - cz) ** 2
    return r2 <= radius * radius


def _cylinder(rng: SplitMix64, n: int) -> np.ndarray:
    radius = rng.uniform(0.3 * n, 0.8 * n) / 2
    height = rng.uniform(0.3 * n, 0.8 * n)
    cx, cy, cz = (_jittered_centre(rng, n) for _ in range(3))
    c = _centres(n)
    disc = (c[:, None] - cx) ** 2 + (c[None, :] - cz) ** 2 <= radius * radius
    y0, y1 = _interval(cy, height, n)
    out = np.zeros((n, n, n), dtype=bool)
    out[:, y0:y1, :] = disc[:, None, :]
    return out


def _chair(rng: SplitMix64, n: int) -> np.ndarray:
    """Seat slab on four corner legs with a full-width backrest at the back (+z)."""
    width = rng.uniform(0.5 * n, 0.8 * n)
    depth = rng.uniform(0.5 * n, 0.8 * n)
    height = rng.uniform(0.6 * n, 0.8 * n)
    leg_share = rng.uniform(0.4, 0.55)
    cx, cy, cz = (_jittered_centre(rng, n) for _ in range(3))

    slab = max(2, int(round(0.08 * n)))
    leg = max(2, int(round(0.1 * n)))
    x0, x1 = _interval(cx, width, n)
    z0, z1 = _interval(cz, depth, n)
    top, bottom = _interval(cy, height, n)
    leg_top = bottom - max(1, int(round(leg_share * (bottom - top))))
    seat_top = leg_top - slab

    out = np.zeros((n, n, n), dtype=bool)
    out[x0:x1, seat_top:leg_top, z0:z1] = True
    out[x0:x1, top:seat_top, z1 - slab : z1] = True
    for lx in (x0, x1 - leg):
        for lz in (z0, z1 - leg):
            out[lx : lx + leg, leg_top:bottom, lz : lz + leg] = True
    return out


_GENERATORS = {
    ShapeKind.BOX: _box,
    ShapeKind.SPHERE: _sphere,
    ShapeKind.CYLINDER: _cylinder,
    ShapeKind.CHAIR: _chair,
}


def generate(spec: ShapeSpec) -> VoxelGrid:
    rng = SplitMix64(spec.seed)
    occ = _GENERATORS[spec.kind](rng, spec.resolution)
    return fill_solid(VoxelGrid(occ.astype(np.float64)))


def fill_solid(grid: VoxelGrid) -> VoxelGrid:
    """Occupy every empty cell not 6-connected through empty cells to the grid boundary."""
    v = grid.values
    if not np.all((v == 0.0) | (v == 1.0)):
        raise ValueError("fill_solid needs a binary grid")
    filled = ndimage.binary_fill_holes(v == 1.0, structure=ndimage.generate_binary_structure(3, 1))
    return VoxelGrid(filled.astype(np.float64))
