"""Voxel shape refinement by projected momentum descent on reprojection losses.

There is no learned shape prior here; total-variation smoothness and a
binariness term play that role instead.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .consistency import LossConfig, prepare
from .grid import VoxelGrid
from .sketch import SketchSet

# hyperparameters reported for fine-tuning an encoder network; kept for reference
PUBLISHED_LEARNING_RATE = 0.001
PUBLISHED_MOMENTUM = 0.9
PUBLISHED_ITERATIONS = 40

TRAJECTORY_COLUMNS = ("iter", "total", "depth", "normal", "tv", "bin")


@dataclass(frozen=True)
class RefineConfig:
    learning_rate: float = 0.1
    momentum: float = 0.9
    iterations: int = 500
    tv_weight: float = 0.01
    binariness_weight: float = 0.1
    loss: LossConfig = field(default_factory=LossConfig)
    init: str = "uniform(0.5)"  # informational; the caller supplies the initial grid

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError("momentum must lie in [0, 1)")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.tv_weight < 0 or self.binariness_weight < 0:
            raise ValueError("regulariser weights must be >= 0")

    def manifest_items(self) -> list[tuple[str, object]]:
        items = [(k, v) for k, v in asdict(self).items() if k != "loss"]
        items += [(f"loss.{k}", v) for k, v in asdict(self.loss).items()]
        items += [
            ("published.learning_rate", PUBLISHED_LEARNING_RATE),
            ("published.momentum", PUBLISHED_MOMENTUM),
            ("published.iterations", PUBLISHED_ITERATIONS),
        ]
        return items


@dataclass(frozen=True)
class TrajectoryPoint:
    iteration: int
    total: float
    depth: float
    normal: float
    tv: float
    binariness: float


@dataclass(frozen=True, eq=False)
class RefineResult:
    final: VoxelGrid
    trajectory: list[TrajectoryPoint]
    iterations_run: int


def tv_penalty(grid) -> tuple[float, np.ndarray]:
    """Sum of squared forward differences along x, y and z, and its gradient."""
    v = getattr(grid, "values", grid)
    total = 0.0
    grad = np.zeros_like(v)
    for axis in range(3):
        diff = np.diff(v, axis=axis)
        total += float(np.sum(diff * diff))
        lead = [slice(None)] * 3
        lead[axis] = slice(1, None)
        trail = [slice(None)] * 3
        trail[axis] = slice(None, -1)
        grad[tuple(lead)] += 2.0 * diff
        grad[tuple(trail)] -= 2.0 * diff
    return total, grad


def binariness_penalty(grid) -> tuple[float, np.ndarray]:
    """``sum(v * (1 - v))``: zero on binary grids, largest at 0.5."""
    v = getattr(grid, "values", grid)
    return float(np.sum(v * (1.0 - v))), 1.0 - 2.0 * v


def refine(init: VoxelGrid, sketches: Sequence[SketchSet], cfg: RefineConfig = RefineConfig()) -> RefineResult:
    """Projected heavy-ball descent: ``m = mu*m + g; v = clip(v - lr*m, 0, 1)``.

    ``g`` sums the reprojection gradients of every sketch (each in its own view)
    plus the weighted TV and binariness gradients. Losses are recorded at the
    start of every iteration, so ``trajectory[0]`` describes ``init``.
    """
    if not sketches:
        raise ValueError("refine needs at least one sketch")
    dims = init.dims
    constraints = [prepare(dims, s, cfg.loss) for s in sketches]

    v = init.values.copy()
    m = np.zeros_like(v)
    trajectory = []
    for it in range(cfg.iterations):
        flat = v.ravel()
        g = np.zeros(flat.size)
        depth = normal = reproj = 0.0
        for cons in constraints:
            report, grad = cons.evaluate(flat)
            g += grad
            depth += report.depth_loss
            normal += report.normal_loss
            reproj += report.total
        g = g.reshape(dims)
        tv, tv_grad = tv_penalty(v)
        binary, bin_grad = binariness_penalty(v)
        if cfg.tv_weight:
            g += cfg.tv_weight * tv_grad
        if cfg.binariness_weight:
            g += cfg.binariness_weight * bin_grad
        total = reproj + cfg.tv_weight * tv + cfg.binariness_weight * binary
        trajectory.append(TrajectoryPoint(it, total, depth, normal, tv, binary))

        m = cfg.momentum * m + g
        v = np.clip(v - cfg.learning_rate * m, 0.0, 1.0)

    return RefineResult(VoxelGrid(v), trajectory, len(trajectory))
