import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from oracles import random_sketch_arrays  # noqa: E402

from sketchvox.grid import ViewAxis, VoxelGrid  # noqa: E402
from sketchvox.sketch import DepthMap, NormalMap, SilhouetteMask, SketchSet  # noqa: E402


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_instance(rng, n=8, lo=0.0, hi=1.0, view=ViewAxis.POS_Z):
    grid = VoxelGrid(rng.uniform(lo, hi, (n, n, n)))
    depth, normals, fg = random_sketch_arrays(rng, n, n, n)
    sketch = SketchSet(DepthMap(depth), NormalMap(normals), SilhouetteMask(fg), view)
    return grid, sketch


@pytest.fixture
def make_instance(rng):
    def make(n=8, lo=0.0, hi=1.0, view=ViewAxis.POS_Z):
        return random_instance(rng, n, lo, hi, view)

    return make


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
