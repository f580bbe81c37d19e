"""Voxel occupancy grids, axis-aligned view reorientation and the VGRD file format.

Coordinates are ``(x, y, z)`` with ``values[x, y, z]``. The canonical camera
looks along +Z: pixel ``(x, y)`` of a rendered sketch sees the column
``values[x, y, :]`` and depth grows with ``z``.

Reorientation table (``n*`` are the source axis lengths). Every entry is a
proper rotation, so the ``(x, y, depth)`` frame stays right-handed::

    view  new x      new y      new depth
    +z    x          y          z
    -z    nx-1-x     y          nz-1-z
    +x    nz-1-z     y          x
    -x    z          y          nx-1-x
    +y    x          nz-1-z     y
    -y    x          z          ny-1-y
"""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

VGRD_MAGIC = b"VGRD"
RANGE_SLACK = 1e-6


class FormatError(ValueError):
    """Raised when a file does not parse; ``offset`` is the failing byte position."""

    def __init__(self, message: str, offset: int, path=None):
        where = f"{path}: " if path is not None else ""
        super().__init__(f"{where}{message} (byte offset {offset})")
        self.offset = offset
        self.path = path


class ViewAxis(enum.Enum):
    POS_X = "+x"
    NEG_X = "-x"
    POS_Y = "+y"
    NEG_Y = "-y"
    POS_Z = "+z"
    NEG_Z = "-z"

    @classmethod
    def parse(cls, text: "str | ViewAxis") -> "ViewAxis":
        if isinstance(text, ViewAxis):
            return text
        key = text.strip().lower()
        for view in cls:
            if view.value == key:
                return view
        raise ValueError(f"unknown view {text!r}; expected one of {[v.value for v in cls]}")

    @property
    def inverse(self) -> "ViewAxis":
        """The view whose reorientation undoes this one."""
        return _INVERSE[self]

    def __str__(self) -> str:
        return self.value


# new axis k takes source axis perm[k]; listed new axes are then reversed
_REORIENT: dict[ViewAxis, tuple[tuple[int, int, int], tuple[int, ...]]] = {
    ViewAxis.POS_Z: ((0, 1, 2), ()),
    ViewAxis.NEG_Z: ((0, 1, 2), (0, 2)),
    ViewAxis.POS_X: ((2, 1, 0), (0,)),
    ViewAxis.NEG_X: ((2, 1, 0), (2,)),
    ViewAxis.POS_Y: ((0, 2, 1), (1,)),
    ViewAxis.NEG_Y: ((0, 2, 1), (2,)),
}

_INVERSE = {
    ViewAxis.POS_Z: ViewAxis.POS_Z,
    ViewAxis.NEG_Z: ViewAxis.NEG_Z,
    ViewAxis.POS_X: ViewAxis.NEG_X,
    ViewAxis.NEG_X: ViewAxis.POS_X,
    ViewAxis.POS_Y: ViewAxis.NEG_Y,
    ViewAxis.NEG_Y: ViewAxis.POS_Y,
}


@dataclass(frozen=True, eq=False)
class VoxelGrid:
    """Dense occupancy field with every value in [0, 1]."""

    values: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=np.float64)
        if arr.ndim != 3 or min(arr.shape) < 1:
            raise ValueError(f"voxel grid must be 3-D with positive dims, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)) or arr.min() < 0.0 or arr.max() > 1.0:
            raise ValueError("voxel values must lie in [0, 1]")
        object.__setattr__(self, "values", arr)

    @property
    def dims(self) -> tuple[int, int, int]:
        return tuple(int(s) for s in self.values.shape)  # type: ignore[return-value]

    def occupied_count(self, tau: float = 0.5) -> int:
        return int(np.count_nonzero(self.values >= tau))

    def __eq__(self, other) -> bool:
        if not isinstance(other, VoxelGrid):
            return NotImplemented
        return self.dims == other.dims and bool(np.array_equal(self.values, other.values))

    def __repr__(self) -> str:
        return f"VoxelGrid(dims={self.dims}, occupied={self.occupied_count()})"


def new_filled(dims, value: float) -> VoxelGrid:
    dims = tuple(int(d) for d in dims)
    if len(dims) != 3 or min(dims) < 1:
        raise ValueError(f"dims must be three positive integers, got {dims}")
    if not 0.0 <= value <= 1.0:
        raise ValueError(f"fill value {value} outside [0, 1]")
    return VoxelGrid(np.full(dims, float(value)))


def binarize(grid: VoxelGrid, tau: float = 0.5) -> VoxelGrid:
    """Cells with ``v >= tau`` become 1, the rest 0."""
    if not 0.0 < tau <= 1.0:
        raise ValueError(f"tau must lie in (0, 1], got {tau}")
    return VoxelGrid((grid.values >= tau).astype(np.float64))


def reorient_array(arr: np.ndarray, view: ViewAxis) -> np.ndarray:
    perm, flips = _REORIENT[ViewAxis.parse(view)]
    out = np.transpose(arr, perm)
    if flips:
        out = np.flip(out, axis=flips)
    return np.ascontiguousarray(out)


def unorient_array(arr: np.ndarray, view: ViewAxis) -> np.ndarray:
    """Exact inverse of :func:`reorient_array` (maps view-frame data back)."""
    perm, flips = _REORIENT[ViewAxis.parse(view)]
    if flips:
        arr = np.flip(arr, axis=flips)
    return np.ascontiguousarray(np.transpose(arr, np.argsort(perm)))


def reorient(grid: VoxelGrid, view: ViewAxis) -> VoxelGrid:
    """Permute/reflect ``grid`` so that looking along ``view`` becomes looking along +Z."""
    return VoxelGrid(reorient_array(grid.values, view))


def view_dims(dims, view: ViewAxis) -> tuple[int, int, int]:
    perm, _ = _REORIENT[ViewAxis.parse(view)]
    return tuple(int(dims[p]) for p in perm)  # type: ignore[return-value]


def write_vgrd(grid: VoxelGrid, path) -> None:
    nx, ny, nz = grid.dims
    payload = np.ascontiguousarray(grid.values, dtype="<f4").tobytes()
    with open(path, "wb") as fh:
        fh.write(VGRD_MAGIC + struct.pack("<III", nx, ny, nz) + payload)


def read_vgrd(path) -> VoxelGrid:
    data = Path(path).read_bytes()
    if len(data) < 16:
        raise FormatError("truncated VGRD header", len(data), path)
    if data[:4] != VGRD_MAGIC:
        raise FormatError(f"bad magic {data[:4]!r}, expected {VGRD_MAGIC!r}", 0, path)
    nx, ny, nz = struct.unpack_from("<III", data, 4)
    if min(nx, ny, nz) < 1:
        raise FormatError(f"non-positive dims {(nx, ny, nz)}", 4, path)
    expected = 16 + 4 * nx * ny * nz
    if len(data) != expected:
        raise FormatError(
            f"payload size mismatch for dims {(nx, ny, nz)}: file has {len(data)} bytes, expected {expected}",
            min(len(data), expected),
            path,
        )
    vals = np.frombuffer(data, dtype="<f4", offset=16).astype(np.float64)
    bad = ~np.isfinite(vals) | (vals < -RANGE_SLACK) | (vals > 1.0 + RANGE_SLACK)
    if bad.any():
        i = int(np.flatnonzero(bad)[0])
        raise FormatError(f"occupancy {vals[i]!r} outside [0, 1]", 16 + 4 * i, path)
    return VoxelGrid(np.clip(vals, 0.0, 1.0).reshape(nx, ny, nz))
