"""2.5D sketches (depth, surface normal, silhouette) and their file formats.

In memory every map is indexed ``[x, y]`` so that pixel ``(x, y)`` lines up
with voxel column ``values[x, y, :]``. Image row 0 is ``y = 0``.

On disk:

* depth -> grayscale PFM (``Pf``), scale ``-1.0`` (little-endian), rows
  written bottom-to-top, background stored as ``+inf``;
* normals -> color PFM (``PF``), undefined pixels stored as ``(0, 0, 0)``;
* silhouette -> binary PGM (``P5``), maxval 255, foreground 255, rows
  top-to-bottom; on read any value >= 128 is foreground.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .grid import FormatError, ViewAxis

UNIT_TOL = 1e-5
BACKGROUND = np.inf


@dataclass(frozen=True, eq=False)
class DepthMap:
    values: np.ndarray  # (width, height), +inf on background

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=np.float64)
        if arr.ndim != 2:
            raise ValueError(f"depth map must be 2-D, got shape {arr.shape}")
        object.__setattr__(self, "values", arr)

    @property
    def width(self) -> int:
        return self.values.shape[0]

    @property
    def height(self) -> int:
        return self.values.shape[1]

    @property
    def foreground(self) -> np.ndarray:
        return self.values != BACKGROUND


@dataclass(frozen=True, eq=False)
class NormalMap:
    values: np.ndarray  # (width, height, 3), zeros where undefined

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=np.float64)
        if arr.ndim != 3 or arr.shape[2] != 3:
            raise ValueError(f"normal map must have shape (w, h, 3), got {arr.shape}")
        object.__setattr__(self, "values", arr)

    @property
    def width(self) -> int:
        return self.values.shape[0]

    @property
    def height(self) -> int:
        return self.values.shape[1]

    @property
    def defined(self) -> np.ndarray:
        return np.any(self.values != 0.0, axis=2)


@dataclass(frozen=True, eq=False)
class SilhouetteMask:
    values: np.ndarray  # (width, height) bool

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=bool)
        if arr.ndim != 2:
            raise ValueError(f"silhouette must be 2-D, got shape {arr.shape}")
        object.__setattr__(self, "values", arr)

    @property
    def width(self) -> int:
        return self.values.shape[0]

    @property
    def height(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True, eq=False)
class SketchSet:
    depth: DepthMap
    normal: NormalMap
    silhouette: SilhouetteMask
    view: ViewAxis = field(default=ViewAxis.POS_Z)

    @property
    def size(self) -> tuple[int, int]:
        return self.depth.width, self.depth.height

    def negated_normals(self) -> "SketchSet":
        return SketchSet(self.depth, NormalMap(-self.normal.values), self.silhouette, self.view)


class Violation(NamedTuple):
    kind: str
    count: int
    first_pixel: tuple[int, int] | None

    def __str__(self) -> str:
        at = f", first at {self.first_pixel}" if self.first_pixel is not None else ""
        return f"{self.kind}: {self.count} pixel(s){at}"


def _violation(kind: str, mask: np.ndarray) -> Violation | None:
    count = int(np.count_nonzero(mask))
    if count == 0:
        return None
    first = np.argwhere(mask)[0]
    return Violation(kind, count, (int(first[0]), int(first[1])))


def validate(sketch: SketchSet) -> list[Violation]:
    """List bundle-invariant violations, one entry per violated class. Never raises."""
    shapes = {sketch.depth.values.shape, sketch.normal.values.shape[:2], sketch.silhouette.values.shape}
    if len(shapes) != 1:
        return [Violation(f"size mismatch {sorted(shapes)}", 0, None)]

    d = sketch.depth.values
    sil = sketch.silhouette.values
    n = sketch.normal.values
    fg = d != BACKGROUND
    defined = sketch.normal.defined
    length = np.linalg.norm(n, axis=2)

    checks = [
        ("orphan silhouette", sil & ~fg),
        ("orphan depth", fg & ~sil),
        ("non-finite depth", fg & ~np.isfinite(d)),
        ("negative depth", fg & np.isfinite(d) & (d < 0)),
        ("missing normal", fg & ~defined),
        ("stray normal", ~fg & defined),
        ("non-unit normal", defined & ~(np.abs(length - 1.0) <= UNIT_TOL)),
    ]
    return [v for kind, mask in checks if (v := _violation(kind, mask)) is not None]


# ---------------------------------------------------------------------------
# PFM / PGM

_PFM_HEADER = re.compile(rb"\A(P[Ff])\s+(\d+)\s+(\d+)\s+(\S+)\s")


def _write_pfm(img: np.ndarray, path, tag: bytes) -> None:
    # img is (height, width[, 3]) in top-to-bottom row order
    height, width = img.shape[:2]
    header = tag + b"\n%d %d\n-1.0\n" % (width, height)
    payload = np.ascontiguousarray(np.flipud(img), dtype="<f4").tobytes()
    with open(path, "wb") as fh:
        fh.write(header + payload)


def _read_pfm(path, tag: bytes) -> np.ndarray:
    data = Path(path).read_bytes()
    m = _PFM_HEADER.match(data)
    if m is None:
        raise FormatError("malformed PFM header", 0, path)
    if m.group(1) != tag:
        raise FormatError(f"expected PFM type {tag.decode()}, found {m.group(1).decode()}", 0, path)
    width, height = int(m.group(2)), int(m.group(3))
    if width < 1 or height < 1:
        raise FormatError(f"non-positive PFM size {width}x{height}", m.start(2), path)
    try:
        scale = float(m.group(4))
    except ValueError:
        raise FormatError(f"bad PFM scale {m.group(4)!r}", m.start(4), path) from None
    if scale == 0.0:
        raise FormatError("PFM scale must be non-zero", m.start(4), path)
    channels = 3 if tag == b"PF" else 1
    start = m.end()
    expected = width * height * channels * 4
    if len(data) - start != expected:
        raise FormatError(
            f"PFM payload is {len(data) - start} bytes, expected {expected} for {width}x{height}x{channels}",
            start + min(len(data) - start, expected),
            path,
        )
    dtype = "<f4" if scale < 0 else ">f4"
    flat = np.frombuffer(data, dtype=dtype, offset=start)
    nan = np.isnan(flat)
    if nan.any():
        raise FormatError("NaN in PFM payload", start + 4 * int(np.flatnonzero(nan)[0]), path)
    shape = (height, width, 3) if channels == 3 else (height, width)
    return np.flipud(flat.astype(np.float64).reshape(shape))


def write_depth_pfm(depth: DepthMap, path) -> None:
    _write_pfm(depth.values.T, path, b"Pf")


def read_depth_pfm(path) -> DepthMap:
    return DepthMap(_read_pfm(path, b"Pf").T)


def write_normal_pfm(normal: NormalMap, path) -> None:
    _write_pfm(normal.values.transpose(1, 0, 2), path, b"PF")


def read_normal_pfm(path) -> NormalMap:
    return NormalMap(_read_pfm(path, b"PF").transpose(1, 0, 2))


def _pgm_tokens(data: bytes, count: int):
    """Yield (token, offset) for the first ``count`` header tokens, skipping comments."""
    pos = 0
    tokens = []
    while len(tokens) < count:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if pos >= len(data):
            raise FormatError("truncated PGM header", pos, None)
        if data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace() and data[pos : pos + 1] != b"#":
            pos += 1
        tokens.append((data[start:pos], start))
    return tokens, pos


def write_sil_pgm(mask: SilhouetteMask, path) -> None:
    width, height = mask.values.shape
    img = np.where(mask.values.T, 255, 0).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(b"P5\n%d %d\n255\n" % (width, height) + img.tobytes())


def read_sil_pgm(path) -> SilhouetteMask:
    data = Path(path).read_bytes()
    try:
        tokens, pos = _pgm_tokens(data, 4)
    except FormatError as exc:
        raise FormatError("truncated PGM header", exc.offset, path) from None
    (magic, _), (w, w_off), (h, h_off), (maxval, m_off) = tokens
    if magic != b"P5":
        raise FormatError(f"expected binary PGM magic P5, found {magic!r}", 0, path)
    try:
        width, height, mv = int(w), int(h), int(maxval)
    except ValueError:
        raise FormatError("non-integer PGM header field", w_off, path) from None
    if width < 1 or height < 1:
        raise FormatError(f"non-positive PGM size {width}x{height}", w_off, path)
    if not 0 < mv < 256:
        raise FormatError(f"unsupported PGM maxval {mv}", m_off, path)
    if pos >= len(data) or not data[pos : pos + 1].isspace():
        raise FormatError("missing whitespace after PGM maxval", pos, path)
    start = pos + 1
    if len(data) - start != width * height:
        raise FormatError(
            f"PGM payload is {len(data) - start} bytes, expected {width * height}",
            start + min(len(data) - start, width * height),
            path,
        )
    img = np.frombuffer(data, dtype=np.uint8, offset=start).reshape(height, width)
    return SilhouetteMask((img >= 128).T)


def sketch_paths(prefix) -> tuple[Path, Path, Path]:
    prefix = str(prefix)
    return Path(prefix + ".depth.pfm"), Path(prefix + ".normal.pfm"), Path(prefix + ".sil.pgm")


def write_sketchset(sketch: SketchSet, prefix) -> None:
    dpath, npath, spath = sketch_paths(prefix)
    write_depth_pfm(sketch.depth, dpath)
    write_normal_pfm(sketch.normal, npath)
    write_sil_pgm(sketch.silhouette, spath)


def read_sketchset(prefix, view: ViewAxis = ViewAxis.POS_Z) -> SketchSet:
    dpath, npath, spath = sketch_paths(prefix)
    sketch = SketchSet(read_depth_pfm(dpath), read_normal_pfm(npath), read_sil_pgm(spath), ViewAxis.parse(view))
    sizes = {sketch.depth.values.shape, sketch.normal.values.shape[:2], sketch.silhouette.values.shape}
    if len(sizes) != 1:
        raise ValueError(f"sketch files under prefix {prefix!r} disagree in size: {sorted(sizes)}")
    return sketch
