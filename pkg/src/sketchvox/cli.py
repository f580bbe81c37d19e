"""Command-line interface.

Exit codes: 0 success, 1 runtime/data error, 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

import numpy as np
from PIL import Image

from . import __version__
from .consistency import LossConfig, finite_diff_check, total_loss
from .grid import FormatError, ViewAxis, new_filled, read_vgrd, view_dims, write_vgrd
from .metrics import iou, iou_scale_search
from .refine import (
    PUBLISHED_ITERATIONS,
    PUBLISHED_LEARNING_RATE,
    PUBLISHED_MOMENTUM,
    TRAJECTORY_COLUMNS,
    RefineConfig,
    refine,
)
from .render import render_sketchset
from .shapes import MASK64, ShapeKind, ShapeSpec, generate
from .sketch import read_sketchset, sketch_paths, validate, write_sketchset

VIEW_CHOICES = [v.value for v in ViewAxis]
GRAD_CHECK_LIMIT = 1e-6


class CliError(Exception):
    """Runtime/data failure reported with exit code 1."""


def _u64(text: str) -> int:
    try:
        value = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if not 0 <= value <= MASK64:
        raise argparse.ArgumentTypeError(f"seed must be in [0, 2**64 - 1], got {value}")
    return value


def _resolution(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if value < 8:
        raise argparse.ArgumentTypeError(f"resolution must be >= 8, got {value}")
    return value


def _unit_open(text: str) -> float:
    value = float(text)
    if not 0.0 < value < 1.0:
        raise argparse.ArgumentTypeError(f"must lie in (0, 1), got {value}")
    return value


def _load_grid(path):
    try:
        return read_vgrd(path)
    except FileNotFoundError:
        raise CliError(f"{path}: no such file") from None
    except (FormatError, OSError) as exc:
        raise CliError(f"{path}: {exc}") from None


def _load_sketch(prefix, view):
    try:
        return read_sketchset(prefix, view)
    except FileNotFoundError as exc:
        raise CliError(f"{exc.filename}: no such file") from None
    except (FormatError, OSError, ValueError) as exc:
        raise CliError(f"{prefix}: {exc}") from None


def _paired_views(prefixes, views, parser):
    if not views:
        return [ViewAxis.POS_Z] * len(prefixes)
    if len(views) != len(prefixes):
        parser.error(f"got {len(views)} --view flags for {len(prefixes)} sketch prefixes")
    return [ViewAxis.parse(v) for v in views]


def _check_sketch_fits(dims, sketch, prefix):
    expected = view_dims(dims, sketch.view)[:2]
    if sketch.size != expected:
        raise CliError(
            f"{prefix}: sketch size {sketch.size} does not match grid dims {dims} "
            f"seen from {sketch.view} (needs {expected})"
        )


# ---------------------------------------------------------------------------
# commands


def cmd_gen_shape(args, parser):
    grid = generate(ShapeSpec(ShapeKind(args.kind), args.seed, args.res))
    try:
        write_vgrd(grid, args.output)
    except OSError as exc:
        raise CliError(f"{args.output}: {exc.strerror or exc}") from None
    print(f"occupied={grid.occupied_count()}")


def cmd_render(args, parser):
    grid = _load_grid(args.shape)
    sketch = render_sketchset(grid, ViewAxis.parse(args.view), args.tau)
    problems = validate(sketch)
    if problems:
        raise CliError("rendered sketch failed validation: " + "; ".join(map(str, problems)))
    try:
        write_sketchset(sketch, args.out_prefix)
    except OSError as exc:
        raise CliError(f"{args.out_prefix}: {exc.strerror or exc}") from None
    for path in sketch_paths(args.out_prefix):
        print(f"wrote {path}")


def cmd_loss(args, parser):
    grid = _load_grid(args.shape)
    sketch = _load_sketch(args.sketch_prefix, ViewAxis.parse(args.view))
    _check_sketch_fits(grid.dims, sketch, args.sketch_prefix)
    try:
        report = total_loss(grid, sketch, LossConfig(normal_weight=args.normal_weight))
    except ValueError as exc:
        raise CliError(str(exc)) from None
    print("\n".join(report.as_lines()))


def cmd_grad_check(args, parser):
    grid = _load_grid(args.shape)
    sketch = _load_sketch(args.sketch_prefix, ViewAxis.parse(args.view))
    _check_sketch_fits(grid.dims, sketch, args.sketch_prefix)
    try:
        err = finite_diff_check(
            grid, sketch, LossConfig(normal_weight=args.normal_weight), h=args.h, samples=args.samples, seed=args.seed
        )
    except ValueError as exc:
        raise CliError(str(exc)) from None
    print(f"max_abs_error={err:.6g}")
    return 0 if err <= GRAD_CHECK_LIMIT else 1


def _initial_grid(spec: str, sketches, dims_flag):
    if spec.startswith("uniform:"):
        try:
            level = float(spec.split(":", 1)[1])
        except ValueError:
            raise CliError(f"bad --init value {spec!r}") from None
        if dims_flag is not None:
            dims = dims_flag
        else:
            sizes = {s.size for s in sketches}
            side = {w for size in sizes for w in size}
            if len(side) != 1:
                raise CliError(f"sketch sizes {sorted(sizes)} are not all square and equal; pass --dims NX,NY,NZ")
            n = side.pop()
            dims = (n, n, n)
        try:
            return new_filled(dims, level)
        except ValueError as exc:
            raise CliError(str(exc)) from None
    return _load_grid(spec)


def _dims(text: str):
    try:
        dims = tuple(int(t) for t in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected NX,NY,NZ, got {text!r}") from None
    if len(dims) != 3 or min(dims) < 1:
        raise argparse.ArgumentTypeError(f"expected three positive integers, got {text!r}")
    return dims


def cmd_refine(args, parser):
    views = _paired_views(args.sketch_prefix, args.view, parser)
    sketches = [_load_sketch(p, v) for p, v in zip(args.sketch_prefix, views)]
    init = _initial_grid(args.init, sketches, args.dims)
    for prefix, sketch in zip(args.sketch_prefix, sketches):
        _check_sketch_fits(init.dims, sketch, prefix)

    lr, momentum, iters = args.lr, args.momentum, args.iters
    if args.published_defaults:
        lr = PUBLISHED_LEARNING_RATE if lr is None else lr
        momentum = PUBLISHED_MOMENTUM if momentum is None else momentum
        iters = PUBLISHED_ITERATIONS if iters is None else iters
    base = RefineConfig()
    try:
        cfg = RefineConfig(
            learning_rate=base.learning_rate if lr is None else lr,
            momentum=base.momentum if momentum is None else momentum,
            iterations=base.iterations if iters is None else iters,
            tv_weight=args.tv,
            binariness_weight=args.bin,
            loss=LossConfig(normal_weight=args.normal_weight),
            init=args.init,
        )
    except ValueError as exc:
        parser.error(str(exc))
    result = refine(init, sketches, cfg)

    out = Path(args.output)
    manifest = out.with_name(out.name + ".manifest.txt")
    trajectory = out.with_name(out.name + ".trajectory.csv")
    try:
        write_vgrd(result.final, out)
        _write_manifest(manifest, cfg, args, views, init.dims, result)
        with open(trajectory, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(TRAJECTORY_COLUMNS)
            for p in result.trajectory:
                writer.writerow([p.iteration] + [f"{x:.17g}" for x in (p.total, p.depth, p.normal, p.tv, p.binariness)])
    except OSError as exc:
        raise CliError(f"{out}: {exc.strerror or exc}") from None
    last = result.trajectory[-1]
    print(f"iterations={result.iterations_run}")
    print(f"final_total={last.total:.17g}")
    print(f"wrote {out}, {manifest}, {trajectory}")


def _write_manifest(path, cfg, args, views, dims, result):
    lines = [f"{k}={v}" for k, v in cfg.manifest_items()]
    lines.append(f"dims={','.join(map(str, dims))}")
    for i, (prefix, view) in enumerate(zip(args.sketch_prefix, views)):
        lines.append(f"sketch.{i}.prefix={prefix}")
        lines.append(f"sketch.{i}.view={view}")
    lines.append(f"iterations_run={result.iterations_run}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def cmd_eval(args, parser):
    pred = _load_grid(args.pred)
    gt = _load_grid(args.gt)
    if pred.dims != gt.dims:
        raise CliError(f"dimension mismatch: {args.pred} has {pred.dims}, {args.gt} has {gt.dims}")
    if args.scale_search:
        score, scale = iou_scale_search(pred, gt, args.tau)
    else:
        score, scale = iou(pred, gt, args.tau), 1.0
    print(f"iou={score:.6f}")
    print(f"scale={scale:.6f}")


def projection_montage(values: np.ndarray) -> np.ndarray:
    """Max-occupancy projections along x, y and z, side by side, as 8-bit grayscale."""
    nx, ny, nz = values.shape
    panels = [
        values.max(axis=0),  # rows y, cols z
        values.max(axis=1).T,  # rows z, cols x
        values.max(axis=2).T,  # rows y, cols x
    ]
    height = max(p.shape[0] for p in panels)
    width = sum(p.shape[1] for p in panels) + 2 * (len(panels) - 1)
    canvas = np.zeros((height, width), dtype=np.uint8)
    col = 0
    for p in panels:
        canvas[: p.shape[0], col : col + p.shape[1]] = np.round(p * 255).astype(np.uint8)
        col += p.shape[1] + 2
    return canvas


def cmd_export_png(args, parser):
    grid = _load_grid(args.shape)
    try:
        Image.fromarray(projection_montage(grid.values), mode="L").save(args.output, format="PNG")
    except OSError as exc:
        raise CliError(f"{args.output}: {exc}") from None
    print(f"wrote {args.output}")


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sketchvox", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-shape", help="write a procedural solid shape as VGRD")
    p.add_argument("--kind", required=True, choices=[k.value for k in ShapeKind])
    p.add_argument("--seed", required=True, type=_u64)
    p.add_argument("--res", required=True, type=_resolution)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_gen_shape)

    p = sub.add_parser("render", help="render depth/normal/silhouette sketches of a grid")
    p.add_argument("--shape", required=True)
    p.add_argument("--view", default="+z", choices=VIEW_CHOICES)
    p.add_argument("--tau", type=_unit_open, default=0.5)
    p.add_argument("--out-prefix", required=True)
    p.set_defaults(func=cmd_render)

    for name, func, helptext in (
        ("loss", cmd_loss, "print the reprojection loss of a grid against a sketch"),
        ("grad-check", cmd_grad_check, "compare analytic and finite-difference gradients"),
    ):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--shape", required=True)
        p.add_argument("--sketch-prefix", required=True)
        p.add_argument("--view", default="+z", choices=VIEW_CHOICES)
        p.add_argument("--normal-weight", type=float, default=LossConfig.normal_weight)
        if name == "grad-check":
            p.add_argument("--samples", type=int, default=200)
            p.add_argument("--h", type=float, default=1e-3)
            p.add_argument("--seed", type=int, default=0)
        p.set_defaults(func=func)

    p = sub.add_parser("refine", help="optimise voxel occupancies against one or more sketches")
    p.add_argument("--sketch-prefix", required=True, action="append")
    p.add_argument(
        "--view", action="append", choices=VIEW_CHOICES, help="view of each sketch prefix, in order (default +z)"
    )
    p.add_argument("--init", default="uniform:0.5", help="uniform:C or a VGRD path")
    p.add_argument("--dims", type=_dims, help="NX,NY,NZ for uniform init (default: cube from sketch size)")
    p.add_argument("--iters", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--momentum", type=float)
    p.add_argument("--tv", type=float, default=RefineConfig.tv_weight)
    p.add_argument("--bin", type=float, default=RefineConfig.binariness_weight)
    p.add_argument("--normal-weight", type=float, default=LossConfig.normal_weight)
    p.add_argument(
        "--published-defaults",
        action="store_true",
        help=f"lr {PUBLISHED_LEARNING_RATE}, momentum {PUBLISHED_MOMENTUM}, {PUBLISHED_ITERATIONS} iterations unless overridden",
    )
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_refine)

    p = sub.add_parser("eval", help="IoU between two grids")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--scale-search", action="store_true")
    p.add_argument("--tau", type=_unit_open, default=0.5)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("export-png", help="3-panel max-occupancy projection montage")
    p.add_argument("--shape", required=True)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_export_png)
    return parser


def _join_view_values(argv):
    # "-x" would otherwise be parsed as an option flag
    out = []
    for tok in argv:
        if out and out[-1] == "--view" and tok.lower() in VIEW_CHOICES:
            out[-1] = f"--view={tok.lower()}"
        else:
            out.append(tok)
    return out


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(_join_view_values(sys.argv[1:] if argv is None else list(argv)))
    try:
        code = args.func(args, parser)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0 if code is None else code


if __name__ == "__main__":
    sys.exit(main())
