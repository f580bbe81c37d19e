import struct
import subprocess
import sys

import numpy as np
import pytest
from PIL import Image

from sketchvox.cli import main, projection_montage
from sketchvox.grid import read_vgrd, write_vgrd, new_filled

VIEWS = ["+x", "-x", "+y", "-y", "+z", "-z"]


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def sphere(tmp_path, capsys):
    path = tmp_path / "sphere.vgrid"
    code, out, _ = run(capsys, "gen-shape", "--kind", "sphere", "--seed", "7", "--res", "16", "-o", str(path))
    assert code == 0 and out.startswith("occupied=")
    return path


def test_gen_shape_deterministic(tmp_path, capsys, sphere):
    again = tmp_path / "again.vgrid"
    run(capsys, "gen-shape", "--kind", "sphere", "--seed", "7", "--res", "16", "-o", str(again))
    assert sphere.read_bytes() == again.read_bytes()


def test_gen_shape_chair_size(tmp_path, capsys):
    path = tmp_path / "chair.vgrid"
    assert run(capsys, "gen-shape", "--kind", "chair", "--seed", "1", "--res", "32", "-o", str(path))[0] == 0
    assert path.stat().st_size == 4 + 12 + 32**3 * 4


def test_usage_errors_exit_2(tmp_path, capsys):
    with pytest.raises(SystemExit) as info:
        main(["gen-shape", "--kind", "box", "--seed", "1", "--res", "4", "-o", str(tmp_path / "x")])
    assert info.value.code == 2
    with pytest.raises(SystemExit) as info:
        main(["gen-shape", "--kind", "cone", "--seed", "1", "--res", "8", "-o", str(tmp_path / "x")])
    assert info.value.code == 2
    with pytest.raises(SystemExit) as info:
        main(["render", "--shape", "x", "--view", "+w", "--out-prefix", "p"])
    assert info.value.code == 2


def test_render_and_self_loss(tmp_path, capsys, sphere):
    prefix = tmp_path / "s"
    code, out, _ = run(capsys, "render", "--shape", str(sphere), "--view", "-y", "--out-prefix", str(prefix))
    assert code == 0
    for suffix in (".depth.pfm", ".normal.pfm", ".sil.pgm"):
        assert (tmp_path / f"s{suffix}").exists()
    code, out, _ = run(capsys, "loss", "--shape", str(sphere), "--sketch-prefix", str(prefix), "--view", "-y")
    assert code == 0
    values = dict(line.split("=") for line in out.split())
    assert values["depth_loss"] == "0"
    assert set(values) == {"depth_loss", "normal_loss", "total", "depth_terms", "normal_terms"}


def test_grad_check_exit_codes(tmp_path, capsys, sphere):
    prefix = tmp_path / "s"
    run(capsys, "render", "--shape", str(sphere), "--out-prefix", str(prefix))
    code, out, _ = run(capsys, "grad-check", "--shape", str(sphere), "--sketch-prefix", str(prefix), "--samples", "50", "--h", "1e-3")
    assert code == 0 and out.startswith("max_abs_error=")


def test_missing_file_exit_1(tmp_path, capsys):
    missing = tmp_path / "nope.vgrid"
    code, _, err = run(capsys, "eval", "--pred", str(missing), "--gt", str(missing))
    assert code == 1 and str(missing) in err


def test_corrupt_file_exit_1(tmp_path, capsys):
    bad = tmp_path / "bad.vgrid"
    bad.write_bytes(b"VGRD\x00")
    code, _, err = run(capsys, "export-png", "--shape", str(bad), "-o", str(tmp_path / "x.png"))
    assert code == 1 and str(bad) in err and "byte offset" in err


def test_dimension_mismatch_exit_1(tmp_path, capsys, sphere):
    other = tmp_path / "other.vgrid"
    write_vgrd(new_filled((16, 16, 8), 0.0), other)
    code, _, err = run(capsys, "eval", "--pred", str(sphere), "--gt", str(other))
    assert code == 1 and "(16, 16, 16)" in err and "(16, 16, 8)" in err
    prefix = tmp_path / "s"
    run(capsys, "render", "--shape", str(sphere), "--out-prefix", str(prefix))
    flat = tmp_path / "flat.vgrid"
    write_vgrd(new_filled((8, 16, 16), 0.0), flat)
    code, _, err = run(capsys, "loss", "--shape", str(flat), "--sketch-prefix", str(prefix))
    assert code == 1 and "(16, 16)" in err and "(8, 16, 16)" in err


def test_round_trip_six_views(tmp_path, capsys, sphere):
    args = []
    for view in VIEWS:
        prefix = tmp_path / f"v{view}"
        assert run(capsys, "render", "--shape", str(sphere), "--view", view, "--out-prefix", str(prefix))[0] == 0
        args += ["--sketch-prefix", str(prefix), "--view", view]
    out_path = tmp_path / "r.vgrid"
    code, out, _ = run(capsys, "refine", *args, "--init", "uniform:0.5", "--iters", "300", "-o", str(out_path))
    assert code == 0
    csv_lines = (tmp_path / "r.vgrid.trajectory.csv").read_text().splitlines()
    assert csv_lines[0] == "iter,total,depth,normal,tv,bin"
    assert len(csv_lines) == 301
    manifest = dict(
        line.split("=", 1) for line in (tmp_path / "r.vgrid.manifest.txt").read_text().splitlines()
    )
    assert manifest["iterations"] == "300" and manifest["learning_rate"] == "0.1"
    assert manifest["sketch.1.view"] == "-x"
    code, out, _ = run(capsys, "eval", "--pred", str(out_path), "--gt", str(sphere), "--scale-search")
    values = dict(line.split("=") for line in out.split())
    assert float(values["iou"]) >= 0.9


def test_refine_published_defaults_and_init_path(tmp_path, capsys, sphere):
    prefix = tmp_path / "s"
    run(capsys, "render", "--shape", str(sphere), "--out-prefix", str(prefix))
    init = tmp_path / "init.vgrid"
    write_vgrd(new_filled((16, 16, 16), 0.5), init)
    out_path = tmp_path / "r.vgrid"
    code, _, _ = run(capsys, "refine", "--sketch-prefix", str(prefix), "--init", str(init), "--published-defaults", "-o", str(out_path))
    assert code == 0
    manifest = (tmp_path / "r.vgrid.manifest.txt").read_text()
    assert "learning_rate=0.001" in manifest and "iterations=40\n" in manifest
    assert read_vgrd(out_path).dims == (16, 16, 16)


def test_refine_view_count_mismatch(tmp_path, capsys):
    with pytest.raises(SystemExit) as info:
        main(["refine", "--sketch-prefix", "a", "--sketch-prefix", "b", "--view", "+x", "-o", str(tmp_path / "o")])
    assert info.value.code == 2


def test_export_png_deterministic(tmp_path, capsys, sphere):
    a, b = tmp_path / "a.png", tmp_path / "b.png"
    assert run(capsys, "export-png", "--shape", str(sphere), "-o", str(a))[0] == 0
    run(capsys, "export-png", "--shape", str(sphere), "-o", str(b))
    assert a.read_bytes() == b.read_bytes()
    img = Image.open(a)
    assert img.mode == "L" and img.size == (16 * 3 + 4, 16)
    data = a.read_bytes()
    chunks, pos = [], 8
    while pos < len(data):
        length = struct.unpack(">I", data[pos : pos + 4])[0]
        chunks.append(data[pos + 4 : pos + 8])
        pos += 12 + length
    assert set(chunks) == {b"IHDR", b"IDAT", b"IEND"}


def test_projection_montage_panels():
    v = np.zeros((2, 3, 4))
    v[1, 2, 3] = 1.0
    m = projection_montage(v)
    assert m.shape == (4, 4 + 2 + 2 + 2 + 2)
    assert m[2, 3] == 255  # along x: rows y, cols z
    assert m[3, 6 + 1] == 255  # along y: rows z, cols x
    assert m[2, 6 + 2 + 2 + 1] == 255  # along z: rows y, cols x


def test_module_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "sketchvox", "gen-shape", "--kind", "box", "--seed", "3", "--res", "4", "-o", str(tmp_path / "b")],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 2
    proc = subprocess.run(
        [sys.executable, "-m", "sketchvox", "eval", "--pred", str(tmp_path / "none"), "--gt", str(tmp_path / "none")],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 1
