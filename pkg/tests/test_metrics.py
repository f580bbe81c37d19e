import numpy as np
import pytest

from oracles import iou_loop
from sketchvox.grid import ViewAxis, VoxelGrid, new_filled
from sketchvox.metrics import default_scales, depth_agreement, iou, iou_scale_search, rescale_mask
from sketchvox.render import render_sketchset
from sketchvox.shapes import ShapeSpec, generate


def _box(n, lo, hi):
    v = np.zeros((n, n, n))
    v[lo[0] : hi[0], lo[1] : hi[1], lo[2] : hi[2]] = 1.0
    return VoxelGrid(v)


def test_iou_examples():
    a = _box(8, (0, 0, 0), (4, 4, 4))
    assert iou(a, a) == 1.0
    assert iou(a, _box(8, (4, 4, 4), (8, 8, 8))) == 0.0
    b = _box(8, (1, 0, 0), (5, 4, 4))  # overlap 3x4x4
    inter, union = iou_loop(a.values, b.values, 0.5)
    assert (inter, union) == (48, 80)
    assert iou(a, b) == 0.6
    empty = new_filled((3, 3, 3), 0.0)
    assert iou(empty, empty) == 1.0


def test_iou_vs_loop(rng):
    for _ in range(20):
        a = VoxelGrid(rng.random((8, 8, 8)))
        b = VoxelGrid(rng.random((8, 8, 8)))
        inter, union = iou_loop(a.values, b.values, 0.5)
        assert iou(a, b) == inter / union
        assert iou(a, b) == iou(b, a)
        assert 0.0 <= iou(a, b) <= 1.0


def test_iou_dim_mismatch():
    with pytest.raises(ValueError):
        iou(new_filled((2, 2, 2), 1), new_filled((2, 2, 3), 1))


def test_default_scales():
    s = default_scales()
    assert 1.0 in s and len(s) == 21
    assert s[0] == pytest.approx(0.5) and s[-1] == pytest.approx(2.0)
    logs = np.log([x for x in s if x != 1.0])
    np.testing.assert_allclose(np.diff(logs), np.log(4) / 19)


def test_rescale_identity_and_half(rng):
    m = rng.random((9, 10, 11)) > 0.5
    np.testing.assert_array_equal(rescale_mask(m, 1.0), m)
    small = rescale_mask(np.ones((8, 8, 8), bool), 0.5)
    assert small.sum() == 4**3 and small[2:6, 2:6, 2:6].all()


def test_scale_search_identity():
    g = generate(ShapeSpec("sphere", 3, 24))
    assert iou_scale_search(g, g) == (1.0, 1.0)
    assert iou_scale_search(g, g, scales=[0.9, 1.0, 1.1]) == (1.0, 1.0)


def test_scale_search_recovers_half_size():
    gt = generate(ShapeSpec("box", 2, 32))
    half = VoxelGrid(rescale_mask(gt.values >= 0.5, 0.5).astype(float))
    scales = np.geomspace(0.5, 2.0, 20)
    best_iou, best_scale = iou_scale_search(half, gt, scales=scales)
    assert best_scale >= scales[-2]
    assert best_iou >= iou(half, gt)


def test_scale_search_single_scale_is_direct(rng):
    a = VoxelGrid(rng.random((8, 8, 8)))
    b = VoxelGrid(rng.random((8, 8, 8)))
    assert iou_scale_search(a, b, scales=[1.0]) == (iou(a, b), 1.0)
    score, scale = iou_scale_search(a, b, scales=[1.3])
    assert scale == 1.3
    assert score == iou(VoxelGrid(rescale_mask(a.values >= 0.5, 1.3).astype(float)), b)


def test_scale_search_tie_break():
    empty = new_filled((4, 4, 4), 0.0)
    # every scale ties at IoU 1.0; log-distance to 1 decides, then the smaller scale
    assert iou_scale_search(empty, empty, scales=[2.0, 0.5, 1.5]) == (1.0, 1.5)
    assert iou_scale_search(empty, empty, scales=[2.0, 0.5]) == (1.0, 0.5)


def test_depth_agreement_examples():
    g = _box(10, (2, 2, 3), (8, 8, 7))
    s = render_sketchset(g, ViewAxis.POS_Z)
    assert depth_agreement(g, s) == 1.0
    assert depth_agreement(new_filled((10, 10, 10), 0.0), s) == 0.0
    deeper = _box(10, (2, 2, 4), (8, 8, 8))
    assert depth_agreement(deeper, s, tol_voxels=1.0) == 1.0
    assert depth_agreement(deeper, s, tol_voxels=0.5) == 0.0


def test_depth_agreement_other_view():
    g = generate(ShapeSpec("chair", 1, 16))
    s = render_sketchset(g, ViewAxis.NEG_X)
    assert depth_agreement(g, s) == 1.0
    with pytest.raises(ValueError):
        depth_agreement(new_filled((16, 16, 15), 0.0), s)
