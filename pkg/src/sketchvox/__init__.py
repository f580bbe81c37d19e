"""Reprojection consistency between voxel shapes and 2.5D sketches."""

__version__ = "0.1.0"

from .consistency import LossConfig, LossReport, finite_diff_check, total_loss, total_loss_grad
from .grid import FormatError, ViewAxis, VoxelGrid, binarize, new_filled, read_vgrd, reorient, write_vgrd
from .metrics import depth_agreement, iou, iou_scale_search
from .refine import RefineConfig, RefineResult, refine
from .render import render_depth, render_normals, render_silhouette, render_sketchset
from .shapes import ShapeKind, ShapeSpec, fill_solid, generate
from .sketch import DepthMap, NormalMap, SilhouetteMask, SketchSet, validate
