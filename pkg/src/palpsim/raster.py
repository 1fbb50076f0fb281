"""Ground-truth rasterization and image-space metrics.

Images are square class maps over a fixed world window: 0 background, 1 body
tissue, 2 lump. Row 0 is the top of the frame and pixel centers sit at
half-pitch offsets, so a pixel is classified by where its center lands. The
lump disc overrides tissue wherever both apply.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .bodygen import BodyModel
from .errors import LumpAbsentError

DEFAULT_EXTENT = (-1.2, 1.2, -0.2, 2.2)
DEFAULT_RESOLUTION = 128

BACKGROUND = 0
TISSUE = 1
LUMP = 2


@dataclass(frozen=True)
class GroundTruthImage:
    """Class map plus the world window it covers (x_lo, x_hi, y_lo, y_hi)."""

    classes: np.ndarray
    extent: tuple[float, float, float, float] = DEFAULT_EXTENT

    def __post_init__(self):
        self.classes.setflags(write=False)

    @property
    def resolution(self) -> tuple[int, int]:
        return self.classes.shape


def pixel_pitch(extent, shape) -> tuple[float, float]:
    x_lo, x_hi, y_lo, y_hi = extent
    return (x_hi - x_lo) / shape[1], (y_hi - y_lo) / shape[0]


def pixel_centers(extent, shape) -> tuple[np.ndarray, np.ndarray]:
    """World coordinates of pixel centers: (xs over columns, ys over rows)."""
    px, py = pixel_pitch(extent, shape)
    x_lo, _, _, y_hi = extent
    xs = x_lo + (np.arange(shape[1]) + 0.5) * px
    ys = y_hi - (np.arange(shape[0]) + 0.5) * py
    return xs, ys


def rasterize_body(body: BodyModel, resolution: int = DEFAULT_RESOLUTION,
                   extent=DEFAULT_EXTENT) -> GroundTruthImage:
    """Class map of the body at rest: tissue from the mesh, lump from its disc."""
    classes = np.zeros((resolution, resolution), dtype=np.uint8)
    px, py = pixel_pitch(extent, (resolution, resolution))
    if not np.isclose(px, py):
        raise ValueError("extent and resolution must give square pixels")
    _kernels.raster_triangles(classes, body.mesh.rest_positions,
                              body.mesh.triangles, extent[0], extent[3], px)
    if body.lump is not None:
        xs, ys = pixel_centers(extent, classes.shape)
        dx = xs[None, :] - body.lump.center[0]
        dy = ys[:, None] - body.lump.center[1]
        classes[dx * dx + dy * dy < body.lump.radius**2] = LUMP
    return GroundTruthImage(classes=classes, extent=extent)


def _as_classes(image) -> np.ndarray:
    arr = image.classes if isinstance(image, GroundTruthImage) else np.asarray(image)
    if arr.ndim != 2:
        raise ValueError(f"class image must be 2D, got shape {arr.shape}")
    return arr


def _extent_of(image, extent):
    if extent is not None:
        return extent
    if isinstance(image, GroundTruthImage):
        return image.extent
    return DEFAULT_EXTENT


def f1_class(pred, gt, cls: int) -> float:
    """F1 for one class; 1.0 when the class is absent from both images."""
    p = _as_classes(pred) == cls
    g = _as_classes(gt) == cls
    if p.shape != g.shape:
        raise ValueError("prediction and ground truth shapes differ")
    tp = int(np.sum(p & g))
    fp = int(np.sum(p & ~g))
    fn = int(np.sum(~p & g))
    if tp + fp + fn == 0:
        return 1.0
    return 2.0 * tp / (2.0 * tp + fp + fn)


def f1_macro(pred, gt) -> float:
    """Mean of the tissue and lump F1 scores."""
    return 0.5 * (f1_class(pred, gt, TISSUE) + f1_class(pred, gt, LUMP))


def lump_size(image, extent=None) -> float:
    """World-space area of the lump class."""
    arr = _as_classes(image)
    px, py = pixel_pitch(_extent_of(image, extent), arr.shape)
    return float(np.sum(arr == LUMP)) * px * py


def lump_com(image, extent=None) -> np.ndarray:
    """World-space centroid of the lump class pixels.

    Raises LumpAbsentError when the image contains no lump pixels.
    """
    arr = _as_classes(image)
    rows, cols = np.nonzero(arr == LUMP)
    if rows.size == 0:
        raise LumpAbsentError("image has no lump pixels")
    xs, ys = pixel_centers(_extent_of(image, extent), arr.shape)
    return np.array([xs[cols].mean(), ys[rows].mean()])


def size_error(pred, gt, extent=None) -> float:
    """Absolute lump area error as a percentage of the ground-truth area.

    NaN when the ground truth has no lump (undefined denominator).
    """
    gt_size = lump_size(gt, extent)
    if gt_size == 0.0:
        return float("nan")
    return abs(lump_size(pred, extent) - gt_size) / gt_size * 100.0


def com_error(pred, gt, extent=None) -> float:
    """Distance between lump centroids; NaN when either image lacks a lump."""
    try:
        cp = lump_com(pred, extent)
        cg = lump_com(gt, extent)
    except LumpAbsentError:
        return float("nan")
    return float(np.hypot(*(cp - cg)))
