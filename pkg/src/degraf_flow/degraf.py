"""Dense gradient-based feature (DeGraF) keypoints on a uniform grid.

Every ``w x h`` window visited by a sliding step ``step`` yields exactly one
keypoint: the intensity-weighted centroid of the window (positive centroid)
or the centroid of its inverted intensities (negative centroid), whichever
carries the larger mass.

Centroids are computed in window-local ``(row, col)`` terms and exposed as
:class:`Point2` with ``x`` = column and ``y`` = row.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .core import SummedAreaTable, as_gray


class Point2(NamedTuple):
    x: float
    y: float


@dataclass(frozen=True)
class CentroidPair:
    c_pos: Point2
    c_neg: Point2
    s_pos: float
    s_neg: float


@dataclass(frozen=True)
class DetectorParams:
    window_w: int = 3
    window_h: int = 3
    step: int = 9

    def __post_init__(self):
        if self.window_w < 2 or self.window_h < 2:
            raise ValueError(f"window must be at least 2x2, got {self.window_w}x{self.window_h}")
        if self.step < 1:
            raise ValueError(f"step must be >= 1, got {self.step}")


@dataclass(frozen=True)
class KeypointGrid:
    """Keypoints in full-image ``(x, y)`` coordinates, one per window.

    ``points`` is ordered row-major over window origins; ``grid_shape`` gives
    the number of window rows and columns.
    """

    points: np.ndarray
    params: DetectorParams
    grid_shape: tuple[int, int]

    def __len__(self) -> int:
        return len(self.points)


def grid_point_count(width: int, height: int, params: DetectorParams) -> int:
    nx = (width - params.window_w) // params.step + 1
    ny = (height - params.window_h) // params.step + 1
    return nx * ny


def _center(region: np.ndarray) -> Point2:
    h, w = region.shape
    return Point2((w - 1) / 2.0, (h - 1) / 2.0)


def _weighted_centroid(weights: np.ndarray) -> tuple[Point2, float]:
    h, w = weights.shape
    mass = float(weights.sum())
    row = float((np.arange(h)[:, None] * weights).sum()) / mass
    col = float((np.arange(w)[None, :] * weights).sum()) / mass
    return Point2(col, row), mass


def positive_centroid(region) -> tuple[Point2, float]:
    """Intensity-weighted mean position of a window and its mass.

    An all-black window has no mass; its centroid falls back to the window
    center with ``s_pos = 0``.
    """
    region = np.asarray(region, dtype=np.float64)
    if region.sum() == 0.0:
        return _center(region), 0.0
    return _weighted_centroid(region)


def negative_centroid(region, m: float | None = None) -> tuple[Point2, float]:
    """Centroid of the inverted window ``1 + m - I``, with ``m`` the window max.

    The +1 offset makes every weight at least 1, so the mass is always at
    least the window area.
    """
    region = np.asarray(region, dtype=np.float64)
    if m is None:
        m = float(region.max())
    return _weighted_centroid(1.0 + m - region)


def centroid_pair(region) -> CentroidPair:
    c_pos, s_pos = positive_centroid(region)
    c_neg, s_neg = negative_centroid(region)
    return CentroidPair(c_pos, c_neg, s_pos, s_neg)


def select_keypoint(pair: CentroidPair, window_origin) -> Point2:
    """Place the keypoint at the heavier centroid; ties go to the positive one."""
    ox, oy = window_origin
    c = pair.c_neg if pair.s_neg > pair.s_pos else pair.c_pos
    return Point2(ox + c.x, oy + c.y)


def detect_grid(image, params: DetectorParams | None = None) -> KeypointGrid:
    """Detect one DeGraF keypoint per window position.

    Window sums come from summed-area tables, so the cost per window is
    constant apart from the window-max lookup.  Windows that would extend
    past the image border are not visited.
    """
    image = as_gray(image)
    params = params or DetectorParams()
    H, W = image.shape
    w, h, step = params.window_w, params.window_h, params.step
    if W < w or H < h:
        raise ValueError(f"image {W}x{H} is smaller than the {w}x{h} detection window")

    oy = np.arange(0, H - h + 1, step)
    ox = np.arange(0, W - w + 1, step)
    OY, OX = np.meshgrid(oy, ox, indexing="ij")

    sat = SummedAreaTable(image)
    s_pos = sat.window_sum(OY, OX, h, w)
    # local weighted sums: shift the global index by the window origin
    col_pos = sat.col_weighted_sum(OY, OX, h, w) - OX * s_pos
    row_pos = sat.row_weighted_sum(OY, OX, h, w) - OY * s_pos

    m = sliding_window_view(image, (h, w))[oy][:, ox].max(axis=(-2, -1))
    top = 1.0 + m
    s_neg = top * (w * h) - s_pos
    col_neg = top * (h * w * (w - 1) / 2.0) - col_pos
    row_neg = top * (w * h * (h - 1) / 2.0) - row_pos

    use_neg = s_neg > s_pos
    with np.errstate(invalid="ignore", divide="ignore"):
        cx_pos = np.where(s_pos > 0, col_pos / s_pos, (w - 1) / 2.0)
        cy_pos = np.where(s_pos > 0, row_pos / s_pos, (h - 1) / 2.0)
    cx = np.where(use_neg, col_neg / s_neg, cx_pos)
    cy = np.where(use_neg, row_neg / s_neg, cy_pos)

    # round-off in the table differences can leave a centroid a hair outside
    cx = np.clip(cx, 0.0, w - 1.0)
    cy = np.clip(cy, 0.0, h - 1.0)
    pts = np.stack([(OX + cx).ravel(), (OY + cy).ravel()], axis=1)
    return KeypointGrid(pts, params, (len(oy), len(ox)))
