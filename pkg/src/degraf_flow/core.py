"""Image containers, pyramids, gradients and summed-area tables.

A gray image is a plain 2-D ``float64`` array indexed ``[row, col]`` with
intensities in ``[0, 255]``.  Use :func:`as_gray` at API boundaries to
validate and convert.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

# 5-tap binomial low-pass used before every pyramid subsampling step.
BINOMIAL_5 = np.array([1.0, 4.0, 6.0, 4.0, 1.0]) / 16.0

MIN_PYRAMID_SIZE = 4


def as_gray(image, name: str = "image") -> np.ndarray:
    """Validate ``image`` as a gray raster and return it as float64.

    Raises ``ValueError`` for non-2-D input, empty input, non-finite values
    or intensities outside ``[0, 255]``.
    """
    arr = np.asarray(image, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"{name} must be at least 1x1, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    if arr.min() < 0.0 or arr.max() > 255.0:
        raise ValueError(f"{name} intensities must lie in [0, 255]")
    return arr


def rgb_to_gray(rgb: np.ndarray) -> np.ndarray:
    """Luma conversion 0.299 R + 0.587 G + 0.114 B of an ``(H, W, 3)`` array."""
    rgb = np.asarray(rgb, dtype=np.float64)
    return rgb[..., 0] * 0.299 + rgb[..., 1] * 0.587 + rgb[..., 2] * 0.114


@dataclass(frozen=True)
class Pyramid:
    """Coarse-to-fine image stack; ``levels[0]`` is the full-resolution input."""

    levels: tuple[np.ndarray, ...]
    scale_factor: float

    def __len__(self) -> int:
        return len(self.levels)

    def __getitem__(self, level: int) -> np.ndarray:
        return self.levels[level]


def pyramid_shapes(shape: tuple[int, int], levels: int, scale: float) -> list[tuple[int, int]]:
    """Level dimensions under the floor-of-scale recurrence."""
    shapes = [tuple(int(s) for s in shape)]
    for _ in range(levels - 1):
        h, w = shapes[-1]
        shapes.append((int(np.floor(h * scale)), int(np.floor(w * scale))))
    return shapes


def max_pyramid_levels(shape: tuple[int, int], scale: float, limit: int) -> int:
    """Largest level count <= ``limit`` whose coarsest level stays >= 4x4."""
    n = 1
    while n < limit:
        h, w = pyramid_shapes(shape, n + 1, scale)[-1]
        if h < MIN_PYRAMID_SIZE or w < MIN_PYRAMID_SIZE:
            break
        n += 1
    return n


def _downsample(image: np.ndarray, out_shape: tuple[int, int], scale: float) -> np.ndarray:
    smooth = ndimage.correlate1d(image, BINOMIAL_5, axis=0, mode="reflect")
    smooth = ndimage.correlate1d(smooth, BINOMIAL_5, axis=1, mode="reflect")
    h, w = out_shape
    if scale == 0.5:
        return np.ascontiguousarray(smooth[: 2 * h : 2, : 2 * w : 2])
    rows = np.arange(h) / scale
    cols = np.arange(w) / scale
    rr, cc = np.meshgrid(rows, cols, indexing="ij")
    return ndimage.map_coordinates(smooth, [rr, cc], order=1, mode="nearest")


def build_pyramid(image, levels: int, scale: float = 0.5) -> Pyramid:
    """Build a Gaussian-style pyramid by binomial filtering and subsampling.

    Parameters
    ----------
    image : array_like
        Gray image; becomes level 0 unmodified.
    levels : int
        Number of levels, at least 1.
    scale : float
        Per-level size ratio in ``(0, 1)``.  Level ``L+1`` has dimensions
        ``floor(dims(L) * scale)``.

    Raises
    ------
    ValueError
        If the parameters are out of range or the coarsest level would be
        smaller than 4x4.
    """
    image = as_gray(image)
    if levels < 1:
        raise ValueError(f"levels must be >= 1, got {levels}")
    if not 0.0 < scale < 1.0:
        raise ValueError(f"scale must lie in (0, 1), got {scale}")
    shapes = pyramid_shapes(image.shape, levels, scale)
    h, w = shapes[-1]
    if h < MIN_PYRAMID_SIZE or w < MIN_PYRAMID_SIZE:
        raise ValueError(
            f"{levels} levels at scale {scale} give a coarsest level of {h}x{w}; minimum is 4x4"
        )
    out = [image]
    for shape in shapes[1:]:
        out.append(_downsample(out[-1], shape, scale))
    return Pyramid(tuple(out), float(scale))


def gradient(image) -> tuple[np.ndarray, np.ndarray]:
    """Image derivatives ``(gx, gy)`` along columns and rows.

    Central differences in the interior and one-sided differences on the
    border rows/columns, so the output is defined everywhere.
    """
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 2 or image.shape[0] < 3 or image.shape[1] < 3:
        raise ValueError(f"gradient needs an image of at least 3x3, got shape {image.shape}")
    gy, gx = np.gradient(image, edge_order=1)
    return gx, gy


class SummedAreaTable:
    """Integral images for O(1) window sums.

    Holds three ``(H+1, W+1)`` tables: plain intensity sums, sums weighted by
    the global column index and sums weighted by the global row index.  All
    queries accept scalars or equally shaped arrays of window origins.
    """

    def __init__(self, image):
        image = np.asarray(image, dtype=np.float64)
        if image.ndim != 2:
            raise ValueError(f"image must be 2-D, got shape {image.shape}")
        h, w = image.shape
        self.shape = (h, w)
        rows = np.arange(h, dtype=np.float64)[:, None]
        cols = np.arange(w, dtype=np.float64)[None, :]
        self.table = self._integrate(image)
        self.col_table = self._integrate(image * cols)
        self.row_table = self._integrate(image * rows)

    @staticmethod
    def _integrate(values: np.ndarray) -> np.ndarray:
        out = np.zeros((values.shape[0] + 1, values.shape[1] + 1), dtype=np.float64)
        np.cumsum(np.cumsum(values, axis=0), axis=1, out=out[1:, 1:])
        return out

    @staticmethod
    def _query(table, y0, x0, h, w):
        y0 = np.asarray(y0)
        x0 = np.asarray(x0)
        y1 = y0 + h
        x1 = x0 + w
        return table[y1, x1] - table[y0, x1] - table[y1, x0] + table[y0, x0]

    def window_sum(self, y0, x0, h: int, w: int):
        """Sum of ``image[y0:y0+h, x0:x0+w]``."""
        return self._query(self.table, y0, x0, h, w)

    def col_weighted_sum(self, y0, x0, h: int, w: int):
        """Sum of ``col * image[row, col]`` over the window (global column index)."""
        return self._query(self.col_table, y0, x0, h, w)

    def row_weighted_sum(self, y0, x0, h: int, w: int):
        """Sum of ``row * image[row, col]`` over the window (global row index)."""
        return self._query(self.row_table, y0, x0, h, w)


def summed_area(image) -> SummedAreaTable:
    return SummedAreaTable(as_gray(image))
