"""Image ingestion and CSV interchange for keypoints and sparse flow."""

from __future__ import annotations

import csv
import os

import cv2
import numpy as np

from .core import rgb_to_gray


def read_gray(path) -> np.ndarray:
    """Read an 8-bit PNG/PGM as a float64 gray image in ``[0, 255]``.

    Color inputs are reduced with the 0.299/0.587/0.114 luma weights; an
    alpha channel is dropped.  16-bit inputs are rescaled to ``[0, 255]``.
    """
    path = os.fspath(path)
    if not os.path.isfile(path):
        raise FileNotFoundError(f"no such image: {path}")
    raw = cv2.imread(path, cv2.IMREAD_UNCHANGED)
    if raw is None:
        raise ValueError(f"could not decode image: {path}")
    scale = 255.0 / 65535.0 if raw.dtype == np.uint16 else 1.0
    img = raw.astype(np.float64) * scale
    if img.ndim == 3:
        if img.shape[2] == 4:
            img = img[:, :, :3]
        # OpenCV hands back BGR.
        img = rgb_to_gray(img[:, :, ::-1])
    return np.clip(img, 0.0, 255.0)


def write_gray(path, image: np.ndarray) -> None:
    img = np.clip(np.rint(image), 0, 255).astype(np.uint8)
    if not cv2.imwrite(os.fspath(path), img):
        raise OSError(f"could not write image: {path}")


def write_rgb(path, rgb: np.ndarray) -> None:
    if not cv2.imwrite(os.fspath(path), np.ascontiguousarray(rgb[:, :, ::-1])):
        raise OSError(f"could not write image: {path}")


def write_keypoints_csv(path, points: np.ndarray) -> None:
    """Write ``(N, 2)`` ``(x, y)`` points with header ``x,y`` and 4 decimals."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x", "y"])
        for x, y in np.asarray(points, dtype=np.float64):
            writer.writerow([f"{x:.4f}", f"{y:.4f}"])


def read_keypoints_csv(path) -> np.ndarray:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"x", "y"} <= set(reader.fieldnames):
            raise ValueError(f"{path}: expected header with columns x,y")
        pts = [(float(row["x"]), float(row["y"])) for row in reader]
    return np.asarray(pts, dtype=np.float64).reshape(-1, 2)
