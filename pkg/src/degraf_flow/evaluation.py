"""Flow metrics, KITTI flow PNG I/O and color-coded visualization."""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass

import cv2
import numpy as np

from .interp import FlowField

KITTI_OFFSET = 2**15
KITTI_SCALE = 64.0
OUTLIER_THRESHOLD = 3.0


@dataclass(frozen=True)
class FlowMetrics:
    """Per-frame scores.  EPE over an empty evaluation set is ``None``."""

    epe_all: float | None
    epe_noc: float | None
    out_all: float | None
    out_noc: float | None
    evaluated_pixel_count: int
    density: float

    def as_dict(self) -> dict:
        return asdict(self)


def _evaluation_set(pred: FlowField, gt: FlowField, mask) -> np.ndarray:
    if pred.shape != gt.shape:
        raise ValueError(f"flow shapes differ: {pred.shape} vs {gt.shape}")
    sel = gt.valid.copy()
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != gt.shape:
            raise ValueError(f"mask shape {mask.shape} does not match flow shape {gt.shape}")
        sel &= mask
    return sel


def pixel_errors(pred: FlowField, gt: FlowField) -> np.ndarray:
    """Per-pixel end-point error ``||pred - gt||`` (not masked)."""
    d = pred.uv - gt.uv
    return np.hypot(d[..., 0], d[..., 1])


def end_point_error(pred: FlowField, gt: FlowField, mask=None) -> float:
    """Mean Euclidean end-point error over pixels valid in ``gt`` and ``mask``.

    Raises ``ValueError`` on shape mismatch or an empty evaluation set.
    """
    sel = _evaluation_set(pred, gt, mask)
    if not sel.any():
        raise ValueError("no pixels to evaluate")
    return float(pixel_errors(pred, gt)[sel].mean())


def outlier_rate(pred: FlowField, gt: FlowField, mask=None, threshold: float = OUTLIER_THRESHOLD) -> float:
    """Fraction of evaluated pixels whose error is strictly above ``threshold``."""
    sel = _evaluation_set(pred, gt, mask)
    if not sel.any():
        raise ValueError("no pixels to evaluate")
    return float((pixel_errors(pred, gt)[sel] > threshold).mean())


def flow_metrics(pred: FlowField, gt_noc: FlowField, gt_occ: FlowField | None = None,
                 threshold: float = OUTLIER_THRESHOLD) -> FlowMetrics:
    """KITTI-style scores.

    Noc statistics use ``gt_noc``'s validity; All statistics use ``gt_occ``
    when given and fall back to ``gt_noc`` otherwise.  Density is the share
    of All-evaluated pixels where ``pred`` is valid.
    """
    gt_all = gt_occ if gt_occ is not None else gt_noc
    if gt_noc.shape != gt_all.shape:
        raise ValueError(f"ground-truth shapes differ: {gt_noc.shape} vs {gt_all.shape}")
    sel_all = _evaluation_set(pred, gt_all, None)
    sel_noc = _evaluation_set(pred, gt_noc, None)
    err_all = pixel_errors(pred, gt_all)
    err_noc = pixel_errors(pred, gt_noc)

    def stats(err, sel):
        if not sel.any():
            return None, None
        e = err[sel]
        return float(e.mean()), float((e > threshold).mean())

    epe_all, out_all = stats(err_all, sel_all)
    epe_noc, out_noc = stats(err_noc, sel_noc)
    n = int(sel_all.sum())
    density = float((pred.valid & sel_all).sum() / n) if n else 0.0
    return FlowMetrics(epe_all, epe_noc, out_all, out_noc, n, density)


METRICS_CSV_HEADER = "frame,epe_noc,epe_all,out_noc,out_all,density"


def metrics_csv_row(frame: str, m: FlowMetrics) -> str:
    def fmt(v):
        return "" if v is None else f"{v:.6f}"

    return ",".join([frame, fmt(m.epe_noc), fmt(m.epe_all), fmt(m.out_noc), fmt(m.out_all), fmt(m.density)])


def write_metrics(csv_path, json_path, rows: list[tuple[str, FlowMetrics]]) -> dict:
    """Write per-frame CSV rows and a JSON summary; returns the summary."""
    with open(csv_path, "w") as fh:
        fh.write(METRICS_CSV_HEADER + "\n")
        for frame, m in rows:
            fh.write(metrics_csv_row(frame, m) + "\n")

    def mean(key):
        vals = [getattr(m, key) for _, m in rows if getattr(m, key) is not None]
        return float(np.mean(vals)) if vals else None

    summary = {
        "frames": len(rows),
        **{key: mean(key) for key in ("epe_noc", "epe_all", "out_noc", "out_all", "density")},
        "per_frame": {frame: m.as_dict() for frame, m in rows},
    }
    with open(json_path, "w") as fh:
        json.dump(summary, fh, indent=2)
    return summary


# --- KITTI flow PNG ---------------------------------------------------------

def read_flow_kitti(path) -> FlowField:
    """Decode a KITTI 16-bit RGB flow PNG.

    Channels are ``(u, v, valid)`` with ``flow = (stored - 2**15) / 64``.
    Invalid pixels come back with zero flow.
    """
    path = os.fspath(path)
    if not os.path.isfile(path):
        raise FileNotFoundError(f"no such flow file: {path}")
    raw = cv2.imread(path, cv2.IMREAD_UNCHANGED)
    if raw is None:
        raise ValueError(f"could not decode flow PNG: {path}")
    if raw.dtype != np.uint16:
        raise ValueError(f"{path}: KITTI flow must be 16-bit, got {raw.dtype}")
    if raw.ndim != 3 or raw.shape[2] != 3:
        raise ValueError(f"{path}: KITTI flow must have 3 channels, got shape {raw.shape}")
    rgb = raw[:, :, ::-1].astype(np.float64)
    valid = rgb[:, :, 2] > 0
    uv = (rgb[:, :, :2] - KITTI_OFFSET) / KITTI_SCALE
    uv[~valid] = 0.0
    return FlowField(uv, valid)


def encode_flow_kitti(field: FlowField) -> np.ndarray:
    """Return the ``(H, W, 3)`` uint16 ``(u, v, valid)`` array for ``field``."""
    enc = np.rint(field.uv * KITTI_SCALE + KITTI_OFFSET)
    valid = field.valid
    vals = enc[valid]
    if vals.size and (not np.isfinite(vals).all() or vals.min() < 0 or vals.max() > 65535):
        raise ValueError("flow exceeds the KITTI 16-bit range of about +/-512 px")
    out = np.zeros(field.shape + (3,), dtype=np.uint16)
    out[valid, :2] = vals.astype(np.uint16)
    out[valid, 2] = 1
    return out


def write_flow_kitti(field: FlowField, path) -> None:
    out = encode_flow_kitti(field)
    if not cv2.imwrite(os.fspath(path), np.ascontiguousarray(out[:, :, ::-1])):
        raise OSError(f"could not write flow PNG: {path}")


# --- visualization ----------------------------------------------------------

def _hsv_to_rgb(h, s, v):
    """Vectorized HSV->RGB with hue in degrees, s and v in [0, 1]."""
    h = np.mod(h, 360.0) / 60.0
    i = np.floor(h).astype(int) % 6
    f = h - np.floor(h)
    p = v * (1 - s)
    q = v * (1 - s * f)
    t = v * (1 - s * (1 - f))
    r = np.choose(i, [v, q, p, p, t, v])
    g = np.choose(i, [t, v, v, q, p, p])
    b = np.choose(i, [p, p, t, v, v, q])
    return np.stack([r, g, b], axis=-1)


def flow_to_color(field: FlowField, max_magnitude: float | None = None) -> np.ndarray:
    """Render flow as an 8-bit RGB image.

    Hue encodes direction ``atan2(v, u)``; saturation grows with magnitude
    up to ``max_magnitude`` (the largest valid magnitude when ``None``).  Zero
    flow is white and invalid pixels are black.
    """
    u, v = field.u, field.v
    mag = np.hypot(u, v)
    if max_magnitude is None:
        vals = mag[field.valid]
        max_magnitude = float(vals.max()) if vals.size else 0.0
    if max_magnitude <= 0:
        max_magnitude = 1.0
    hue = np.degrees(np.arctan2(v, u))
    sat = np.clip(mag / max_magnitude, 0.0, 1.0)
    rgb = _hsv_to_rgb(hue, sat, np.ones_like(sat))
    rgb[~field.valid] = 0.0
    return np.rint(rgb * 255).astype(np.uint8)
