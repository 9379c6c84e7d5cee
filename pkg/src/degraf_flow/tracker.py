"""Sparse point tracking by pyramidal Lucas-Kanade.

This is a robustified LK in the spirit of RLOF: optional Huber weighting of
per-pixel residuals and an optional per-window gain/bias illumination model
estimated jointly with the displacement.  Adaptive support regions are not
modelled.
"""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass

import numba
import numpy as np

from .core import as_gray, build_pyramid, gradient, max_pyramid_levels


class Status(enum.IntEnum):
    VALID = 0
    LOST_TEXTURE = 1
    DIVERGED = 2
    OUT_OF_BOUNDS = 3
    FB_FAILED = 4

    @property
    def label(self) -> str:
        return self.name.lower()


@dataclass(frozen=True)
class TrackParams:
    window_radius: int = 10
    pyramid_levels: int = 4
    max_iterations: int = 30
    convergence_eps: float = 0.01
    min_eigenvalue: float = 1e-4
    robust_norm: bool = True
    illumination_model: bool = True
    fb_threshold: float = 1.0
    pyramid_scale: float = 0.5
    # Huber scale is 1.345 * 1.4826 * MAD of the residuals, never below this.
    huber_min_scale: float = 2.0

    def __post_init__(self):
        if self.window_radius < 2:
            raise ValueError("window_radius must be >= 2")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.convergence_eps <= 0:
            raise ValueError("convergence_eps must be > 0")
        if self.min_eigenvalue < 0:
            raise ValueError("min_eigenvalue must be >= 0")
        if self.pyramid_levels < 1:
            raise ValueError("pyramid_levels must be >= 1")


@dataclass
class SparseFlow:
    """Point correspondences ``origin -> origin + displacement`` with status codes."""

    origins: np.ndarray
    displacements: np.ndarray
    status: np.ndarray

    def __post_init__(self):
        self.origins = np.asarray(self.origins, dtype=np.float64).reshape(-1, 2)
        self.displacements = np.asarray(self.displacements, dtype=np.float64).reshape(-1, 2)
        self.status = np.asarray(self.status, dtype=np.int8).reshape(-1)
        n = len(self.origins)
        if len(self.displacements) != n or len(self.status) != n:
            raise ValueError("origins, displacements and status must have equal length")

    def __len__(self) -> int:
        return len(self.origins)

    @property
    def valid(self) -> np.ndarray:
        return self.status == Status.VALID

    @property
    def endpoints(self) -> np.ndarray:
        return self.origins + self.displacements

    def to_csv(self, path) -> None:
        """Write ``x,y,u,v,status`` rows with 4 decimals."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["x", "y", "u", "v", "status"])
            for (x, y), (u, v), s in zip(self.origins, self.displacements, self.status):
                writer.writerow([f"{x:.4f}", f"{y:.4f}", f"{u:.4f}", f"{v:.4f}", Status(s).label])

    @classmethod
    def from_csv(cls, path) -> "SparseFlow":
        by_label = {s.label: s for s in Status}
        origins, disps, status = [], [], []
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            need = {"x", "y", "u", "v", "status"}
            if reader.fieldnames is None or not need <= set(reader.fieldnames):
                raise ValueError(f"{path}: expected header x,y,u,v,status")
            for row in reader:
                label = row["status"].strip().lower()
                if label not in by_label:
                    raise ValueError(f"{path}: unknown status {row['status']!r}")
                origins.append((float(row["x"]), float(row["y"])))
                disps.append((float(row["u"]), float(row["v"])))
                status.append(by_label[label])
        return cls(np.reshape(origins, (-1, 2)), np.reshape(disps, (-1, 2)), np.asarray(status))


@numba.njit(cache=True, inline="always")
def _bilinear(img, x, y):
    h, w = img.shape
    x0 = min(int(np.floor(x)), w - 2)
    y0 = min(int(np.floor(y)), h - 2)
    fx = x - x0
    fy = y - y0
    top = img[y0, x0] * (1.0 - fx) + img[y0, x0 + 1] * fx
    bot = img[y0 + 1, x0] * (1.0 - fx) + img[y0 + 1, x0 + 1] * fx
    return top * (1.0 - fy) + bot * fy


@numba.njit(cache=True)
def _solve(a, b):
    # Gaussian elimination with partial pivoting; returns False when singular.
    n = b.shape[0]
    m = a.copy()
    r = b.copy()
    for c in range(n):
        p = c
        for k in range(c + 1, n):
            if abs(m[k, c]) > abs(m[p, c]):
                p = k
        if abs(m[p, c]) < 1e-12:
            return False, r
        if p != c:
            for j in range(n):
                m[c, j], m[p, j] = m[p, j], m[c, j]
            r[c], r[p] = r[p], r[c]
        for k in range(c + 1, n):
            f = m[k, c] / m[c, c]
            for j in range(c, n):
                m[k, j] -= f * m[c, j]
            r[k] -= f * r[c]
    for c in range(n - 1, -1, -1):
        s = r[c]
        for j in range(c + 1, n):
            s -= m[c, j] * r[j]
        r[c] = s / m[c, c]
    return True, r


@numba.njit(cache=True, parallel=True)
def _track_level(i1, gx, gy, i2, pts, disp, gain, bias, status, finest,
                 radius, max_iter, eps, min_eig, robust, illum, huber_min):
    h, w = i1.shape
    side = 2 * radius + 1
    area = side * side
    for p in numba.prange(pts.shape[0]):
        if status[p] != 0:
            continue
        px = pts[p, 0]
        py = pts[p, 1]
        ox = np.empty(area, dtype=np.int64)
        oy = np.empty(area, dtype=np.int64)
        tv = np.empty(area)
        tgx = np.empty(area)
        tgy = np.empty(area)
        n = 0
        for dy in range(-radius, radius + 1):
            y = py + dy
            if y < 0.0 or y > h - 1:
                continue
            for dx in range(-radius, radius + 1):
                x = px + dx
                if x < 0.0 or x > w - 1:
                    continue
                ox[n] = dx
                oy[n] = dy
                tv[n] = _bilinear(i1, x, y)
                tgx[n] = _bilinear(gx, x, y)
                tgy[n] = _bilinear(gy, x, y)
                n += 1
        if 2 * n < area:
            if finest:
                status[p] = 3
            continue
        gxx = 0.0
        gxy = 0.0
        gyy = 0.0
        for k in range(n):
            gxx += tgx[k] * tgx[k]
            gxy += tgx[k] * tgy[k]
            gyy += tgy[k] * tgy[k]
        # minimum eigenvalue per pixel, gradients in [0, 1] intensity units
        norm = n * 255.0 * 255.0
        tr = (gxx + gyy) / norm
        det_part = np.sqrt(((gxx - gyy) / norm) ** 2 + 4.0 * (gxy / norm) ** 2)
        if 0.5 * (tr - det_part) < min_eig:
            if finest:
                status[p] = 1
            continue

        dxp = disp[p, 0]
        dyp = disp[p, 1]
        a = gain[p]
        b = bias[p]
        res = np.empty(n)
        inside = np.empty(n, dtype=np.bool_)
        absr = np.empty(n)
        outcome = 0
        for it in range(max_iter):
            bx = px + dxp
            by = py + dyp
            ix = int(np.floor(bx))
            iy = int(np.floor(by))
            fx = bx - ix
            fy = by - iy
            cnt = 0
            for k in range(n):
                x = bx + ox[k]
                y = by + oy[k]
                if x < 0.0 or x > w - 1 or y < 0.0 or y > h - 1:
                    inside[k] = False
                    continue
                inside[k] = True
                c = ix + ox[k]
                r = iy + oy[k]
                ffx = fx
                ffy = fy
                if c > w - 2:
                    c = w - 2
                    ffx = 1.0
                if r > h - 2:
                    r = h - 2
                    ffy = 1.0
                top = i2[r, c] + ffx * (i2[r, c + 1] - i2[r, c])
                bot = i2[r + 1, c] + ffx * (i2[r + 1, c + 1] - i2[r + 1, c])
                val = top + ffy * (bot - top)
                res[k] = val - (1.0 + a) * tv[k] - b
                absr[cnt] = abs(res[k])
                cnt += 1
            if 2 * cnt < area:
                outcome = 3
                break
            scale = 0.0
            if robust:
                scale = 1.345 * 1.4826 * np.median(absr[:cnt])
                if scale < huber_min:
                    scale = huber_min
            # weighted normal equations for J = [gx, gy, -I, -1]
            sxx = 0.0
            sxy = 0.0
            syy = 0.0
            sxi = 0.0
            syi = 0.0
            sii = 0.0
            sx1 = 0.0
            sy1 = 0.0
            si1 = 0.0
            s11 = 0.0
            rx = 0.0
            ry = 0.0
            ri = 0.0
            r1 = 0.0
            for k in range(n):
                if not inside[k]:
                    continue
                e = res[k]
                wk = 1.0
                if robust:
                    ae = abs(e)
                    if ae > scale:
                        wk = scale / ae
                jx = tgx[k]
                jy = tgy[k]
                wx = wk * jx
                wy = wk * jy
                sxx += wx * jx
                sxy += wx * jy
                syy += wy * jy
                rx -= wx * e
                ry -= wy * e
                if illum:
                    ji = tv[k]
                    wi = wk * ji
                    sxi -= wx * ji
                    syi -= wy * ji
                    sii += wi * ji
                    sx1 -= wx
                    sy1 -= wy
                    si1 += wi
                    s11 += wk
                    ri += wi * e
                    r1 += wk * e
            if illum:
                mat = np.empty((4, 4))
                mat[0, 0] = sxx
                mat[0, 1] = sxy
                mat[0, 2] = sxi
                mat[0, 3] = sx1
                mat[1, 1] = syy
                mat[1, 2] = syi
                mat[1, 3] = sy1
                mat[2, 2] = sii
                mat[2, 3] = si1
                mat[3, 3] = s11
                for rr in range(4):
                    for cc in range(rr):
                        mat[rr, cc] = mat[cc, rr]
                rhs = np.empty(4)
                rhs[0] = rx
                rhs[1] = ry
                rhs[2] = ri
                rhs[3] = r1
                ok, step = _solve(mat, rhs)
                if not ok:
                    outcome = 1
                    break
                sx = step[0]
                sy = step[1]
                a += step[2]
                b += step[3]
            else:
                det = sxx * syy - sxy * sxy
                if abs(det) < 1e-12:
                    outcome = 1
                    break
                sx = (syy * rx - sxy * ry) / det
                sy = (sxx * ry - sxy * rx) / det
            if not (np.isfinite(sx) and np.isfinite(sy)):
                outcome = 2
                break
            dxp += sx
            dyp += sy
            mag = np.sqrt(sx * sx + sy * sy)
            if mag > radius:
                outcome = 2
                break
            if mag < eps:
                break
        if outcome == 2:
            status[p] = 2
            continue
        if outcome != 0:
            if finest:
                status[p] = outcome
            continue
        disp[p, 0] = dxp
        disp[p, 1] = dyp
        gain[p] = a
        bias[p] = b


def _as_points(points) -> np.ndarray:
    pts = getattr(points, "points", points)
    return np.ascontiguousarray(np.asarray(pts, dtype=np.float64).reshape(-1, 2))


def track_points(frame1, frame2, points, params: TrackParams | None = None) -> SparseFlow:
    """Track ``points`` from ``frame1`` into ``frame2``.

    Parameters
    ----------
    frame1, frame2 : array_like
        Gray images of equal shape.
    points : KeypointGrid or array_like, shape (N, 2)
        Subpixel ``(x, y)`` positions in ``frame1``.
    params : TrackParams, optional

    Returns
    -------
    SparseFlow
        One record per input point.  Records are ``VALID`` only when the
        endpoint lies inside ``frame2``.
    """
    params = params or TrackParams()
    frame1 = as_gray(frame1, "frame1")
    frame2 = as_gray(frame2, "frame2")
    if frame1.shape != frame2.shape:
        raise ValueError(f"frame shapes differ: {frame1.shape} vs {frame2.shape}")
    pts = _as_points(points)
    h, w = frame1.shape
    if len(pts) and ((pts < 0).any() or (pts[:, 0] > w - 1).any() or (pts[:, 1] > h - 1).any()):
        raise ValueError("points must lie inside frame1")

    n = len(pts)
    disp = np.zeros((n, 2))
    status = np.zeros(n, dtype=np.int8)
    if n == 0 or min(h, w) < 3:
        status[:] = Status.OUT_OF_BOUNDS
        return SparseFlow(pts, disp, status)

    scale = params.pyramid_scale
    levels = max_pyramid_levels(frame1.shape, scale, params.pyramid_levels)
    pyr1 = build_pyramid(frame1, levels, scale)
    pyr2 = build_pyramid(frame2, levels, scale)
    gain = np.zeros(n)
    bias = np.zeros(n)
    for level in range(levels - 1, -1, -1):
        i1 = pyr1[level]
        if min(i1.shape) < 3:
            continue
        gx, gy = gradient(i1)
        lvl_pts = np.ascontiguousarray(pts * scale**level)
        _track_level(i1, gx, gy, pyr2[level], lvl_pts, disp, gain, bias, status, level == 0,
                     params.window_radius, params.max_iterations, params.convergence_eps,
                     params.min_eigenvalue, params.robust_norm, params.illumination_model,
                     params.huber_min_scale)
        if level > 0:
            disp /= scale

    end = pts + disp
    ok = status == Status.VALID
    bad = ~np.isfinite(end).all(axis=1)
    status[ok & bad] = Status.DIVERGED
    outside = (end[:, 0] < 0) | (end[:, 0] > w - 1) | (end[:, 1] < 0) | (end[:, 1] > h - 1)
    status[(status == Status.VALID) & outside] = Status.OUT_OF_BOUNDS
    disp[~np.isfinite(disp)] = 0.0
    return SparseFlow(pts, disp, status)


def forward_backward_filter(fwd: SparseFlow, frame1, frame2, params: TrackParams | None = None) -> SparseFlow:
    """Re-track valid endpoints back into ``frame1`` and flag large round trips.

    Records whose backward track fails or whose round-trip error exceeds
    ``params.fb_threshold`` become ``FB_FAILED``; everything else is copied
    unchanged.
    """
    params = params or TrackParams()
    status = fwd.status.copy()
    idx = np.flatnonzero(fwd.valid)
    if len(idx):
        back = track_points(frame2, frame1, fwd.endpoints[idx], params)
        err = np.linalg.norm(fwd.endpoints[idx] + back.displacements - fwd.origins[idx], axis=1)
        fail = (back.status != Status.VALID) | ~(err <= params.fb_threshold)
        status[idx[fail]] = Status.FB_FAILED
    return SparseFlow(fwd.origins.copy(), fwd.displacements.copy(), status)
