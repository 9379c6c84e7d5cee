"""Edge-preserving sparse-to-dense flow interpolation.

Seeds (valid sparse matches) are spread over the pixel grid by a geodesic
distance whose edge weights grow with the image gradient, so distances jump
across image edges.  Each pixel inherits the k geodesically nearest seeds of
its own Voronoi cell, approximated through the cell adjacency graph, and the
dense flow is the locally weighted affine fit to those seeds.

Because a pixel's distance to seed ``j`` is modelled as ``D(p) + G(l(p), j)``
with ``l(p)`` the pixel's nearest seed, the factor ``exp(-D(p)/sigma)`` is
common to all neighbors and drops out of the weighted fit.  One affine model
per seed therefore reproduces the per-pixel fit exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

from .core import as_gray, gradient
from .tracker import SparseFlow

DEFAULT_K = 128
DEFAULT_LAMBDA = 100.0
DEFAULT_SIGMA = 10.0
MAX_CONDITION = 1e8


@dataclass
class FlowField:
    """Dense ``(H, W, 2)`` flow ``(u, v)`` in pixels plus a validity mask."""

    uv: np.ndarray
    valid: np.ndarray

    def __post_init__(self):
        self.uv = np.asarray(self.uv, dtype=np.float64)
        if self.uv.ndim != 3 or self.uv.shape[2] != 2:
            raise ValueError(f"uv must have shape (H, W, 2), got {self.uv.shape}")
        self.valid = np.asarray(self.valid, dtype=bool)
        if self.valid.shape != self.uv.shape[:2]:
            raise ValueError("valid mask shape does not match uv")

    @classmethod
    def constant(cls, shape, u: float, v: float) -> "FlowField":
        uv = np.empty(tuple(shape) + (2,))
        uv[..., 0] = u
        uv[..., 1] = v
        return cls(uv, np.ones(shape, dtype=bool))

    @property
    def shape(self) -> tuple[int, int]:
        return self.uv.shape[:2]

    @property
    def u(self) -> np.ndarray:
        return self.uv[..., 0]

    @property
    def v(self) -> np.ndarray:
        return self.uv[..., 1]


def edge_cost_map(image) -> np.ndarray:
    """Gradient magnitude scaled so its maximum is 1 (all zeros if flat)."""
    image = as_gray(image)
    if image.shape[0] < 3 or image.shape[1] < 3:
        raise ValueError(f"edge_cost_map needs an image of at least 3x3, got {image.shape}")
    gx, gy = gradient(image)
    mag = np.hypot(gx, gy)
    top = mag.max()
    if top > 0:
        mag /= top
    return mag


# --- geodesic label map -----------------------------------------------------

@numba.njit(cache=True, inline="always")
def _less(d1, l1, d2, l2):
    return d1 < d2 or (d1 == d2 and l1 < l2)


@numba.njit(cache=True)
def _heap_push(hd, hl, hn, size, d, lab, node):
    i = size
    hd[i] = d
    hl[i] = lab
    hn[i] = node
    while i > 0:
        parent = (i - 1) >> 1
        if _less(hd[i], hl[i], hd[parent], hl[parent]):
            hd[i], hd[parent] = hd[parent], hd[i]
            hl[i], hl[parent] = hl[parent], hl[i]
            hn[i], hn[parent] = hn[parent], hn[i]
            i = parent
        else:
            break
    return size + 1


@numba.njit(cache=True)
def _heap_pop(hd, hl, hn, size):
    d, lab, node = hd[0], hl[0], hn[0]
    size -= 1
    hd[0], hl[0], hn[0] = hd[size], hl[size], hn[size]
    i = 0
    while True:
        left = 2 * i + 1
        if left >= size:
            break
        c = left
        right = left + 1
        if right < size and _less(hd[right], hl[right], hd[left], hl[left]):
            c = right
        if _less(hd[c], hl[c], hd[i], hl[i]):
            hd[i], hd[c] = hd[c], hd[i]
            hl[i], hl[c] = hl[c], hl[i]
            hn[i], hn[c] = hn[c], hn[i]
            i = c
        else:
            break
    return d, lab, node, size


@numba.njit(cache=True)
def _geodesic_labels(cost, seed_pix, lam, eight):
    h, w = cost.shape
    npix = h * w
    flat = cost.ravel()
    dist = np.full(npix, np.inf)
    label = np.full(npix, -1, dtype=np.int64)
    done = np.zeros(npix, dtype=np.bool_)
    cap = 9 * npix + seed_pix.shape[0] + 1
    hd = np.empty(cap)
    hl = np.empty(cap, dtype=np.int64)
    hn = np.empty(cap, dtype=np.int64)
    size = 0
    for s in range(seed_pix.shape[0]):
        p = seed_pix[s]
        if label[p] < 0:
            dist[p] = 0.0
            label[p] = s
            size = _heap_push(hd, hl, hn, size, 0.0, s, p)
    if eight:
        offs_y = np.array([-1, 1, 0, 0, -1, -1, 1, 1])
        offs_x = np.array([0, 0, -1, 1, -1, 1, -1, 1])
    else:
        offs_y = np.array([-1, 1, 0, 0])
        offs_x = np.array([0, 0, -1, 1])
    diag = np.sqrt(2.0)
    while size > 0:
        d, lab, p, size = _heap_pop(hd, hl, hn, size)
        if done[p] or d != dist[p] or lab != label[p]:
            continue
        done[p] = True
        py = p // w
        px = p - py * w
        for o in range(offs_y.shape[0]):
            qy = py + offs_y[o]
            qx = px + offs_x[o]
            if qy < 0 or qy >= h or qx < 0 or qx >= w:
                continue
            q = qy * w + qx
            if done[q]:
                continue
            step = 1.0 + lam * 0.5 * (flat[p] + flat[q])
            if o >= 4:
                step *= diag
            nd = d + step
            if _less(nd, lab, dist[q], label[q]):
                dist[q] = nd
                label[q] = lab
                size = _heap_push(hd, hl, hn, size, nd, lab, q)
    return dist.reshape(h, w), label.reshape(h, w)


def _edge_weights(cost, lam, eight):
    """Pairs of neighboring flat pixel indices and their geodesic step costs."""
    h, w = cost.shape
    idx = np.arange(h * w).reshape(h, w)
    pairs = [
        (idx[:, :-1], idx[:, 1:], cost[:, :-1], cost[:, 1:], 1.0),
        (idx[:-1, :], idx[1:, :], cost[:-1, :], cost[1:, :], 1.0),
    ]
    if eight:
        pairs += [
            (idx[:-1, :-1], idx[1:, 1:], cost[:-1, :-1], cost[1:, 1:], np.sqrt(2.0)),
            (idx[:-1, 1:], idx[1:, :-1], cost[:-1, 1:], cost[1:, :-1], np.sqrt(2.0)),
        ]
    for a, b, ca, cb, length in pairs:
        yield a.ravel(), b.ravel(), ((1.0 + lam * 0.5 * (ca + cb)) * length).ravel()


# --- seed graph k-NN --------------------------------------------------------

@numba.njit(cache=True)
def _seed_knn(indptr, indices, weights, k):
    n = indptr.shape[0] - 1
    ids = np.full((n, k), -1, dtype=np.int64)
    dists = np.full((n, k), np.inf)
    best = np.full(n, np.inf)
    done = np.zeros(n, dtype=np.bool_)
    touched = np.empty(n, dtype=np.int64)
    cap = indices.shape[0] + 2
    hd = np.empty(cap)
    hl = np.empty(cap, dtype=np.int64)
    hn = np.empty(cap, dtype=np.int64)
    for s in range(n):
        ntouch = 0
        size = 0
        best[s] = 0.0
        touched[ntouch] = s
        ntouch += 1
        size = _heap_push(hd, hl, hn, size, 0.0, s, s)
        found = 0
        while size > 0 and found < k:
            d, lab, u, size = _heap_pop(hd, hl, hn, size)
            if done[u] or d != best[u]:
                continue
            done[u] = True
            ids[s, found] = u
            dists[s, found] = d
            found += 1
            for e in range(indptr[u], indptr[u + 1]):
                v = indices[e]
                if done[v]:
                    continue
                nd = d + weights[e]
                if _less(nd, v, best[v], v):
                    if best[v] == np.inf:
                        touched[ntouch] = v
                        ntouch += 1
                    best[v] = nd
                    size = _heap_push(hd, hl, hn, size, nd, v, v)
        for t in range(ntouch):
            v = touched[t]
            best[v] = np.inf
            done[v] = False
    return ids, dists


@dataclass
class SeedNeighborhood:
    """Geodesic nearest-seed structure over an image.

    ``labels``/``distance`` hold each pixel's nearest seed and its geodesic
    distance.  ``seed_ids[s]``/``seed_dists[s]`` list the k seeds nearest to
    seed ``s`` through the cell adjacency graph (``s`` itself first, padded
    with -1/inf).  A pixel's neighbors are those of its label, with distances
    offset by the pixel's own distance.
    """

    labels: np.ndarray
    distance: np.ndarray
    seed_ids: np.ndarray
    seed_dists: np.ndarray

    @property
    def k(self) -> int:
        return self.seed_ids.shape[1]

    def neighbors(self, x: int, y: int) -> tuple[np.ndarray, np.ndarray]:
        lab = self.labels[y, x]
        ids = self.seed_ids[lab]
        keep = ids >= 0
        return ids[keep], self.distance[y, x] + self.seed_dists[lab][keep]


def seed_pixels(seeds: np.ndarray, shape: tuple[int, int]) -> np.ndarray:
    """Flat pixel index nearest to each ``(x, y)`` seed."""
    h, w = shape
    seeds = np.asarray(seeds, dtype=np.float64).reshape(-1, 2)
    px = np.clip(np.rint(seeds[:, 0]).astype(np.int64), 0, w - 1)
    py = np.clip(np.rint(seeds[:, 1]).astype(np.int64), 0, h - 1)
    return py * w + px


def geodesic_distance(cost, seeds, lam: float = DEFAULT_LAMBDA, connectivity: int = 4):
    """Multi-source geodesic distance and nearest-seed label map.

    Ties in distance resolve to the lowest seed index.
    """
    cost = np.ascontiguousarray(cost, dtype=np.float64)
    if len(seeds) == 0:
        raise ValueError("at least one seed is required")
    if connectivity not in (4, 8):
        raise ValueError(f"connectivity must be 4 or 8, got {connectivity}")
    pix = seed_pixels(seeds, cost.shape)
    return _geodesic_labels(cost, pix, float(lam), connectivity == 8)


def _seed_graph(cost, dist, labels, pix, lam, eight, nseeds):
    flat_d = dist.ravel()
    flat_l = labels.ravel()
    src, dst, wt = [], [], []
    for a, b, step in _edge_weights(cost, lam, eight):
        la, lb = flat_l[a], flat_l[b]
        cross = la != lb
        src.append(la[cross])
        dst.append(lb[cross])
        wt.append(flat_d[a[cross]] + step[cross] + flat_d[b[cross]])
    # seeds sharing a pixel with a lower-index seed own no cell
    owner = flat_l[pix]
    orphan = owner != np.arange(nseeds)
    src.append(np.flatnonzero(orphan))
    dst.append(owner[orphan])
    wt.append(flat_d[pix[orphan]])

    src = np.concatenate(src)
    dst = np.concatenate(dst)
    wt = np.concatenate(wt)
    # undirected: keep the minimum weight per unordered pair
    lo = np.minimum(src, dst)
    hi = np.maximum(src, dst)
    key = lo * nseeds + hi
    order = np.lexsort((wt, key))
    key, wt = key[order], wt[order]
    first = np.ones(len(key), dtype=bool)
    first[1:] = key[1:] != key[:-1]
    key, wt = key[first], wt[first]
    lo, hi = key // nseeds, key % nseeds

    rows = np.concatenate([lo, hi])
    cols = np.concatenate([hi, lo])
    wts = np.concatenate([wt, wt])
    order = np.lexsort((cols, rows))
    rows, cols, wts = rows[order], cols[order], wts[order]
    indptr = np.zeros(nseeds + 1, dtype=np.int64)
    np.cumsum(np.bincount(rows, minlength=nseeds), out=indptr[1:])
    return indptr, cols.astype(np.int64), wts


def geodesic_nearest_seeds(cost, seeds, k: int, lam: float = DEFAULT_LAMBDA,
                           connectivity: int = 4) -> SeedNeighborhood:
    """Approximate k geodesically nearest seeds for every pixel.

    Parameters
    ----------
    cost : ndarray
        Edge cost map, values in ``[0, 1]``.
    seeds : array_like, shape (S, 2)
        Seed ``(x, y)`` positions, rounded to the nearest pixel.
    k : int
        Neighbors per pixel; truncated to the number of seeds.
    lam : float
        Edge penalty; the step between neighboring pixels ``p, q`` costs
        ``1 + lam * (cost[p] + cost[q]) / 2``.
    connectivity : {4, 8}
    """
    seeds = np.asarray(seeds, dtype=np.float64).reshape(-1, 2)
    if len(seeds) == 0:
        raise ValueError("at least one seed is required")
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    cost = np.ascontiguousarray(cost, dtype=np.float64)
    dist, labels = geodesic_distance(cost, seeds, lam, connectivity)
    pix = seed_pixels(seeds, cost.shape)
    n = len(seeds)
    indptr, indices, weights = _seed_graph(cost, dist, labels, pix, float(lam), connectivity == 8, n)
    ids, dists = _seed_knn(indptr, indices, weights, min(k, n))
    return SeedNeighborhood(labels, dist, ids, dists)


# --- local affine models ----------------------------------------------------

@dataclass(frozen=True)
class AffineModel:
    """``flow(x, y) = params @ [x, y, 1]``; ``params`` has shape (2, 3)."""

    params: np.ndarray
    constant: bool

    def __call__(self, x, y) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        p = self.params
        return np.stack([p[0, 0] * x + p[0, 1] * y + p[0, 2], p[1, 0] * x + p[1, 1] * y + p[1, 2]], axis=-1)


def _fit_affine_batch(pos, flow, dist, mask, sigma, max_cond=MAX_CONDITION):
    """Weighted affine fits for a batch of neighbor sets.

    ``pos``, ``flow``: (B, K, 2); ``dist``, ``mask``: (B, K).  Returns
    ``params`` (B, 2, 3) in absolute coordinates and a (B,) flag marking the
    constant-model fallback.
    """
    dist = np.where(mask, dist, np.inf)
    dmin = dist.min(axis=1, keepdims=True)
    wts = np.where(mask, np.exp(-(dist - dmin) / sigma), 0.0)
    wsum = wts.sum(axis=1)
    mean_flow = (wts[..., None] * flow).sum(axis=1) / wsum[:, None]
    center = (wts[..., None] * pos).sum(axis=1) / wsum[:, None]

    rel = pos - center[:, None, :]
    sw = np.sqrt(wts)
    design = np.stack([rel[..., 0], rel[..., 1], np.ones_like(rel[..., 0])], axis=-1) * sw[..., None]
    rhs = flow * sw[..., None]
    u, s, vt = np.linalg.svd(design, full_matrices=False)
    with np.errstate(divide="ignore", invalid="ignore"):
        cond = s[:, 0] / s[:, -1]
    enough = mask.sum(axis=1) >= 3
    affine = enough & np.isfinite(cond) & (cond <= max_cond)

    s_inv = np.where(affine[:, None], 1.0 / np.where(s > 0, s, 1.0), 0.0)
    coef = np.einsum("bji,bj,bkj,bkc->bic", vt, s_inv, u, rhs)  # (B, 3, 2)

    params = np.zeros((len(pos), 2, 3))
    lin = coef[:, :2, :].transpose(0, 2, 1)  # (B, 2, 2): rows u/v, cols x/y
    params[:, :, :2] = lin
    params[:, :, 2] = coef[:, 2, :] - np.einsum("bij,bj->bi", lin, center)
    const = ~affine
    params[const] = 0.0
    params[const, :, 2] = mean_flow[const]
    return params, const


def fit_local_affine(positions, flows, distances, sigma: float = DEFAULT_SIGMA,
                     max_cond: float = MAX_CONDITION) -> AffineModel:
    """Fit a Gaussian-weighted affine flow model to neighbor seeds.

    Weights are ``exp(-distance / sigma)``.  With fewer than three neighbors,
    or a weighted design whose condition number exceeds ``max_cond``, the
    model falls back to the weighted mean flow.
    """
    pos = np.asarray(positions, dtype=np.float64).reshape(1, -1, 2)
    flo = np.asarray(flows, dtype=np.float64).reshape(1, -1, 2)
    dist = np.asarray(distances, dtype=np.float64).reshape(1, -1)
    if pos.shape[1] < 1:
        raise ValueError("at least one neighbor is required")
    params, const = _fit_affine_batch(pos, flo, dist, np.ones(dist.shape, dtype=bool), sigma, max_cond)
    return AffineModel(params[0], bool(const[0]))


def interpolate(sparse: SparseFlow, image, k: int = DEFAULT_K, lam: float = DEFAULT_LAMBDA,
                sigma: float = DEFAULT_SIGMA, connectivity: int = 4) -> FlowField:
    """Densify the valid records of ``sparse`` over the grid of ``image``.

    Invalid records are ignored.  Every output pixel is valid.
    """
    image = as_gray(image)
    valid = sparse.valid
    if not valid.any():
        raise ValueError("sparse flow has no valid records to interpolate")
    seeds = sparse.origins[valid]
    flows = sparse.displacements[valid]
    cost = edge_cost_map(image)
    nbhd = geodesic_nearest_seeds(cost, seeds, k, lam, connectivity)

    ids = nbhd.seed_ids
    mask = ids >= 0
    safe = np.where(mask, ids, 0)
    params, _ = _fit_affine_batch(seeds[safe], flows[safe], nbhd.seed_dists, mask, sigma)

    h, w = image.shape
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    p = params[nbhd.labels]
    u = p[..., 0, 0] * xx + p[..., 0, 1] * yy + p[..., 0, 2]
    v = p[..., 1, 0] * xx + p[..., 1, 1] * yy + p[..., 1, 2]
    return FlowField(np.stack([u, v], axis=-1), np.ones((h, w), dtype=bool))
