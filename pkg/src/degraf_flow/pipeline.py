"""End-to-end flow estimation: detect -> track -> filter -> interpolate."""

from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass, field, fields, replace

import numba
import numpy as np
from scipy import ndimage

from .core import as_gray, gradient
from .degraf import DetectorParams, detect_grid, grid_point_count
from .evaluation import FlowMetrics, flow_metrics
from .interp import DEFAULT_K, DEFAULT_LAMBDA, DEFAULT_SIGMA, FlowField, interpolate
from .tracker import SparseFlow, TrackParams, forward_backward_filter, track_points


class StageError(RuntimeError):
    """A pipeline stage failed; ``stage`` names it."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"{stage}: {cause}")
        self.stage = stage
        self.cause = cause


@dataclass(frozen=True)
class InterpParams:
    k: int = DEFAULT_K
    lam: float = DEFAULT_LAMBDA
    sigma: float = DEFAULT_SIGMA
    connectivity: int = 4

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.lam < 0:
            raise ValueError("lam must be >= 0")
        if self.sigma <= 0:
            raise ValueError("sigma must be > 0")
        if self.connectivity not in (4, 8):
            raise ValueError("connectivity must be 4 or 8")


@dataclass(frozen=True)
class PipelineConfig:
    detector: DetectorParams = field(default_factory=DetectorParams)
    tracker: TrackParams = field(default_factory=TrackParams)
    interp: InterpParams = field(default_factory=InterpParams)
    fb_filter: bool = True
    threads: int | None = None
    out_dir: str = "."

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "PipelineConfig":
        parts = {"detector": DetectorParams, "tracker": TrackParams, "interp": InterpParams}
        kwargs = {}
        known = {f.name for f in fields(cls)}
        for key, value in data.items():
            if key not in known:
                raise ValueError(f"unknown config key {key!r}")
            if key in parts:
                sub = parts[key]
                names = {f.name for f in fields(sub)}
                bad = set(value) - names
                if bad:
                    raise ValueError(f"unknown {key} keys: {sorted(bad)}")
                value = sub(**value)
            kwargs[key] = value
        return cls(**kwargs)

    @classmethod
    def from_json(cls, path) -> "PipelineConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def with_overrides(self, **kw) -> "PipelineConfig":
        """Apply flat overrides (``window``, ``step``, ``k``, ``lam``, ``sigma``,
        ``levels``, ``threads``, ``out_dir``, ``fb_filter``); ``None`` is ignored."""
        kw = {k: v for k, v in kw.items() if v is not None}
        det, trk, itp = self.detector, self.tracker, self.interp
        if "window" in kw:
            det = replace(det, window_w=kw["window"], window_h=kw["window"])
        if "step" in kw:
            det = replace(det, step=kw["step"])
        if "levels" in kw:
            trk = replace(trk, pyramid_levels=kw["levels"])
        itp = replace(itp, **{k: kw[k] for k in ("k", "lam", "sigma", "connectivity") if k in kw})
        top = {k: kw[k] for k in ("threads", "out_dir", "fb_filter") if k in kw}
        return replace(self, detector=det, tracker=trk, interp=itp, **top)


def set_threads(threads: int | None) -> int:
    """Set the worker count for the compiled kernels; ``None`` means all cores."""
    limit = numba.config.NUMBA_NUM_THREADS
    n = limit if threads is None else max(1, min(int(threads), limit))
    numba.set_num_threads(n)
    return n


@dataclass
class FlowResult:
    flow: FlowField
    sparse: SparseFlow
    keypoints: np.ndarray
    timings: dict[str, float]


def estimate_flow(frame1, frame2, config: PipelineConfig | None = None, points=None) -> FlowResult:
    """Dense flow from ``frame1`` to ``frame2``.

    ``points`` replaces the DeGraF detector with caller-supplied ``(x, y)``
    keypoints (or a :class:`KeypointGrid`).  Stage timings in seconds are
    wall-clock and exclude any image I/O done by the caller.
    """
    config = config or PipelineConfig()
    frame1 = as_gray(frame1, "frame1")
    frame2 = as_gray(frame2, "frame2")
    if frame1.shape != frame2.shape:
        raise ValueError(f"frame sizes differ: {frame1.shape[::-1]} vs {frame2.shape[::-1]}")
    set_threads(config.threads)

    t0 = time.perf_counter()
    try:
        if points is None:
            pts = detect_grid(frame1, config.detector).points
        else:
            pts = np.asarray(getattr(points, "points", points), dtype=np.float64).reshape(-1, 2)
    except Exception as exc:
        raise StageError("detection", exc) from exc
    t1 = time.perf_counter()
    try:
        sparse = track_points(frame1, frame2, pts, config.tracker)
        if config.fb_filter:
            sparse = forward_backward_filter(sparse, frame1, frame2, config.tracker)
    except Exception as exc:
        raise StageError("tracking", exc) from exc
    t2 = time.perf_counter()
    try:
        p = config.interp
        flow = interpolate(sparse, frame1, p.k, p.lam, p.sigma, p.connectivity)
    except Exception as exc:
        raise StageError("interpolation", exc) from exc
    t3 = time.perf_counter()

    timings = {"detection": t1 - t0, "tracking": t2 - t1, "interpolation": t3 - t2, "total": t3 - t0}
    return FlowResult(flow, sparse, pts, timings)


def warmup() -> None:
    """Compile the numba kernels (cached on disk after the first run)."""
    rng = np.random.default_rng(0)
    img = ndimage.gaussian_filter(rng.uniform(0, 255, (48, 64)), 1.5)
    estimate_flow(img, img, PipelineConfig(tracker=TrackParams(pyramid_levels=2)))


# --- baseline detectors for the detector comparison -------------------------

def regular_grid(image, params: DetectorParams | None = None) -> np.ndarray:
    """Window centers of the DeGraF window grid (same count, no snapping)."""
    params = params or DetectorParams()
    image = as_gray(image)
    h, w = image.shape
    oy = np.arange(0, h - params.window_h + 1, params.step)
    ox = np.arange(0, w - params.window_w + 1, params.step)
    yy, xx = np.meshgrid(oy + (params.window_h - 1) / 2.0, ox + (params.window_w - 1) / 2.0, indexing="ij")
    return np.stack([xx.ravel(), yy.ravel()], axis=1)


def gradient_maxima(image, count: int, radius: int = 1) -> np.ndarray:
    """The ``count`` strongest local maxima of the gradient magnitude.

    Ties are broken by raster order so the result is deterministic.
    """
    image = as_gray(image)
    gx, gy = gradient(image)
    mag = np.hypot(gx, gy)
    peak = (mag == ndimage.maximum_filter(mag, size=2 * radius + 1, mode="nearest")) & (mag > 0)
    ys, xs = np.nonzero(peak)
    order = np.argsort(-mag[ys, xs], kind="stable")[:count]
    return np.stack([xs[order], ys[order]], axis=1).astype(np.float64)


BASELINE_DETECTORS = ("degraf", "grid", "gradmax")


def detect_with(name: str, image, config: PipelineConfig, budget: int | None = None) -> np.ndarray:
    if name == "degraf":
        return detect_grid(image, config.detector).points
    if name == "grid":
        return regular_grid(image, config.detector)
    if name == "gradmax":
        if budget is None:
            h, w = np.shape(image)
            budget = grid_point_count(w, h, config.detector)
        return gradient_maxima(image, budget)
    raise ValueError(f"unknown detector {name!r}; choose from {BASELINE_DETECTORS} or csv:PATH")


@dataclass(frozen=True)
class BenchRow:
    detector: str
    points: float
    detection_time: float
    epe: float | None
    out: float | None
    metrics: tuple[FlowMetrics, ...]


def run_benchmark(pairs, config: PipelineConfig, detectors, load_points=None) -> list[BenchRow]:
    """Compare keypoint detectors inside the full pipeline.

    Parameters
    ----------
    pairs : iterable of (frame1, frame2, gt_noc, gt_occ_or_None)
        Images as arrays and ground truth as :class:`FlowField`.
    detectors : iterable of str
        Built-in names from ``BASELINE_DETECTORS``; other names are passed to
        ``load_points(name, pair_index)`` which must return ``(N, 2)`` points.

    Returns one row per detector with the mean point count, detection time,
    All-pixel EPE and outlier rate over the pairs.
    """
    pairs = list(pairs)
    rows = []
    for name in detectors:
        counts, times, epes, outs, all_metrics = [], [], [], [], []
        for i, (f1, f2, gt_noc, gt_occ) in enumerate(pairs):
            t0 = time.perf_counter()
            if name in BASELINE_DETECTORS:
                pts = detect_with(name, f1, config)
            elif load_points is not None:
                pts = load_points(name, i)
            else:
                raise ValueError(f"unknown detector {name!r}")
            times.append(time.perf_counter() - t0)
            res = estimate_flow(f1, f2, config, points=pts)
            m = flow_metrics(res.flow, gt_noc, gt_occ)
            counts.append(len(pts))
            all_metrics.append(m)
            if m.epe_all is not None:
                epes.append(m.epe_all)
                outs.append(m.out_all)
        rows.append(BenchRow(
            name,
            float(np.mean(counts)),
            float(np.mean(times)),
            float(np.mean(epes)) if epes else None,
            float(np.mean(outs)) if outs else None,
            tuple(all_metrics),
        ))
    return rows
