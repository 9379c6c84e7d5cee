"""Sparse-to-dense optical flow from dense gradient-based features.

Pipeline: :func:`detect_grid` (DeGraF keypoints) -> :func:`track_points`
(pyramidal LK) -> :func:`forward_backward_filter` -> :func:`interpolate`
(geodesic edge-preserving affine interpolation).  :func:`estimate_flow` runs
all of it.
"""

import numba as _numba

# TBB in this environment is often too old for numba; prefer OpenMP.
_numba.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]

from .core import Pyramid, SummedAreaTable, as_gray, build_pyramid, gradient, summed_area  # noqa: E402
from .degraf import (  # noqa: E402
    CentroidPair,
    DetectorParams,
    KeypointGrid,
    Point2,
    detect_grid,
    negative_centroid,
    positive_centroid,
    select_keypoint,
)
from .evaluation import (  # noqa: E402
    FlowMetrics,
    end_point_error,
    flow_metrics,
    flow_to_color,
    outlier_rate,
    read_flow_kitti,
    write_flow_kitti,
)
from .interp import (  # noqa: E402
    AffineModel,
    FlowField,
    SeedNeighborhood,
    edge_cost_map,
    fit_local_affine,
    geodesic_nearest_seeds,
    interpolate,
)
from .pipeline import PipelineConfig, estimate_flow  # noqa: E402
from .tracker import SparseFlow, Status, TrackParams, forward_backward_filter, track_points  # noqa: E402

__all__ = [
    "AffineModel",
    "CentroidPair",
    "DetectorParams",
    "FlowField",
    "FlowMetrics",
    "KeypointGrid",
    "PipelineConfig",
    "Point2",
    "Pyramid",
    "SeedNeighborhood",
    "SparseFlow",
    "Status",
    "SummedAreaTable",
    "TrackParams",
    "as_gray",
    "build_pyramid",
    "detect_grid",
    "edge_cost_map",
    "end_point_error",
    "estimate_flow",
    "fit_local_affine",
    "flow_metrics",
    "flow_to_color",
    "forward_backward_filter",
    "geodesic_nearest_seeds",
    "gradient",
    "interpolate",
    "negative_centroid",
    "outlier_rate",
    "positive_centroid",
    "read_flow_kitti",
    "select_keypoint",
    "summed_area",
    "track_points",
    "write_flow_kitti",
]
