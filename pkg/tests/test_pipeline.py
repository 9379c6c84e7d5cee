import numpy as np
import pytest

from degraf_flow.degraf import DetectorParams, grid_point_count
from degraf_flow.pipeline import (
    InterpParams,
    PipelineConfig,
    StageError,
    estimate_flow,
    gradient_maxima,
    regular_grid,
    run_benchmark,
)
from degraf_flow.interp import FlowField

from synth import textured, translate


def test_translation_end_to_end():
    f1 = textured((96, 128), seed=8)
    res = estimate_flow(f1, translate(f1, -1.5, 2.0))
    assert res.flow.valid.all()
    assert np.linalg.norm(res.flow.uv - [-1.5, 2.0], axis=-1).mean() < 0.3
    assert len(res.keypoints) == len(res.sparse) == grid_point_count(128, 96, DetectorParams())


def test_stage_timings_sum_to_total():
    f1 = textured((96, 128), seed=2)
    t = estimate_flow(f1, translate(f1, 1.0, 0.0)).timings
    parts = t["detection"] + t["tracking"] + t["interpolation"]
    assert abs(parts - t["total"]) <= 0.05 * t["total"]


def test_size_mismatch_raises():
    with pytest.raises(ValueError):
        estimate_flow(np.zeros((20, 20)), np.zeros((20, 21)))


def test_no_trackable_points_is_a_stage_error():
    flat = np.full((40, 40), 100.0)
    with pytest.raises(StageError) as exc:
        estimate_flow(flat, flat)
    assert exc.value.stage == "interpolation"


def test_config_round_trip():
    cfg = PipelineConfig().with_overrides(window=5, step=7, k=64, lam=50.0, levels=3, fb_filter=False)
    again = PipelineConfig.from_dict(cfg.to_dict())
    assert again == cfg
    assert again.detector == DetectorParams(5, 5, 7)
    assert again.interp.k == 64 and again.tracker.pyramid_levels == 3 and not again.fb_filter


def test_config_rejects_unknown_keys():
    with pytest.raises(ValueError):
        PipelineConfig.from_dict({"interp": {"kk": 3}})
    with pytest.raises(ValueError):
        InterpParams(connectivity=6)


def test_baseline_detectors_share_budget():
    img = textured((100, 120), seed=4)
    n = grid_point_count(120, 100, DetectorParams())
    assert len(regular_grid(img)) == n
    pts = gradient_maxima(img, n)
    assert len(pts) <= n
    assert len(np.unique(pts, axis=0)) == len(pts)


def test_run_benchmark_rows():
    f1 = textured((64, 80), seed=6)
    gt = FlowField.constant((64, 80), 1.0, 0.0)
    rows = run_benchmark([(f1, translate(f1, 1.0, 0.0), gt, None)], PipelineConfig(), ["degraf", "grid"])
    assert [r.detector for r in rows] == ["degraf", "grid"]
    assert all(r.epe is not None and r.epe < 0.5 for r in rows)
