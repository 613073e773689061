import json
import math

import pytest

import paretohqd as ph


def test_dominance_and_layers():
    assert ph.dominates([1, 2], [1, 1])
    assert not ph.dominates([1, 1], [1, 1])
    assert ph.layer_fronts([[2, 2], [1, 1], [3, 0]]) == [[0, 2], [1]]
    with pytest.raises(ph.ArityError):
        ph.dominates([1, 2], [1, 2, 3])


def test_pareto_subset_and_thresholds():
    sub = ph.build_pareto_hq([[2, 2], [1, 1], [3, 0], [0, 0]], 3)
    assert sub["indices"] == [0, 1, 2]
    assert sub["layers_used"] == 2
    assert ph.stage1_pareto_threshold(11, 100) == 550
    assert ph.stage2_pareto_threshold(11, 100) == 275


def test_geometry():
    lo, hi = ph.compute_bounds([[0, 1], [2, 3]])
    assert lo == [0, 1] and hi == [2, 3]
    assert ph.normalize([1, 2], lo, hi) == [0.5, 0.5]
    assert ph.compromise_point([0.25, 0.75], [0, 0], [1, 1]) == [0.25, 0.75]
    assert ph.distance_to_direction([0.5, 0.5], [0.5, 0.5], [0, 0], [1, 1]) == pytest.approx(0)
    assert ph.distance_to_direction([1, 0], [0.5, 0.5], [0, 0], [1, 1]) == pytest.approx(
        math.sqrt(2) / 2
    )


def test_selection():
    points = [[0.2, 0.9], [0.5, 0.5], [0.9, 0.1]]
    idx, dist = ph.select_stage1(points, [0.5, 0.5], 1, lo=[0, 0], hi=[1, 1])
    assert idx == [1] and dist[0] == pytest.approx(0)
    assert len(ph.select_stage2(points, [0.5, 0.5], 3)[0]) == 2
    assert ph.select_ls_topk(points, [1, 0], 1)[0] == [2]
    with pytest.raises(ph.ConfigError):
        ph.select_stage1(points, [0.5, 0.5], 0)
    assert ph.representative_preferences([[1, 0], [0, 1], [0.5, 0.5]], 2) == [0, 1, 2]
    assert ph.match_stage2_pool([0.5, 0.5], 0) == (2, False)


def test_metrics():
    assert ph.hypervolume([[0.5, 1], [1, 0.5]], [0, 0]) == pytest.approx(0.75, abs=1e-12)
    verdict = ph.detect_collapse("Sure, here it is:")
    assert verdict["collapsed"] and verdict["reason"] == "too_short"
    rep = ph.detect_collapse("la la la la la and then")
    assert rep["reason"] == "repetition" and rep["phrase"] == "la la"
    assert ph.collapse_rate(["one two", "a calm answer that says enough words"]) == 0.5
    with pytest.raises(ph.DataError):
        ph.collapse_rate([])


def test_world_and_pipeline(tmp_path):
    ids, points = ph.generate_world("linear", 50, 0.02, "uniform", 3)
    assert len(ids) == 50 and ids[0] == "w000000"
    assert all(0 <= p[0] <= 1 and p[1] <= 1 - p[0] + 1e-6 for p in points)

    config = tmp_path / "config.json"
    config.write_text(
        json.dumps(
            {
                "world": {"shape": "convex_circle", "size": 300, "profile": "center_heavy"},
                "preferences": [[1, 0], [0.5, 0.5], [0, 1]],
                "pipeline": {"k": 10, "n_add": 50},
                "seed": 2,
            }
        )
    )
    out = tmp_path / "run"
    summary = ph.curate(str(config), str(out), "both")
    assert "stage" in summary.lower()
    assert (out / "stage2" / "pref_02.jsonl").exists()
    identical, divergence = ph.replay(str(out), str(tmp_path / "scratch"))
    assert identical and divergence == ""

    with pytest.raises(ph.PreconditionError):
        ph.curate(str(config), str(tmp_path / "empty"), "2")
    with pytest.raises(ph.ConfigError):
        ph.curate(str(config), str(out), "3")
