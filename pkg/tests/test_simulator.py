import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import constant_curve, sensor
from trackspace.core import SurveyArea, Track
from trackspace.pdmodel import PdCurveParams, effective_range, fit_curve, synth_curve
from trackspace.simulator import (
    GridFormatError,
    MissionConfig,
    RiskGrid,
    ensonify,
    parse_grid,
    read_grid,
    recompute_risk,
    run_mission,
    sample_pd_observations,
    write_grid,
    write_look_counts,
)

SMALL = SurveyArea(400.0, 20.0, 5.0)


def test_untouched_grid_is_maximum_risk():
    grid = RiskGrid.empty(SMALL)
    assert np.all(grid.cells == 1.0)
    assert np.all(grid.look_counts == 0)


def test_two_looks_multiply():
    grid = RiskGrid.empty(SMALL)
    ensonify(grid, Track(200.0, 0, 120.0), constant_curve(0.3), 130.0)
    col = int((200.0 + 60.0) // 5)  # centre 262.5, 62.5 m from the track
    assert grid.cells[col, 0] == pytest.approx(0.7, abs=1e-15)
    ensonify(grid, Track(200.0, 0, 120.0), constant_curve(0.2), 130.0)
    assert grid.cells[col, 0] == pytest.approx(0.56, abs=1e-15)
    assert grid.look_counts[col, 0] == 2


def test_truth_limit_overrides_planned_range(true_curve):
    grid = RiskGrid.empty(SurveyArea(600.0, 10.0, 5.0))
    ensonify(grid, Track(150.0, 0, 145.0), true_curve, 130.0)
    y = np.abs(grid.x_centres - 150.0)
    beyond = (y > 130.0) & (y <= 145.0)
    assert beyond.any()
    assert np.all(grid.cells[beyond] == 1.0)
    inside = (y >= 40.0) & (y <= 130.0)
    assert np.all(grid.cells[inside] < 1.0)
    assert np.all(grid.cells[y < 40.0] == 1.0)


def test_swath_is_clipped_at_area_edge(true_curve):
    grid = RiskGrid.empty(SMALL)
    ensonify(grid, Track(-100.0, 0, 130.0), true_curve, 130.0)
    assert grid.look_counts[:7, 0].sum() > 0
    assert grid.cells.shape == SMALL.shape


@settings(max_examples=40, deadline=None)
@given(xs=st.lists(st.floats(-50, 450), min_size=1, max_size=6), r_true=st.floats(40, 160))
def test_ensonify_never_raises_risk_and_matches_look_product(true_curve, xs, r_true):
    grid = RiskGrid.empty(SMALL)
    for x in xs:
        before = grid.cells.copy()
        ensonify(grid, Track(x, 0, 120.0), true_curve, r_true)
        assert np.all(grid.cells <= before)
    assert np.all((grid.cells >= 0) & (grid.cells <= 1))
    assert np.max(np.abs(recompute_risk(grid, true_curve) - grid.cells)) <= 1e-12
    # a look past the curve support has P_d = 0, so only one direction holds
    assert np.all(grid.look_counts[grid.cells < 1.0] > 0)


def test_noiseless_samples_equal_curve(true_curve):
    samples = sample_pd_observations(true_curve, 40, 130, 0.0, np.random.default_rng(0))
    assert [s.range_m for s in samples] == list(range(40, 131))
    assert all(s.pd_obs == true_curve(s.range_m) for s in samples)


def test_samples_reproducible(true_curve):
    a = sample_pd_observations(true_curve, 40, 130, 0.02, np.random.default_rng(5))
    b = sample_pd_observations(true_curve, 40, 130, 0.02, np.random.default_rng(5))
    assert a == b
    assert all(0 <= s.pd_obs <= 1 for s in a)


def test_noisy_fits_land_near_true_effective_range(true_curve):
    # the tail crossing sits inside the sampled span, so noise can move it either way
    target = effective_range(true_curve, 0.05)
    seeds = np.random.SeedSequence(2024).spawn(10)
    hits = 0
    for child in seeds:
        samples = sample_pd_observations(true_curve, 40, 150, 0.02, np.random.default_rng(child))
        est = effective_range(fit_curve(samples, 40, 150), 0.05)
        hits += abs(est - target) <= 3
    assert hits >= 9


def mission(curve, r_planned, strategy, r_true=130.0, area=SurveyArea(1212, 400, 5), seed=1, **kw):
    return run_mission(MissionConfig(area, sensor(r_planned, r_true), strategy, curve, rng_seed=seed, **kw))


def test_predefined_overestimate_leaves_gaps(true_curve):
    res = mission(true_curve, 145, "predefined")
    assert len(res.plan) == 7
    assert res.metrics["uncovered_cells"] > 0
    assert res.r_adpt_history == [(0, 145)]


def test_adaptive_overestimate_recovers(true_curve):
    res = mission(true_curve, 145, "adaptive")
    assert res.r_adpt_values == [138, 120]
    assert res.r_adpt_history[1][0] == 2
    assert len(res.plan) == 8
    assert not res.aborted


def test_adaptive_holds_minimum_spacing_every_pair(true_curve):
    res = mission(true_curve, 130, "adaptive")
    assert res.r_adpt_values == [120]
    assert [e.r_adpt_m for e in res.replans] == [120, 120, 120]
    assert all(e.r_eff_m >= 125 for e in res.replans)


def test_executed_plan_numbers_pairs_globally(true_curve):
    res = mission(true_curve, 145, "adaptive")
    assert [t.pair_index for t in res.plan.tracks] == [0, 0, 1, 1, 2, 2, 3, 3]
    assert [t.r_used_m for t in res.plan.tracks] == [138, 138] + [120] * 6


@pytest.mark.parametrize("r_planned, r_true", [(120, 130), (130, 130), (125, 150), (140, 150)])
def test_adaptive_covers_everything_when_truth_exceeds_plan(true_curve, r_planned, r_true):
    res = mission(true_curve, r_planned, "adaptive", r_true=r_true)
    m = 4
    assert np.count_nonzero(res.grid.cells[m:-m, m:-m] == 1.0) == 0


def test_seeded_missions_are_identical(true_curve):
    a = mission(true_curve, 145, "adaptive", seed=9)
    b = mission(true_curve, 145, "adaptive", seed=9)
    assert a.metrics == b.metrics
    assert np.array_equal(a.grid.cells, b.grid.cells)
    assert a.replans == b.replans


def test_pooling_option_runs(true_curve):
    res = mission(true_curve, 145, "adaptive", pool_samples=True)
    assert res.r_adpt_values == [138, 120]


def test_collapsed_effective_range_aborts_with_partial_result():
    short = synth_curve(PdCurveParams.with_tail(100.0, 0.05), 40.0, 150.0)
    res = mission(short, 130, "adaptive")
    assert res.aborted
    assert "3 x r_min" in res.abort_reason or "paired-track" in res.abort_reason
    assert len(res.plan) == 2


def test_grid_file_round_trip(tmp_path, true_curve):
    res = mission(true_curve, 130, "adaptive")
    path = tmp_path / "rr.csv"
    write_grid(res.grid, path)
    header = path.read_text().splitlines()[0]
    assert header == "# rr_grid v1 nx=243 ny=80 cell_size_m=5.0"
    back = read_grid(path)
    assert np.array_equal(back.cells, res.grid.cells)
    assert back.cell_size_m == 5.0

    counts = tmp_path / "looks.csv"
    write_look_counts(res.grid, counts)
    values, cell = parse_grid(counts.read_text(), "# look_count_grid v1")
    assert np.array_equal(values, res.grid.look_counts)


@pytest.mark.parametrize("text, lineno", [
    ("", 1),
    ("# rr_grid v1 nx=2 ny=2\n1,1\n1,1\n", 1),
    ("# rr_grid v1 nx=2 ny=2 cell_size_m=5\n1,1\n1,x\n", 3),
    ("# rr_grid v1 nx=2 ny=2 cell_size_m=5\n1,1\n1\n", 3),
    ("# rr_grid v1 nx=2 ny=2 cell_size_m=5\n1,1\n", 2),
])
def test_malformed_grid_reports_line(text, lineno):
    with pytest.raises(GridFormatError) as err:
        parse_grid(text)
    assert err.value.lineno == lineno
