import numpy as np
import pytest

from trackspace.analysis import (
    AreaMismatch,
    EmptyData,
    GmmFit,
    compare_missions,
    coverage_metrics,
    fit_gmm,
    responsibilities,
    rightmost_component_stats,
    rr_histogram,
)
from trackspace.core import SurveyArea
from trackspace.simulator import MissionConfig, RiskGrid, run_mission

from conftest import sensor


def grid_of(values, cell=5.0):
    return RiskGrid(cell, np.asarray(values, dtype=float))


def test_coverage_of_fully_covered_grid():
    m = coverage_metrics(grid_of(np.full((10, 10), 0.6)), 0)
    assert (m.uncovered_cells, m.uncovered_area_m2, m.uncovered_fraction) == (0, 0.0, 0.0)


def test_single_uncovered_cell_area():
    cells = np.full((10, 10), 0.6)
    cells[4, 5] = 1.0
    m = coverage_metrics(grid_of(cells), 0)
    assert m.uncovered_cells == 1
    assert m.uncovered_area_m2 == 25.0
    assert m.uncovered_fraction == 1 / 100


def test_margin_trims_perimeter():
    cells = np.full((10, 10), 0.6)
    cells[0, :] = 1.0
    m = coverage_metrics(grid_of(cells), 1, n_tracks=3)
    assert m.uncovered_cells == 0
    assert m.analyzed_cells == 64
    assert m.path_length_m == 3 * 50.0


def test_margin_too_large():
    with pytest.raises(ValueError):
        coverage_metrics(grid_of(np.ones((10, 4))), 2)


def test_histogram_single_value():
    h = rr_histogram(grid_of(np.full((4, 4), 0.7)), 10)
    assert np.count_nonzero(h.counts) == 1
    assert h.counts[7] == 16


def test_histogram_excludes_uncovered():
    cells = np.full((4, 4), 0.7)
    cells[0, :] = 1.0
    h = rr_histogram(grid_of(cells), 10)
    assert h.total == 12


def test_histogram_two_values():
    cells = np.array([[0.6, 0.6, 0.84], [0.84, 0.84, 1.0]])
    h = rr_histogram(grid_of(cells), 20)
    assert h.counts[12] == 2
    assert h.counts[16] == 3
    assert h.total == np.count_nonzero(cells < 1.0)


def test_histogram_all_uncovered():
    with pytest.raises(EmptyData):
        rr_histogram(grid_of(np.ones((3, 3))), 5)


def test_single_component_is_closed_form_mle():
    x = np.random.default_rng(0).normal(0.6, 0.1, 2000)
    fit = fit_gmm(x, 1)
    assert fit.means[0] == pytest.approx(x.mean(), abs=1e-9)
    assert fit.sds[0] == pytest.approx(x.std(), abs=1e-9)
    assert fit.weights == (1.0,)


@pytest.fixture(scope="module")
def two_bumps():
    rng = np.random.default_rng(42)
    pick = rng.random(10_000) < 0.5
    return np.where(pick, rng.normal(0.3, 0.02, 10_000), rng.normal(0.8, 0.02, 10_000))


def test_two_component_recovery(two_bumps):
    fit = fit_gmm(two_bumps, 2, rng_seed=1)
    assert fit.means[0] == pytest.approx(0.3, abs=0.01)
    assert fit.means[1] == pytest.approx(0.8, abs=0.01)
    assert sum(fit.weights) == pytest.approx(1.0, abs=1e-9)
    mean, sd, n = rightmost_component_stats(fit)
    assert mean == pytest.approx(0.8, abs=0.01)
    assert sd == pytest.approx(0.02, abs=0.005)
    assert n == pytest.approx(5000, abs=150)


def test_log_likelihood_never_decreases(two_bumps):
    for k in (1, 2, 3):
        trace = np.array(fit_gmm(two_bumps, k, rng_seed=k).ll_trace)
        assert np.all(np.diff(trace) >= -1e-9 * np.abs(trace[:-1]))


def test_responsibilities_sum_to_one(two_bumps):
    fit = fit_gmm(two_bumps, 3, rng_seed=0)
    resp = responsibilities(fit, two_bumps)
    assert np.max(np.abs(resp.sum(axis=1) - 1.0)) <= 1e-9


def test_components_sorted_by_mean(two_bumps):
    fit = fit_gmm(two_bumps, 3, rng_seed=5)
    assert list(fit.means) == sorted(fit.means)


def test_fit_is_deterministic(two_bumps):
    assert fit_gmm(two_bumps, 2, rng_seed=3) == fit_gmm(two_bumps, 2, rng_seed=3)


def test_fit_preconditions():
    with pytest.raises(EmptyData):
        fit_gmm([], 1)
    with pytest.raises(ValueError):
        fit_gmm([0.5, 0.5, 0.6], 3)


def test_point_mass_single_component():
    fit = fit_gmm([0.7] * 50, 1)
    assert rightmost_component_stats(fit) == (0.7, 0.0, 50)


def test_rightmost_selection_arithmetic():
    fit = GmmFit((0.4, 0.6), (0.6, 0.8), (0.05, 0.05), 0.0, 1000)
    assert rightmost_component_stats(fit) == (0.8, 0.05, 600)
    single = GmmFit((1.0,), (0.5,), (0.1,), 0.0, 10)
    assert rightmost_component_stats(single) == (0.5, 0.1, 10)


@pytest.fixture(scope="module")
def experiment3(true_curve_module):
    area = SurveyArea(1212, 400, 5)
    return [run_mission(MissionConfig(area, sensor(130), s, true_curve_module, rng_seed=3))
            for s in ("predefined", "adaptive")]


@pytest.fixture(scope="module")
def true_curve_module():
    from trackspace.pdmodel import PdCurveParams, synth_curve
    return synth_curve(PdCurveParams.with_tail(130.0, 0.05), 40.0, 150.0)


def test_compare_identical_missions_has_zero_deltas(experiment3):
    control, _ = experiment3
    cmp = compare_missions(control, control, 2)
    assert all(v == 0 for v in cmp.deltas.values())


def test_compare_is_antisymmetric(experiment3):
    control, adaptive = experiment3
    ab = compare_missions(control, adaptive, 2, 4).deltas
    ba = compare_missions(adaptive, control, 2, 4).deltas
    assert all(ab[k] == -ba[k] for k in ab)


def test_adaptive_lowers_rightmost_component(experiment3):
    control, adaptive = experiment3
    cmp = compare_missions(control, adaptive, 2, 4)
    assert cmp.adaptive.rc_mean < cmp.control.rc_mean
    assert cmp.control.n_tracks == cmp.adaptive.n_tracks == 8


def test_compare_rejects_different_areas(experiment3, true_curve_module):
    control, _ = experiment3
    other = run_mission(MissionConfig(SurveyArea(1000, 400, 5), sensor(130), "predefined",
                                      true_curve_module))
    with pytest.raises(AreaMismatch):
        compare_missions(control, other, 2)


def test_report_formats(experiment3):
    cmp = compare_missions(*experiment3, 2, 4)
    table = cmp.table().splitlines()
    assert table[0].split() == ["metric", "control", "adaptive", "delta"]
    kv = dict(line.split(" = ") for line in cmp.key_values().splitlines())
    assert kv["control.n_tracks"] == "8"
    assert float(kv["delta.rc_mean"]) == cmp.deltas["rc_mean"]
