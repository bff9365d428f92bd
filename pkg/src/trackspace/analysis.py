"""Post-mission data-quality analysis.

Cells with residual risk 1 were never seen; they are counted as coverage gaps
and kept out of the histograms and mixture fits.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .core import TrackspaceError
from .simulator import MissionResult, RiskGrid

log = logging.getLogger(__name__)

MAX_ITER = 500
TOL_LL = 1e-8
MIN_SD = 1e-6
N_RESTARTS = 5


class EmptyData(TrackspaceError):
    pass


class DegenerateComponent(TrackspaceError):
    pass


class AreaMismatch(TrackspaceError):
    pass


@dataclass(frozen=True)
class CoverageMetrics:
    uncovered_cells: int
    uncovered_area_m2: float
    uncovered_fraction: float
    n_tracks: int = 0
    path_length_m: float = 0.0
    analyzed_cells: int = 0


def _trim(cells: np.ndarray, margin: int) -> np.ndarray:
    nx, ny = cells.shape
    if margin < 0 or 2 * margin >= nx or 2 * margin >= ny:
        raise ValueError(f"perimeter margin {margin} too large for a {nx}x{ny} grid")
    if margin == 0:
        return cells
    return cells[margin:nx - margin, margin:ny - margin]


def coverage_metrics(grid: RiskGrid, perimeter_margin_cells: int = 0,
                     n_tracks: int = 0) -> CoverageMetrics:
    cells = _trim(grid.cells, perimeter_margin_cells)
    uncovered = int(np.count_nonzero(cells == 1.0))
    length_m = grid.shape[1] * grid.cell_size_m
    return CoverageMetrics(
        uncovered_cells=uncovered,
        uncovered_area_m2=uncovered * grid.cell_size_m ** 2,
        uncovered_fraction=uncovered / cells.size,
        n_tracks=n_tracks,
        path_length_m=n_tracks * length_m,
        analyzed_cells=int(cells.size),
    )


def covered_values(grid: RiskGrid, perimeter_margin_cells: int = 0) -> np.ndarray:
    cells = _trim(grid.cells, perimeter_margin_cells)
    return cells[cells < 1.0].ravel()


@dataclass(frozen=True)
class Histogram:
    edges: np.ndarray
    counts: np.ndarray

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def rr_histogram(grid: RiskGrid, n_bins: int, perimeter_margin_cells: int = 0) -> Histogram:
    if n_bins < 2:
        raise ValueError("need at least two bins")
    values = covered_values(grid, perimeter_margin_cells)
    if values.size == 0:
        raise EmptyData("no covered cells to histogram")
    edges = np.linspace(0.0, 1.0, n_bins + 1)
    # index by floor(v * n) so values on an edge land in the upper bin;
    # linspace edges carry rounding that np.histogram would honour
    idx = np.minimum(np.floor(values * n_bins).astype(int), n_bins - 1)
    counts = np.bincount(idx, minlength=n_bins)
    return Histogram(edges, counts)


@dataclass(frozen=True)
class GmmFit:
    weights: tuple[float, ...]
    means: tuple[float, ...]
    sds: tuple[float, ...]
    log_likelihood: float
    n_points: int
    n_iter: int = 0
    seed: int = 0
    ll_trace: tuple[float, ...] = field(default=(), repr=False)

    @property
    def components(self) -> list[tuple[float, float, float]]:
        return list(zip(self.weights, self.means, self.sds))

    @property
    def k(self) -> int:
        return len(self.means)


def _log_densities(x, weights, means, sds):
    z = (x[:, None] - means[None, :]) / sds[None, :]
    return np.log(weights)[None, :] - 0.5 * z ** 2 - np.log(sds)[None, :] - 0.5 * np.log(2 * np.pi)


def responsibilities(fit: GmmFit, values) -> np.ndarray:
    x = np.asarray(values, dtype=float)
    logp = _log_densities(x, np.array(fit.weights), np.array(fit.means), np.array(fit.sds))
    return np.exp(logp - logsumexp(logp, axis=1, keepdims=True))


def _kmeanspp(x: np.ndarray, counts: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    p = counts / counts.sum()
    centres = [x[rng.choice(x.size, p=p)]]
    for _ in range(1, k):
        d2 = counts * np.min((x[:, None] - np.array(centres)[None, :]) ** 2, axis=1)
        total = d2.sum()
        if total == 0:
            break
        centres.append(x[rng.choice(x.size, p=d2 / total)])
    return np.sort(np.array(centres))


def _em(x: np.ndarray, counts: np.ndarray, k: int, seed: int) -> GmmFit:
    # x holds distinct values, counts their multiplicities
    n = counts.sum()
    rng = np.random.default_rng(seed)
    means = _kmeanspp(x, counts, k, rng)
    if means.size < k:
        raise DegenerateComponent("could not seed distinct initial means")
    nearest = np.argmin(np.abs(x[:, None] - means[None, :]), axis=1)
    overall = np.sqrt(np.sum(counts * (x - np.sum(counts * x) / n) ** 2) / n)
    spread = overall if overall > MIN_SD else 1.0
    weights = np.empty(k)
    sds = np.empty(k)
    for j in range(k):
        c, v = counts[nearest == j], x[nearest == j]
        weights[j] = max(c.sum(), 1.0) / n
        if c.sum() > 0:
            mu = np.sum(c * v) / c.sum()
            sds[j] = np.sqrt(np.sum(c * (v - mu) ** 2) / c.sum())
        else:
            sds[j] = 0.0
    weights /= weights.sum()
    sds = np.where(sds > MIN_SD, sds, spread)

    trace = []
    ll = -np.inf
    for it in range(1, MAX_ITER + 1):
        logp = _log_densities(x, weights, means, sds)
        norm = logsumexp(logp, axis=1, keepdims=True)
        new_ll = float(np.sum(counts * norm[:, 0]))
        if trace and new_ll < ll - 1e-9 * max(1.0, abs(ll)):
            raise RuntimeError(f"EM log-likelihood decreased at iteration {it}: {ll} -> {new_ll}")
        trace.append(new_ll)
        if it > 1 and new_ll - ll < TOL_LL:
            ll = new_ll
            break
        ll = new_ll

        resp = np.exp(logp - norm) * counts[:, None]
        nk = resp.sum(axis=0)
        if np.any(nk <= 0):
            raise DegenerateComponent("a component lost all its points")
        weights = nk / n
        means = (resp * x[:, None]).sum(axis=0) / nk
        sds = np.sqrt((resp * (x[:, None] - means[None, :]) ** 2).sum(axis=0) / nk)
        if np.any(sds < MIN_SD):
            raise DegenerateComponent(f"component sd collapsed to {sds.min():.3g}")

    order = np.argsort(means, kind="stable")
    return GmmFit(
        weights=tuple(weights[order].tolist()),
        means=tuple(means[order].tolist()),
        sds=tuple(sds[order].tolist()),
        log_likelihood=ll,
        n_points=int(n),
        n_iter=len(trace),
        seed=seed,
        ll_trace=tuple(trace),
    )


def fit_gmm(values, k: int, rng_seed: int = 0) -> GmmFit:
    """Fit a one-dimensional Gaussian mixture by expectation-maximisation.

    Repeated values are collapsed to (value, multiplicity) before fitting,
    which leaves the likelihood unchanged. EM runs from five k-means++
    seedings (``rng_seed`` .. ``rng_seed + 4``); fits with a collapsed
    component are discarded and the highest log-likelihood survivor wins,
    the lowest seed breaking ties.
    """
    x = np.asarray(values, dtype=float).ravel()
    if x.size == 0:
        raise EmptyData("no values to fit")
    if k < 1:
        raise ValueError("k must be at least 1")
    distinct, counts = np.unique(x, return_counts=True)
    if k > distinct.size:
        raise ValueError(f"k={k} exceeds the number of distinct values ({distinct.size})")
    if distinct.size == 1:
        # every value identical: the MLE is a point mass, which EM cannot represent
        return GmmFit((1.0,), (float(distinct[0]),), (0.0,), math.inf, int(x.size))

    best, last = None, None
    for seed in range(rng_seed, rng_seed + N_RESTARTS):
        try:
            fit = _em(distinct, counts.astype(float), k, seed)
        except DegenerateComponent as exc:
            last = exc
            continue
        if best is None or fit.log_likelihood > best.log_likelihood:
            best = fit
    if best is None:
        raise DegenerateComponent(f"no stable fit after {N_RESTARTS} seeds: {last}")
    return best


def rightmost_component_stats(fit: GmmFit) -> tuple[float, float, int]:
    j = int(np.argmax(fit.means))
    return fit.means[j], fit.sds[j], int(round(fit.weights[j] * fit.n_points))


@dataclass(frozen=True)
class MissionSummary:
    n_tracks: int
    uncovered_fraction: float
    uncovered_area_m2: float
    mean_full: float
    rc_mean: float
    rc_sd: float
    rc_n: int
    fit: GmmFit | None = None

    def as_dict(self) -> dict:
        return {
            "n_tracks": self.n_tracks,
            "uncovered_fraction": self.uncovered_fraction,
            "uncovered_area_m2": self.uncovered_area_m2,
            "mean_full": self.mean_full,
            "rc_mean": self.rc_mean,
            "rc_sd": self.rc_sd,
            "rc_n": self.rc_n,
        }


METRICS = ("n_tracks", "uncovered_fraction", "uncovered_area_m2",
           "mean_full", "rc_mean", "rc_sd", "rc_n")


def summarize_grid(grid: RiskGrid, k: int, n_tracks: int = 0, perimeter_margin_cells: int = 0,
                   rng_seed: int = 0) -> MissionSummary:
    cov = coverage_metrics(grid, perimeter_margin_cells, n_tracks)
    values = covered_values(grid, perimeter_margin_cells)
    if values.size == 0:
        raise EmptyData("grid has no covered cells")
    distinct = np.unique(values).size
    if k > distinct:
        log.warning("only %d distinct risk values; fitting %d component(s) instead of %d",
                    distinct, distinct, k)
        k = distinct
    fit = fit_gmm(values, k, rng_seed)
    rc_mean, rc_sd, rc_n = rightmost_component_stats(fit)
    return MissionSummary(n_tracks, cov.uncovered_fraction, cov.uncovered_area_m2,
                          float(values.mean()), rc_mean, rc_sd, rc_n, fit)


@dataclass(frozen=True)
class Comparison:
    control: MissionSummary
    adaptive: MissionSummary

    @property
    def deltas(self) -> dict:
        c, a = self.control.as_dict(), self.adaptive.as_dict()
        return {key: a[key] - c[key] for key in METRICS}

    def table(self) -> str:
        c, a, d = self.control.as_dict(), self.adaptive.as_dict(), self.deltas
        rows = [("metric", "control", "adaptive", "delta")]
        for key in METRICS:
            rows.append((key, _fmt(c[key]), _fmt(a[key]), _fmt(d[key])))
        widths = [max(len(r[i]) for r in rows) for i in range(4)]
        return "\n".join(
            "  ".join(cell.ljust(w) if i == 0 else cell.rjust(w)
                      for i, (cell, w) in enumerate(zip(row, widths)))
            for row in rows
        ) + "\n"

    def key_values(self) -> str:
        lines = []
        for side, summary in (("control", self.control), ("adaptive", self.adaptive)):
            for key, value in summary.as_dict().items():
                lines.append(f"{side}.{key} = {value!r}")
        for key, value in self.deltas.items():
            lines.append(f"delta.{key} = {value!r}")
        return "\n".join(lines) + "\n"


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(v)
    return f"{v:.4f}"


def compare_missions(control: MissionResult, adaptive: MissionResult, k: int,
                     perimeter_margin_cells: int = 0, rng_seed: int = 0) -> Comparison:
    gc, ga = control.grid, adaptive.grid
    if gc.shape != ga.shape or gc.cell_size_m != ga.cell_size_m:
        raise AreaMismatch(f"grids differ: {gc.shape}@{gc.cell_size_m} vs {ga.shape}@{ga.cell_size_m}")
    return Comparison(
        summarize_grid(gc, k, len(control.plan), perimeter_margin_cells, rng_seed),
        summarize_grid(ga, k, len(adaptive.plan), perimeter_margin_cells, rng_seed),
    )
