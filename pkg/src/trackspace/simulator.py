"""Mission execution over a gridded survey area.

Each pass of the sonar multiplies a cell's residual risk by ``1 - P_d`` at the
cell's lateral range, so an unvisited cell keeps the maximum risk of 1.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal

import numpy as np

from .core import (
    SINGLE,
    NoAdmissibleRange,
    SensorSpec,
    SurveyArea,
    Track,
    TrackPlan,
    TrackspaceError,
    validate_sensor,
)
from .pdmodel import PdCurve, PdSample, effective_range, fit_curve
from .planner import RangeInterval, layout_tracks, polygon_adaptation, replan

log = logging.getLogger(__name__)

RR_HEADER = "# rr_grid v1"
COUNT_HEADER = "# look_count_grid v1"
_EPS = 1e-9


class GridFormatError(TrackspaceError):
    def __init__(self, message: str, lineno: int):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


@dataclass
class RiskGrid:
    """Residual risk per cell, indexed ``[sweep, along-track]``.

    ``look_ranges[i][j]`` lists the lateral range of every look at cell
    ``(i, j)`` in the order the looks happened. It is ``None`` for grids read
    back from a file, where only the risk values survive.
    """

    cell_size_m: float
    cells: np.ndarray
    look_counts: np.ndarray | None = None
    look_ranges: list | None = None

    @classmethod
    def empty(cls, area: SurveyArea) -> "RiskGrid":
        nx, ny = area.shape
        return cls(
            area.cell_size_m,
            np.ones((nx, ny)),
            np.zeros((nx, ny), dtype=int),
            [[[] for _ in range(ny)] for _ in range(nx)],
        )

    @property
    def shape(self) -> tuple[int, int]:
        return self.cells.shape

    @property
    def x_centres(self) -> np.ndarray:
        return (np.arange(self.shape[0]) + 0.5) * self.cell_size_m

    def copy(self) -> "RiskGrid":
        ranges = None
        if self.look_ranges is not None:
            ranges = [[list(c) for c in col] for col in self.look_ranges]
        counts = None if self.look_counts is None else self.look_counts.copy()
        return RiskGrid(self.cell_size_m, self.cells.copy(), counts, ranges)


def ensonify(grid: RiskGrid, track: Track, true_curve: PdCurve, r_true: float,
             r_min: float | None = None) -> RiskGrid:
    """Apply one pass of ``track`` to ``grid`` in place and return it.

    Only cells whose centre lies within ``[r_min, r_true]`` of the track are
    touched; the planner's assumed range plays no part here.
    """
    if r_min is None:
        r_min = true_curve.r_min_m
    y = np.abs(grid.x_centres - track.x_m)
    hit = np.flatnonzero((y >= r_min) & (y <= r_true))
    if hit.size == 0:
        return grid
    pd = np.atleast_1d(true_curve(y[hit]))
    grid.cells[hit, :] *= (1.0 - pd)[:, None]
    if grid.look_counts is not None:
        grid.look_counts[hit, :] += 1
    if grid.look_ranges is not None:
        for ix, yi in zip(hit.tolist(), y[hit].tolist()):
            for cell in grid.look_ranges[ix]:
                cell.append(yi)
    return grid


def recompute_risk(grid: RiskGrid, true_curve: PdCurve) -> np.ndarray:
    """Residual risk rebuilt cell by cell from the recorded look ranges."""
    out = np.ones(grid.shape)
    for ix, col in enumerate(grid.look_ranges):
        for iy, ranges in enumerate(col):
            rr = 1.0
            for y in ranges:
                rr *= 1.0 - float(true_curve(y))
            out[ix, iy] = rr
    return out


def sample_pd_observations(true_curve: PdCurve, r_min: float, r_true: float,
                           noise_sd: float, rng: np.random.Generator) -> list[PdSample]:
    if noise_sd < 0:
        raise ValueError("noise_sd must be non-negative")
    ranges = np.arange(np.ceil(r_min), np.floor(r_true) + 1.0)
    truth = np.asarray(true_curve(ranges))
    obs = truth + rng.normal(0.0, noise_sd, ranges.size) if noise_sd > 0 else truth
    obs = np.clip(obs, 0.0, 1.0)
    return [PdSample(float(r), float(p)) for r, p in zip(ranges, obs)]


@dataclass(frozen=True)
class MissionConfig:
    area: SurveyArea
    sensor: SensorSpec
    strategy: Literal["predefined", "adaptive"]
    true_curve: PdCurve
    threshold: float = 0.05
    noise_sd: float = 0.02
    rng_seed: int = 0
    pool_samples: bool = False

    def __post_init__(self):
        if self.strategy not in ("predefined", "adaptive"):
            raise ValueError(f"unknown strategy {self.strategy!r}")
        if not 0 < self.threshold < 1:
            raise ValueError(f"threshold must lie in (0, 1), got {self.threshold}")
        if self.noise_sd < 0:
            raise ValueError("noise_sd must be non-negative")


@dataclass(frozen=True)
class ReplanEvent:
    after_track: int
    r_eff_m: float
    r_adpt_m: float
    covered_up_to_m: float


@dataclass
class MissionResult:
    grid: RiskGrid
    plan: TrackPlan
    r_adpt_history: list[tuple[int, float]]
    metrics: dict
    replans: list[ReplanEvent] = field(default_factory=list)
    aborted: bool = False
    abort_reason: str = ""

    @property
    def r_adpt_values(self) -> list[float]:
        return [r for _, r in self.r_adpt_history]


def _metrics(grid: RiskGrid, n_tracks: int, length_m: float) -> dict:
    uncovered = int(np.count_nonzero(grid.cells == 1.0))
    return {
        "n_tracks": n_tracks,
        "path_length_m": n_tracks * length_m,
        "uncovered_cells": uncovered,
        "uncovered_fraction": uncovered / grid.cells.size,
    }


def run_mission(config: MissionConfig) -> MissionResult:
    area, sensor = config.area, config.sensor
    validate_sensor(sensor)
    W, r_min, r_true = area.width_m, sensor.r_min_m, sensor.r_true_m
    grid = RiskGrid.empty(area)

    def fly(track):
        ensonify(grid, track, config.true_curve, r_true, r_min)

    if config.strategy == "predefined":
        plan = layout_tracks(W, sensor.r_planned_m, r_min)
        for t in plan.tracks:
            fly(t)
        return MissionResult(grid, plan, [(0, sensor.r_planned_m)],
                             _metrics(grid, len(plan), area.length_m))

    seeds = np.random.SeedSequence(config.rng_seed)
    r_adpt = polygon_adaptation(W, RangeInterval.for_sensor(r_min, sensor.r_planned_m))
    plan = layout_tracks(W, r_adpt, r_min)
    history = [(0, r_adpt)]
    replans: list[ReplanEvent] = []
    executed: list[Track] = []
    pooled: list[PdSample] = []
    aborted, reason = False, ""

    while plan.tracks:
        tracks = plan.tracks
        leg = tracks[:1] if tracks[0].is_single else tracks[:2]
        batch: list[PdSample] = []
        pair_no = sum(1 for t in executed if not t.is_single) // 2
        for t in leg:
            fly(t)
            executed.append(Track(t.x_m, SINGLE if t.is_single else pair_no, t.r_used_m))
            rng = np.random.default_rng(seeds.spawn(1)[0])
            batch += sample_pd_observations(config.true_curve, r_min, r_true, config.noise_sd, rng)

        covered = plan.covered_up_to_m if len(leg) == len(tracks) else leg[-1].x_m + leg[-1].r_used_m
        if covered >= W - _EPS:
            break

        pooled = pooled + batch if config.pool_samples else batch
        try:
            support = max(s.range_m for s in pooled)
            estimate = fit_curve(pooled, r_min, support)
            r_eff = effective_range(estimate, config.threshold)
            new_r, plan = replan(covered, W, r_eff, r_min)
        except NoAdmissibleRange as exc:
            aborted, reason = True, str(exc)
            log.warning("mission aborted after %d tracks: %s", len(executed), exc)
            break
        replans.append(ReplanEvent(len(executed), r_eff, new_r, covered))
        log.debug("after track %d: r_eff=%g r_adpt=%g", len(executed), r_eff, new_r)
        if new_r != r_adpt:
            history.append((len(executed), new_r))
            r_adpt = new_r

    final = TrackPlan(tuple(executed), executed[-1].x_m + executed[-1].r_used_m if executed else 0.0, r_min)
    return MissionResult(grid, final, history, _metrics(grid, len(executed), area.length_m),
                         replans, aborted, reason)


def format_grid(values: np.ndarray, cell_size_m: float, header: str = RR_HEADER) -> str:
    nx, ny = values.shape
    lines = [f"{header} nx={nx} ny={ny} cell_size_m={float(cell_size_m)!r}"]
    for row in values.tolist():
        lines.append(",".join(repr(v) for v in row))
    return "\n".join(lines) + "\n"


def write_grid(grid: RiskGrid, path) -> None:
    Path(path).write_text(format_grid(grid.cells, grid.cell_size_m))


def write_look_counts(grid: RiskGrid, path) -> None:
    Path(path).write_text(format_grid(grid.look_counts, grid.cell_size_m, COUNT_HEADER))


def parse_grid(text: str, header: str = RR_HEADER) -> tuple[np.ndarray, float]:
    lines = text.splitlines()
    if not lines or not lines[0].startswith(header):
        raise GridFormatError(f"expected header starting with '{header}'", 1)
    try:
        meta = dict(tok.split("=", 1) for tok in lines[0][len(header):].split())
        nx, ny, cell = int(meta["nx"]), int(meta["ny"]), float(meta["cell_size_m"])
    except (KeyError, ValueError) as exc:
        raise GridFormatError(f"malformed header ({exc})", 1) from None
    if nx <= 0 or ny <= 0 or cell <= 0:
        raise GridFormatError("dimensions and cell size must be positive", 1)

    rows = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            row = [float(v) for v in line.split(",")]
        except ValueError:
            raise GridFormatError("non-numeric value", lineno) from None
        if len(row) != ny:
            raise GridFormatError(f"expected {ny} values, found {len(row)}", lineno)
        rows.append(row)
    if len(rows) != nx:
        raise GridFormatError(f"expected {nx} rows, found {len(rows)}", len(lines))
    return np.array(rows), cell


def read_grid(path) -> RiskGrid:
    cells, cell = parse_grid(Path(path).read_text())
    if np.any(cells < 0) or np.any(cells > 1):
        raise GridFormatError("residual risk values must lie in [0, 1]", 2)
    return RiskGrid(cell, cells)
