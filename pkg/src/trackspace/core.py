"""Domain types shared across the planner, simulator and analysis code.

All lengths are metres. The survey area is a rectangle; tracks are parallel
lines running the full ``length_m`` and are positioned along the sweep axis
(``x``, spanning ``[0, width_m]``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Union

SINGLE = "single"


class TrackspaceError(Exception):
    """Base class for all domain errors."""


class InfeasiblePairing(TrackspaceError):
    """Sensor range too short for paired tracks to cover each other's nadir gap."""


class NoAdmissibleRange(TrackspaceError):
    """No usable sensor range: the curve never reaches the threshold, or the
    effective range fell below the paired-track limit."""


@dataclass(frozen=True)
class SurveyArea:
    width_m: float
    length_m: float
    cell_size_m: float = 5.0

    def __post_init__(self):
        if self.width_m <= 0 or self.length_m <= 0 or self.cell_size_m <= 0:
            raise ValueError(
                f"area extents and cell size must be positive, got "
                f"width={self.width_m}, length={self.length_m}, cell={self.cell_size_m}"
            )

    @property
    def shape(self) -> tuple[int, int]:
        """Grid cells along (sweep axis, track axis); a partial cell at the
        far edge counts as a whole one so the grid spans the full area."""
        nx = max(1, math.ceil(self.width_m / self.cell_size_m - 1e-9))
        ny = max(1, math.ceil(self.length_m / self.cell_size_m - 1e-9))
        return nx, ny


@dataclass(frozen=True)
class SensorSpec:
    """Side-looking sonar geometry.

    ``r_min_m`` is the nadir half-gap, ``r_planned_m`` the range the operator
    assumes when planning, ``r_true_m`` the hard limit beyond which the
    simulated sensor collects nothing.
    """

    r_min_m: float
    r_planned_m: float
    r_true_m: float

    def __post_init__(self):
        if self.r_min_m <= 0:
            raise ValueError(f"r_min_m must be positive, got {self.r_min_m}")
        if self.r_true_m < self.r_min_m:
            raise ValueError(
                f"r_true_m ({self.r_true_m}) must be at least r_min_m ({self.r_min_m})"
            )
        validate_sensor(self)


def pairing_limit(r_min: float) -> float:
    """Smallest range for which two tracks can cover each other's nadir gap."""
    return 3.0 * r_min


def check_pairing(r: float, r_min: float) -> None:
    if r < pairing_limit(r_min):
        raise InfeasiblePairing(
            f"range {r:g} m is below 3 x r_min = {pairing_limit(r_min):g} m"
        )


def validate_sensor(spec: SensorSpec) -> SensorSpec:
    check_pairing(spec.r_planned_m, spec.r_min_m)
    return spec


@dataclass(frozen=True)
class Track:
    x_m: float
    pair_index: Union[int, str]
    r_used_m: float

    @property
    def is_single(self) -> bool:
        return self.pair_index == SINGLE


@dataclass(frozen=True)
class TrackPlan:
    tracks: tuple[Track, ...] = ()
    covered_up_to_m: float = 0.0
    r_min_m: float = field(default=0.0, compare=False)

    def __post_init__(self):
        xs = [t.x_m for t in self.tracks]
        if any(b <= a for a, b in zip(xs, xs[1:])):
            raise ValueError("track positions must be strictly increasing")

    def __len__(self) -> int:
        return len(self.tracks)

    @property
    def positions(self) -> list[float]:
        return [t.x_m for t in self.tracks]

    def planned_swaths(self) -> list[tuple[float, float]]:
        """Port and starboard swath intervals at each track's planned range."""
        out = []
        for t in self.tracks:
            out.append((t.x_m - t.r_used_m, t.x_m - self.r_min_m))
            out.append((t.x_m + self.r_min_m, t.x_m + t.r_used_m))
        return out


def merge_intervals(intervals, tol: float = 1e-9) -> list[tuple[float, float]]:
    """Union of closed intervals, returned sorted and disjoint."""
    merged: list[list[float]] = []
    for lo, hi in sorted(intervals):
        if merged and lo <= merged[-1][1] + tol:
            merged[-1][1] = max(merged[-1][1], hi)
        else:
            merged.append([lo, hi])
    return [(lo, hi) for lo, hi in merged]


def covers(intervals, lo: float, hi: float, tol: float = 1e-9) -> bool:
    """True when the union of ``intervals`` contains ``[lo, hi]``."""
    for a, b in merge_intervals(intervals, tol):
        if a <= lo + tol and b >= hi - tol:
            return True
    return False
