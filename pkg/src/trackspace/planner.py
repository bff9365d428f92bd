"""Paired-track layout and track-spacing adaptation.

Within a pair the outer range of one track is flush with the nadir edge of
the other (spacing ``r - r_min``), so both nadir gaps are filled. Consecutive
pairs abut outer edge to outer edge. One pair therefore sweeps
``3 r - r_min`` metres.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

from .core import (
    SINGLE,
    NoAdmissibleRange,
    Track,
    TrackPlan,
    check_pairing,
    pairing_limit,
)

PLAN_HEADER = "# track_plan v1"
_EPS = 1e-9


@dataclass(frozen=True)
class RangeInterval:
    a_m: float
    b_m: float
    step_m: float = 1.0

    def __post_init__(self):
        if self.step_m <= 0:
            raise ValueError("step must be positive")
        if self.a_m > self.b_m:
            raise ValueError(f"empty range interval [{self.a_m}, {self.b_m}]")

    @classmethod
    def for_sensor(cls, r_min: float, upper: float, step_m: float = 1.0) -> "RangeInterval":
        a = pairing_limit(r_min)
        if upper < a:
            raise NoAdmissibleRange(
                f"upper range {upper:g} m is below the paired-track limit {a:g} m"
            )
        return cls(a, upper, step_m)

    @property
    def r_min_m(self) -> float:
        return self.a_m / 3.0

    def candidates(self) -> list[float]:
        n = int(math.floor((self.b_m - self.a_m) / self.step_m + _EPS))
        return [self.a_m + i * self.step_m for i in range(n + 1)]


def pair_period(r: float, r_min: float) -> float:
    check_pairing(r, r_min)
    return 3.0 * r - r_min


def tracks_needed(W: float, r: float, r_min: float) -> int:
    if W <= 0:
        raise ValueError(f"width must be positive, got {W}")
    period = pair_period(r, r_min)
    n_full = int(math.floor(W / period + _EPS))
    residual = W - n_full * period
    if residual <= _EPS:
        return 2 * n_full
    # one side swath of an unpaired track is enough for a thin strip
    if residual <= r - r_min + _EPS:
        return 2 * n_full + 1
    return 2 * n_full + 2


def polygon_adaptation(W: float, interval: RangeInterval, r_min: float | None = None) -> float:
    """Smallest candidate range that achieves the minimum track count.

    ``r_min`` defaults to a third of the interval's lower bound.
    """
    if r_min is None:
        r_min = interval.r_min_m
    best_r, best_n = None, None
    for r in interval.candidates():
        n = tracks_needed(W, r, r_min)
        if best_n is None or n < best_n:
            best_r, best_n = r, n
    return best_r


def layout_tracks(W: float, r_adpt: float, r_min: float, origin: float = 0.0) -> TrackPlan:
    check_pairing(r_adpt, r_min)
    r_adpt, origin = float(r_adpt), float(origin)
    if W <= 0:
        return TrackPlan((), origin, r_min)
    n = tracks_needed(W, r_adpt, r_min)
    spacing = r_adpt - r_min
    tracks = []
    x = origin + r_adpt
    for k in range(n // 2):
        tracks.append(Track(x, k, r_adpt))
        tracks.append(Track(x + spacing, k, r_adpt))
        x += spacing + 2.0 * r_adpt
    if n % 2:
        tracks.append(Track(x, SINGLE, r_adpt))
    return TrackPlan(tuple(tracks), origin + W, r_min)


def replan(covered_up_to: float, W_total: float, new_r_eff: float, r_min: float):
    """Re-run the adaptation over the strip not yet covered.

    Returns ``(r_adpt, plan)`` with the plan starting at ``covered_up_to``.
    """
    if covered_up_to >= W_total:
        raise ValueError("nothing left to cover")
    interval = RangeInterval.for_sensor(r_min, new_r_eff)
    W = W_total - covered_up_to
    r_adpt = polygon_adaptation(W, interval)
    return r_adpt, layout_tracks(W, r_adpt, r_min, origin=covered_up_to)


def format_plan(plan: TrackPlan) -> str:
    lines = [PLAN_HEADER, "index,x_m,pair_index,r_used_m"]
    for i, t in enumerate(plan.tracks):
        lines.append(f"{i},{t.x_m!r},{t.pair_index},{t.r_used_m!r}")
    return "\n".join(lines) + "\n"


def write_plan(plan: TrackPlan, path) -> None:
    Path(path).write_text(format_plan(plan))


def read_plan(path, r_min: float = 0.0) -> TrackPlan:
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0].strip() != PLAN_HEADER:
        raise ValueError(f"{path}: missing '{PLAN_HEADER}' header")
    tracks = []
    for line in lines[2:]:
        if not line.strip():
            continue
        _, x, pair, r = line.split(",")
        pair = pair if pair == SINGLE else int(pair)
        tracks.append(Track(float(x), pair, float(r)))
    end = tracks[-1].x_m + tracks[-1].r_used_m if tracks else 0.0
    return TrackPlan(tuple(tracks), end, r_min)
