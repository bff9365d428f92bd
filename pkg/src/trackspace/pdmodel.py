"""Range-dependent probability-of-detection curves.

A :class:`PdCurve` is piecewise linear over 1 m knots from 0 to its support
bound and is identically zero inside the nadir gap and beyond the support.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import isotonic_regression

from .core import NoAdmissibleRange, TrackspaceError

CURVE_HEADER = "# pd_curve v1"
FIT_BIN_M = 5.0
COVERAGE_BIN_M = 10.0
# P_d values are produced by exp(); this absorbs the last-ulp error at a
# threshold crossing that is exact in closed form.
THRESHOLD_TOL = 1e-9


class InvalidParams(TrackspaceError):
    pass


class InsufficientData(TrackspaceError):
    pass


@dataclass(frozen=True)
class PdCurveParams:
    peak_range_m: float = 70.0
    peak_pd: float = 0.4
    rise_width_m: float = 15.0
    fall_width_m: float = 30.0

    @classmethod
    def with_tail(cls, tail_range_m: float, tail_pd: float, peak_range_m: float = 70.0,
                  peak_pd: float = 0.4, rise_width_m: float = 15.0) -> "PdCurveParams":
        """Parameters whose falling branch passes through ``(tail_range_m, tail_pd)``."""
        if not 0 < tail_pd < peak_pd:
            raise InvalidParams(f"tail_pd must lie in (0, peak_pd), got {tail_pd}")
        if tail_range_m <= peak_range_m:
            raise InvalidParams("tail range must lie beyond the peak")
        fall = (tail_range_m - peak_range_m) / math.sqrt(2.0 * math.log(peak_pd / tail_pd))
        return cls(peak_range_m, peak_pd, rise_width_m, fall)


@dataclass(frozen=True, eq=False)
class PdCurve:
    knots_m: np.ndarray
    pd: np.ndarray
    r_min_m: float

    def __post_init__(self):
        knots = np.asarray(self.knots_m, dtype=float)
        pd = np.asarray(self.pd, dtype=float)
        if knots.ndim != 1 or knots.shape != pd.shape or knots.size < 2:
            raise InvalidParams("knots and values must be matching 1-D arrays")
        if np.any(np.diff(knots) <= 0):
            raise InvalidParams("knots must be strictly increasing")
        if np.any(pd < 0) or np.any(pd > 1) or not np.all(np.isfinite(pd)):
            raise InvalidParams("P_d values must lie in [0, 1]")
        knots.setflags(write=False)
        pd.setflags(write=False)
        object.__setattr__(self, "knots_m", knots)
        object.__setattr__(self, "pd", pd)

    @property
    def support_m(self) -> float:
        return float(self.knots_m[-1])

    def __call__(self, y):
        y = np.asarray(y, dtype=float)
        out = np.interp(y, self.knots_m, self.pd, left=0.0, right=0.0)
        out = np.where((y < self.r_min_m) | (y > self.support_m), 0.0, out)
        return out if out.ndim else float(out)

    def is_unimodal(self) -> bool:
        vals = self.pd[self.knots_m >= self.r_min_m]
        if vals.size == 0:
            return True
        d = np.diff(vals)
        peak = int(np.argmax(vals))
        return bool(np.all(d[:peak] >= 0) and np.all(d[peak:] <= 0))

    def integral(self) -> float:
        return float(np.trapezoid(self.pd, self.knots_m))

    def __eq__(self, other):
        if not isinstance(other, PdCurve):
            return NotImplemented
        return (self.r_min_m == other.r_min_m
                and np.array_equal(self.knots_m, other.knots_m)
                and np.array_equal(self.pd, other.pd))

    __hash__ = None


def knot_axis(support: float) -> np.ndarray:
    return np.arange(0.0, math.floor(support) + 1.0)


def synth_curve(params: PdCurveParams, r_min: float, support: float) -> PdCurve:
    """Asymmetric Gaussian bell with its maximum ``peak_pd`` at ``peak_range_m``."""
    if not (r_min < params.peak_range_m < support):
        raise InvalidParams(
            f"need r_min < peak < support, got {r_min}, {params.peak_range_m}, {support}"
        )
    if not 0 < params.peak_pd <= 1:
        raise InvalidParams(f"peak_pd must lie in (0, 1], got {params.peak_pd}")
    if params.rise_width_m <= 0 or params.fall_width_m <= 0:
        raise InvalidParams("rise and fall widths must be positive")

    y = knot_axis(support)
    width = np.where(y < params.peak_range_m, params.rise_width_m, params.fall_width_m)
    pd = params.peak_pd * np.exp(-((y - params.peak_range_m) ** 2) / (2.0 * width ** 2))
    pd[(y < r_min) | (y > support)] = 0.0
    return PdCurve(y, pd, r_min)


def effective_range(curve: PdCurve, threshold: float) -> float:
    """Largest 1 m knot at which the curve still meets ``threshold``."""
    if not 0 < threshold < 1:
        raise ValueError(f"threshold must lie in (0, 1), got {threshold}")
    ok = np.flatnonzero(curve.pd >= threshold - THRESHOLD_TOL)
    if ok.size == 0:
        raise NoAdmissibleRange(f"curve never reaches P_d = {threshold}")
    return float(curve.knots_m[ok[-1]])


@dataclass(frozen=True)
class PdSample:
    range_m: float
    pd_obs: float

    def __post_init__(self):
        if self.range_m < 0 or not 0 <= self.pd_obs <= 1:
            raise ValueError(f"invalid sample {self}")


def _unimodal_smooth(values: np.ndarray) -> np.ndarray:
    peak = int(np.argmax(values))
    up = isotonic_regression(values[: peak + 1], increasing=True).x
    down = isotonic_regression(values[peak:], increasing=False).x
    out = np.concatenate([up[:-1], [max(up[-1], down[0])], down[1:]])
    return out


def fit_curve(samples: Sequence[PdSample], r_min: float, support: float) -> PdCurve:
    """Estimate a unimodal P_d curve from noisy range samples.

    Samples are averaged in 5 m range bins; the curve interpolates the bin
    means at the mean sample range of each bin (extrapolating linearly to
    the ends of the support) and is made unimodal about its empirical peak.
    """
    if support <= r_min:
        raise InsufficientData("support must exceed r_min")
    rng = np.array([s.range_m for s in samples], dtype=float)
    obs = np.array([s.pd_obs for s in samples], dtype=float)
    inside = (rng >= r_min) & (rng <= support)
    rng, obs = rng[inside], obs[inside]

    n_cov = max(1, math.ceil((support - r_min) / COVERAGE_BIN_M - 1e-9))
    cov_idx = np.minimum(((rng - r_min) // COVERAGE_BIN_M).astype(int), n_cov - 1)
    if rng.size == 0 or np.unique(cov_idx).size < n_cov:
        raise InsufficientData(
            f"need at least one sample per {COVERAGE_BIN_M:g} m bin over [{r_min:g}, {support:g}]"
        )

    n_fit = max(1, math.ceil((support - r_min) / FIT_BIN_M - 1e-9))
    fit_idx = np.minimum(((rng - r_min) // FIT_BIN_M).astype(int), n_fit - 1)
    occupied = np.unique(fit_idx)
    centres = np.array([rng[fit_idx == b].mean() for b in occupied])
    means = np.array([obs[fit_idx == b].mean() for b in occupied])
    means = _unimodal_smooth(means)

    y = knot_axis(support)
    pd = np.interp(y, centres, means)
    if centres.size >= 2:
        lo_slope = (means[1] - means[0]) / (centres[1] - centres[0])
        hi_slope = (means[-1] - means[-2]) / (centres[-1] - centres[-2])
        below, above = y < centres[0], y > centres[-1]
        pd[below] = means[0] + lo_slope * (y[below] - centres[0])
        pd[above] = means[-1] + hi_slope * (y[above] - centres[-1])
    pd = np.clip(pd, 0.0, 1.0)
    pd[y < r_min] = 0.0
    return PdCurve(y, pd, r_min)


def write_curve(curve: PdCurve, path) -> None:
    lines = [CURVE_HEADER, f"# r_min_m {curve.r_min_m!r}"]
    lines += [f"{y!r} {p!r}" for y, p in zip(curve.knots_m.tolist(), curve.pd.tolist())]
    Path(path).write_text("\n".join(lines) + "\n")


def read_curve(path, r_min: float | None = None) -> PdCurve:
    text = Path(path).read_text().splitlines()
    if not text or text[0].strip() != CURVE_HEADER:
        raise ValueError(f"{path}: missing '{CURVE_HEADER}' header")
    knots, pd = [], []
    for lineno, line in enumerate(text[1:], start=2):
        line = line.strip()
        if line.startswith("# r_min_m") and r_min is None:
            r_min = float(line.split()[-1])
            continue
        if not line or line.startswith("#"):
            continue
        parts = line.replace(",", " ").split()
        if len(parts) != 2:
            raise ValueError(f"{path}:{lineno}: expected 'range_m pd'")
        knots.append(float(parts[0]))
        pd.append(float(parts[1]))
    if r_min is None:
        nz = [k for k, p in zip(knots, pd) if p > 0]
        r_min = nz[0] if nz else 0.0
    return PdCurve(np.array(knots), np.array(pd), r_min)


def samples_from_pairs(pairs: Iterable[tuple[float, float]]) -> list[PdSample]:
    return [PdSample(float(r), float(p)) for r, p in pairs]
