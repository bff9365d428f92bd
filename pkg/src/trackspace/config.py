"""Experiment specification files.

Flat INI-style text: ``key = value`` lines grouped under section headers.
Unknown sections or keys are rejected so typos never pass silently.
"""

from __future__ import annotations

import configparser
import os
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .core import SensorSpec, SurveyArea, TrackspaceError
from .pdmodel import PdCurve, PdCurveParams, synth_curve
from .simulator import MissionConfig

OUTPUT_ROOT_ENV = "TRACKSPACE_OUTPUT_ROOT"
BUNDLED = ("experiment1", "experiment2", "experiment3")

_SCHEMA = {
    "experiment": {"name", "seed", "output_dir", "gmm_components",
                   "perimeter_margin_cells", "histogram_bins", "pool_samples"},
    "area": {"width_m", "length_m", "cell_size_m"},
    "sensor": {"r_min_m", "r_planned_m", "r_true_m"},
    "curve": {"peak_range_m", "peak_pd", "rise_width_m", "fall_width_m",
              "tail_range_m", "tail_pd", "support_m"},
    "mission": {"threshold", "noise_sd", "strategies"},
}
_REQUIRED = {
    "experiment": {"name", "seed"},
    "area": {"width_m", "length_m"},
    "sensor": {"r_min_m", "r_planned_m", "r_true_m"},
}


class SpecError(TrackspaceError):
    pass


@dataclass(frozen=True)
class ExperimentSpec:
    name: str
    area: SurveyArea
    sensor: SensorSpec
    curve_params: PdCurveParams
    support_m: float
    threshold: float = 0.05
    noise_sd: float = 0.02
    seed: int = 0
    strategies: tuple[str, str] = ("predefined", "adaptive")
    gmm_components: int = 2
    perimeter_margin_cells: int = 0
    histogram_bins: int = 20
    pool_samples: bool = False
    output_dir: str = ""

    def true_curve(self) -> PdCurve:
        return synth_curve(self.curve_params, self.sensor.r_min_m, self.support_m)

    def mission(self, strategy: str) -> MissionConfig:
        return MissionConfig(self.area, self.sensor, strategy, self.true_curve(),
                             self.threshold, self.noise_sd, self.seed, self.pool_samples)

    def resolve_output(self, override=None) -> Path:
        if override:
            return Path(override)
        root = os.environ.get(OUTPUT_ROOT_ENV)
        if root:
            return Path(root) / self.name
        return Path(self.output_dir or Path("trackspace_out") / self.name)


def parse_spec(text: str, source: str = "<spec>") -> ExperimentSpec:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise SpecError(f"{source}: {exc}") from None

    for section in cp.sections():
        if section not in _SCHEMA:
            raise SpecError(f"{source}: unknown section [{section}]")
        unknown = set(cp[section]) - _SCHEMA[section]
        if unknown:
            raise SpecError(f"{source}: unknown key(s) in [{section}]: {', '.join(sorted(unknown))}")
    for section, keys in _REQUIRED.items():
        missing = keys - set(cp[section]) if cp.has_section(section) else keys
        if missing:
            raise SpecError(f"{source}: [{section}] missing {', '.join(sorted(missing))}")

    def get(section, key, conv=float, default=None):
        if not cp.has_option(section, key):
            return default
        raw = cp.get(section, key)
        try:
            return conv(raw)
        except ValueError:
            raise SpecError(f"{source}: [{section}] {key} = {raw!r} is not a valid value") from None

    try:
        area = SurveyArea(get("area", "width_m"), get("area", "length_m"),
                          get("area", "cell_size_m", default=5.0))
        sensor = SensorSpec(get("sensor", "r_min_m"), get("sensor", "r_planned_m"),
                            get("sensor", "r_true_m"))
        peak = get("curve", "peak_range_m", default=70.0)
        peak_pd = get("curve", "peak_pd", default=0.4)
        rise = get("curve", "rise_width_m", default=15.0)
        fall = get("curve", "fall_width_m")
        if fall is None:
            tail_range = get("curve", "tail_range_m", default=sensor.r_true_m)
            tail_pd = get("curve", "tail_pd", default=get("mission", "threshold", default=0.05))
            params = PdCurveParams.with_tail(tail_range, tail_pd, peak, peak_pd, rise)
        else:
            params = PdCurveParams(peak, peak_pd, rise, fall)
        strategies = tuple(s.strip() for s in get("mission", "strategies", str,
                                                  "predefined, adaptive").split(","))
        if strategies != ("predefined", "adaptive"):
            raise SpecError(f"{source}: strategies must be 'predefined, adaptive'")
        spec = ExperimentSpec(
            name=get("experiment", "name", str),
            area=area,
            sensor=sensor,
            curve_params=params,
            support_m=get("curve", "support_m", default=150.0),
            threshold=get("mission", "threshold", default=0.05),
            noise_sd=get("mission", "noise_sd", default=0.02),
            seed=get("experiment", "seed", int),
            strategies=strategies,
            gmm_components=get("experiment", "gmm_components", int, 2),
            perimeter_margin_cells=get("experiment", "perimeter_margin_cells", int, 0),
            histogram_bins=get("experiment", "histogram_bins", int, 20),
            pool_samples=get("experiment", "pool_samples", _boolean, False),
            output_dir=get("experiment", "output_dir", str, ""),
        )
        spec.mission("adaptive")  # runs curve and mission validation
    except SpecError:
        raise
    except (TrackspaceError, ValueError) as exc:
        raise SpecError(f"{source}: {exc}") from None
    if spec.gmm_components < 1 or spec.perimeter_margin_cells < 0 or spec.histogram_bins < 2:
        raise SpecError(f"{source}: gmm_components, perimeter_margin_cells or histogram_bins out of range")
    return spec


def _boolean(raw: str) -> bool:
    value = raw.strip().lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off"):
        return False
    raise ValueError(raw)


def load_spec(path_or_name) -> ExperimentSpec:
    """Read a spec file, or one of the bundled experiments by name."""
    if str(path_or_name) in BUNDLED:
        ref = resources.files("trackspace.experiments") / f"{path_or_name}.ini"
        return parse_spec(ref.read_text(), f"{path_or_name}.ini")
    path = Path(path_or_name)
    try:
        text = path.read_text()
    except OSError as exc:
        raise SpecError(f"cannot read {path}: {exc.strerror}") from None
    return parse_spec(text, str(path))
