"""Adaptive track spacing for side-looking sonar seabed surveys."""

from .core import (
    InfeasiblePairing,
    NoAdmissibleRange,
    SensorSpec,
    SurveyArea,
    Track,
    TrackPlan,
    validate_sensor,
)
from .pdmodel import PdCurve, PdCurveParams, PdSample, effective_range, fit_curve, synth_curve
from .planner import (
    RangeInterval,
    layout_tracks,
    pair_period,
    polygon_adaptation,
    replan,
    tracks_needed,
)
from .simulator import MissionConfig, MissionResult, RiskGrid, ensonify, run_mission

__version__ = "0.1.0"
