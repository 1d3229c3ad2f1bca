"""Curvature flow of convex curves in time-dependent Minkowski planes."""

from .config import ConfigError, RunConfig, load_config, parse_config
from .experiments import (
    BlowupReport,
    ExplicitK,
    FromSupport,
    blowup_study,
    entropy_and_bounds_check,
    extinction_bound,
    gronwall_check,
    make_initial_from_support,
    median_bound_check,
)
from .flow import (
    CheckReport,
    ClosingConditionError,
    CurvatureState,
    CurveSnapshot,
    FlowTrace,
    InvariantViolation,
    SolverConfig,
    adaptive_dt,
    check_qlength_evolution,
    closing_residual,
    evolve,
    reconstruct,
    rhs,
    step,
)
from .gauge import (
    FSpec,
    Gauge,
    GaugeError,
    GaugeProfile,
    Homothetic,
    PlaneFamily,
    Static,
    Tabulated,
    ball_area,
    curve_area,
    dual_boundary,
    median_bound_constant,
    median_curvature,
    q_length,
    unit_ball_boundary,
    wedge,
)
from .spectral import AngleGrid

__version__ = "0.1.0"
