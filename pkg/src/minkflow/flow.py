"""Method-of-lines solver for the Minkowskian curvature flow.

The unknown is the curvature ``k(theta, t)`` in the normal-angle
parameter. Spatial derivatives are spectral, time stepping is classical
RK4 under a diffusive CFL restriction. Curves are rebuilt from ``k`` on
demand, and every recorded step carries the geometric diagnostics used by
the verification routines.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy import integrate as sp_integrate
from scipy import optimize

from .gauge import (
    Gauge,
    PlaneFamily,
    curve_area,
    dual_boundary,
    median_bound_constant,
    median_curvature,
    metric_factor,
    q_length,
    unit_ball_boundary,
)
from .spectral import AngleGrid, antiderivative, derivative, derivative_at_origin, derivatives, integrate

log = logging.getLogger(__name__)

CLOSING_TOL = 1e-8
MIN_INITIAL_K = 1e-6
DT_FLOOR = 1e-14

TERMINATION_REASONS = ("area_floor", "k_blowup", "t_max", "invariant_violation")


class FlowError(RuntimeError):
    pass


class InvariantViolation(FlowError):
    pass


class ClosingConditionError(InvariantViolation):
    """Initial curvature does not close up into a curve."""

    def __init__(self, residual: tuple[float, float], scale: float):
        self.residual = residual
        self.scale = scale
        super().__init__(
            f"closing conditions violated: residual (sin, cos) = "
            f"({residual[0]:.6g}, {residual[1]:.6g}), allowed "
            f"{CLOSING_TOL:g} * {scale:.6g}"
        )


@dataclass(frozen=True)
class CurvatureState:
    """Curvature samples at one time.

    ``translation_acc`` holds the running time integrals
    ``(int a(0,s) k(0,s) ds, int a(0,s) k'(0,s) + a'(0,s) k(0,s) ds)``
    that position the rebuilt curve in the plane.
    """

    grid: AngleGrid
    k: np.ndarray
    t: float = 0.0
    translation_acc: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        k = np.asarray(self.k, dtype=float)
        if k.shape != (self.grid.n,):
            raise ValueError(f"expected {self.grid.n} curvature samples, got shape {k.shape}")
        object.__setattr__(self, "k", k)


@dataclass
class SolverConfig:
    n: int = 256
    cfl: float = 0.2
    stop_area_frac: float = 1e-3
    stop_kmax: float = 1e6
    t_max: float = math.inf
    record_every: int = 10
    snapshot_times: Sequence[float] = ()
    keep_states: bool = True

    def __post_init__(self):
        AngleGrid(self.n)
        if not 0.0 < self.cfl <= 0.5:
            raise ValueError(f"cfl must lie in (0, 0.5], got {self.cfl}")
        if not 0.0 < self.stop_area_frac < 1.0:
            raise ValueError(f"stop_area_frac must lie in (0, 1), got {self.stop_area_frac}")
        if not self.stop_kmax > 0.0:
            raise ValueError(f"stop_kmax must be positive, got {self.stop_kmax}")
        if not self.t_max > 0.0:
            raise ValueError(f"t_max must be positive, got {self.t_max}")
        if int(self.record_every) != self.record_every or self.record_every < 1:
            raise ValueError(f"record_every must be a positive integer, got {self.record_every}")
        times = sorted(float(t) for t in self.snapshot_times)
        if any(t < 0.0 for t in times):
            raise ValueError("snapshot times must be nonnegative")
        self.snapshot_times = tuple(times)


@dataclass(frozen=True)
class CurveSnapshot:
    grid: AngleGrid
    t: float
    points: np.ndarray
    lam: np.ndarray
    k: np.ndarray
    dual: np.ndarray
    closed: bool = True


@dataclass(frozen=True)
class Record:
    t: float
    dt: float
    area_curve: float
    area_analytic: float
    q_length: float
    iso_ratio: float
    k_min: float
    k_max: float
    k_star: float
    c_bound: float
    entropy: float
    grad_fun: float
    sq_fun: float
    closing_res_sin: float
    closing_res_cos: float

    @property
    def closing_res(self) -> float:
        return math.hypot(self.closing_res_sin, self.closing_res_cos)


RECORD_COLUMNS = tuple(Record.__dataclass_fields__)


@dataclass
class FlowTrace:
    records: list[Record] = field(default_factory=list)
    states: list[CurvatureState] = field(default_factory=list)
    snapshots: list[CurveSnapshot] = field(default_factory=list)
    reason: str | None = None
    message: str = ""
    steps: int = 0
    dt_last: float = 0.0
    area0: float = float("nan")
    extinction_time: float = float("nan")
    final_state: CurvatureState | None = None

    @property
    def t_last(self) -> float:
        return self.final_state.t if self.final_state is not None else self.records[-1].t

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records])


@dataclass(frozen=True)
class CheckReport:
    """Outcome of one verification: worst deviation against a tolerance."""

    name: str
    passed: bool
    worst: float
    tolerance: float
    detail: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        text = f"{status} {self.name}: worst={self.worst:.6g} tol={self.tolerance:.3g}"
        return f"{text} ({self.detail})" if self.detail else text


def rhs_values(k: np.ndarray, gauge: Gauge) -> np.ndarray:
    dk, ddk = derivatives(k)
    k2 = k * k
    return (gauge.a * k2 * ddk + 2.0 * gauge.da * k2 * dk) / gauge.conv + k2 * k + gauge.dlog_conv_dt * k


def rhs(state: CurvatureState, family: PlaneFamily) -> np.ndarray:
    """Time derivative of the curvature samples."""
    with np.errstate(over="ignore", invalid="ignore"):
        return rhs_values(state.k, family.gauge(state.t, state.grid))


def closing_residual(state, gauge: Gauge) -> tuple[float, float]:
    """``(int (a+a'')/k sin, int (a+a'')/k cos)``; both vanish for closed curves."""
    k = getattr(state, "k", state)
    if np.min(k) <= 0.0:
        raise ValueError("curvature must be positive")
    w = gauge.conv / k
    th = gauge.grid.theta
    return float(integrate(w * np.sin(th))), float(integrate(w * np.cos(th)))


def closing_scale(k: np.ndarray, gauge: Gauge) -> float:
    return float(np.max(gauge.conv) / np.min(k))


def is_closed(k: np.ndarray, gauge: Gauge, tol: float = CLOSING_TOL) -> bool:
    return math.hypot(*closing_residual(k, gauge)) <= tol * closing_scale(k, gauge)


def enclosed_area(k: np.ndarray, gauge: Gauge) -> float:
    """Area of the closed curve with curvature ``k`` without rebuilding it.

    With ``w = (a+a'')/k`` the Euclidean support function solves
    ``h + h'' = w`` and the area is ``1/2 int h w``, i.e.
    ``pi * sum |w_m|^2 / (1 - m^2)`` over all modes except ``m = +-1``.
    """
    w = gauge.conv / k
    n = w.shape[-1]
    c = np.fft.rfft(w) / n
    m = np.arange(c.shape[-1], dtype=float)
    weight = np.zeros_like(m)
    weight[0] = 1.0
    weight[2:] = 2.0 / (1.0 - m[2:] ** 2)
    weight[-1] *= 0.5
    return float(math.pi * np.sum(weight * np.abs(c) ** 2))


def adaptive_dt(state: CurvatureState, family: PlaneFamily, config: SolverConfig,
                next_stop: float | None = None) -> float:
    """Diffusive step restriction ``cfl * dtheta^2 / max(k^2 a / (a + a''))``.

    The step is shortened so that ``t + dt`` lands exactly on ``next_stop``
    when it would otherwise pass it.
    """
    gauge = family.gauge(state.t, state.grid)
    with np.errstate(over="ignore", invalid="ignore"):
        stiff = float(np.max(state.k ** 2 * gauge.a / gauge.conv))
    if not math.isfinite(stiff) or stiff <= 0.0:
        return 0.0
    dt = config.cfl * state.grid.dtheta ** 2 / stiff
    if next_stop is not None and state.t + dt > next_stop:
        dt = next_stop - state.t
    return dt


def _origin_terms(k: np.ndarray, gauge: Gauge) -> tuple[float, float]:
    dk0 = derivative_at_origin(k)
    return float(gauge.a[0] * k[0]), float(gauge.a[0] * dk0 + gauge.da[0] * k[0])


def step(state: CurvatureState, family: PlaneFamily, dt: float) -> CurvatureState:
    """One classical RK4 step of the curvature equation."""
    if dt == 0.0:
        return state
    grid, t, k = state.grid, state.t, state.k
    g0 = family.gauge(t, grid)
    gh = family.gauge(t + 0.5 * dt, grid)
    # last stage uses the left limit so a step ending on a rate kink stays smooth
    g1 = family.gauge(math.nextafter(t + dt, t), grid)
    with np.errstate(over="ignore", invalid="ignore"):
        s1 = rhs_values(k, g0)
        s2 = rhs_values(k + 0.5 * dt * s1, gh)
        s3 = rhs_values(k + 0.5 * dt * s2, gh)
        s4 = rhs_values(k + dt * s3, g1)
        k_new = k + (dt / 6.0) * (s1 + 2.0 * s2 + 2.0 * s3 + s4)
    if not np.all(np.isfinite(k_new)):
        raise FloatingPointError("curvature overflowed during step")
    if np.min(k_new) <= 0.0:
        raise InvariantViolation(f"curvature lost positivity at t={t + dt:.6g}")
    x0, y0 = _origin_terms(k, g0)
    x1, y1 = _origin_terms(k_new, g1)
    acc = state.translation_acc
    acc = (acc[0] + 0.5 * dt * (x0 + x1), acc[1] + 0.5 * dt * (y0 + y1))
    return CurvatureState(grid, k_new, t + dt, acc)


def reconstruct(state: CurvatureState, family: PlaneFamily) -> CurveSnapshot:
    """Rebuild the curve ``F(theta, t)`` whose curvature is ``state.k``."""
    grid = state.grid
    gauge = family.gauge(state.t, grid)
    th = grid.theta
    w = gauge.conv / state.k
    x = -antiderivative(w * np.sin(th), th) - state.translation_acc[0]
    y = antiderivative(w * np.cos(th), th) - state.translation_acc[1]
    closed = is_closed(state.k, gauge)
    if not closed:
        warnings.warn(
            f"curvature at t={state.t:.6g} does not satisfy the closing conditions; "
            "rebuilt curve is open",
            RuntimeWarning,
            stacklevel=2,
        )
    return CurveSnapshot(
        grid=grid,
        t=state.t,
        points=np.stack([x, y], axis=-1),
        lam=metric_factor(state.k, gauge),
        k=state.k.copy(),
        dual=dual_boundary(gauge),
        closed=closed,
    )


def time_velocity(state: CurvatureState, family: PlaneFamily) -> np.ndarray:
    """``-k p - a^2 k' q``: normal motion plus the tangential drift of the parameterization."""
    gauge = family.gauge(state.t, state.grid)
    p, _ = unit_ball_boundary(gauge)
    q = dual_boundary(gauge)
    dk = derivative(state.k)
    return -state.k[:, None] * p - (gauge.a ** 2 * dk)[:, None] * q


def functionals(k: np.ndarray, family: PlaneFamily, t: float, grid: AngleGrid) -> tuple[float, float, float]:
    """Entropy ``int a0 (a0+a0'') log(k/f)``, ``int ((a0 k)')^2`` and ``int (a0 k)^2``."""
    profile, f = family.base_and_scale(t)
    a0, _, dda0 = profile.samples(grid)
    a0k = a0 * k
    entropy = float(integrate(a0 * (a0 + dda0) * np.log(k / f)))
    grad = float(integrate(derivative(a0k) ** 2))
    sq = float(integrate(a0k ** 2))
    return entropy, grad, sq


def make_record(state: CurvatureState, family: PlaneFamily, dt: float, area_analytic: float,
                snapshot: CurveSnapshot | None = None) -> Record:
    gauge = family.gauge(state.t, state.grid)
    snap = snapshot if snapshot is not None else reconstruct(state, family)
    area = curve_area(snap)
    lq = q_length(state.k, gauge)
    res_sin, res_cos = closing_residual(state.k, gauge)
    entropy, grad, sq = functionals(state.k, family, state.t, state.grid)
    return Record(
        t=state.t,
        dt=dt,
        area_curve=area,
        area_analytic=area_analytic,
        q_length=lq,
        iso_ratio=lq * lq / area,
        k_min=float(np.min(state.k)),
        k_max=float(np.max(state.k)),
        k_star=median_curvature(state.k),
        c_bound=median_bound_constant(gauge) * lq / area,
        entropy=entropy,
        grad_fun=grad,
        sq_fun=sq,
        closing_res_sin=res_sin,
        closing_res_cos=res_cos,
    )


def validate_initial(state: CurvatureState, family: PlaneFamily) -> None:
    k = state.k
    if not np.all(np.isfinite(k)) or np.min(k) < MIN_INITIAL_K:
        raise InvariantViolation(
            f"initial curvature must be finite with min k >= {MIN_INITIAL_K:g}"
        )
    gauge = family.gauge(state.t, state.grid)
    res = closing_residual(k, gauge)
    scale = closing_scale(k, gauge)
    if math.hypot(*res) > CLOSING_TOL * scale:
        raise ClosingConditionError(res, scale)


def extinction_estimate(area: float, t: float, family: PlaneFamily, grid: AngleGrid) -> float:
    """Time at which the area law ``dA/dt = -2 A(P_t)`` drives ``area`` to zero."""
    if area <= 0.0:
        return t

    def deficit(tau):
        swept, _ = sp_integrate.quad(lambda s: family.ball_area(s, grid), t, tau)
        return 2.0 * swept - area

    hi = t + area / (2.0 * family.ball_area(t, grid))
    while deficit(hi) < 0.0:
        hi = t + 2.0 * (hi - t)
    return float(optimize.brentq(deficit, t, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps))


def evolve(initial: CurvatureState, family: PlaneFamily, config: SolverConfig) -> FlowTrace:
    """Run the flow from ``initial`` until one of the stopping rules fires.

    Raises :class:`ClosingConditionError` / :class:`InvariantViolation`
    before any stepping if the initial data are not admissible. Failures
    during the run end the trace with ``reason = "invariant_violation"``.
    """
    grid = initial.grid
    validate_initial(initial, family)
    trace = FlowTrace()
    monotone = family.conv_nondecreasing()
    k_floor = float(np.min(initial.k))
    pending = [ts for ts in config.snapshot_times if ts >= initial.t]

    state = initial
    area0 = enclosed_area(state.k, family.gauge(state.t, grid))
    swept = 0.0
    dt = 0.0
    steps = 0

    def record(snapshot_due: bool):
        snap = reconstruct(state, family)
        if not trace.records:
            trace.area0 = curve_area(snap)
        rec = make_record(state, family, dt, trace.area0 - 2.0 * swept, snap)
        if trace.records and rec.t <= trace.records[-1].t:
            if snapshot_due:
                trace.snapshots.append(snap)
            return
        trace.records.append(rec)
        if config.keep_states:
            trace.states.append(state)
        if snapshot_due:
            trace.snapshots.append(snap)
        gauge = family.gauge(state.t, grid)
        scale = closing_scale(state.k, gauge)
        if rec.closing_res > CLOSING_TOL * scale:
            raise InvariantViolation(
                f"closing residual {rec.closing_res:.3g} exceeds {CLOSING_TOL:g} * {scale:.3g} "
                f"at t={rec.t:.6g}"
            )
        if monotone and rec.k_min < k_floor - 1e-8:
            raise InvariantViolation(
                f"min k dropped to {rec.k_min:.12g} below initial {k_floor:.12g} at t={rec.t:.6g}"
            )

    def snapshot_due() -> bool:
        hit = False
        while pending and pending[0] <= state.t:
            pending.pop(0)
            hit = True
        return hit

    reason = None
    try:
        record(snapshot_due())
        while True:
            gauge = family.gauge(state.t, grid)
            area = enclosed_area(state.k, gauge)
            if area < config.stop_area_frac * area0:
                reason = "area_floor"
                break
            if np.max(state.k) > config.stop_kmax:
                reason = "k_blowup"
                break
            if state.t >= config.t_max:
                reason = "t_max"
                break
            stops = [ts for ts in pending[:1]]
            stops.extend(tb for tb in family.breakpoints() if tb > state.t)
            if math.isfinite(config.t_max):
                stops.append(config.t_max)
            next_stop = min(stops) if stops else None
            dt_try = adaptive_dt(state, family, config, next_stop)
            if dt_try < DT_FLOOR:
                reason = "k_blowup"
                trace.message = f"time step underflow (dt={dt_try:.3g})"
                break
            try:
                new = step(state, family, dt_try)
            except FloatingPointError as exc:
                reason = "k_blowup"
                trace.message = str(exc)
                break
            if next_stop is not None and new.t > next_stop - 1e-15 * max(1.0, next_stop):
                new = replace(new, t=next_stop)
            # Simpson is exact for the quadratic-in-t homothetic areas
            swept += dt_try / 6.0 * (
                family.ball_area(state.t, grid)
                + 4.0 * family.ball_area(state.t + 0.5 * dt_try, grid)
                + family.ball_area(state.t + dt_try, grid)
            )
            state = new
            dt = dt_try
            steps += 1
            due = snapshot_due()
            if due or steps % config.record_every == 0:
                record(due)
    except InvariantViolation as exc:
        reason = "invariant_violation"
        trace.message = str(exc)
        log.warning("flow stopped: %s", exc)

    if reason != "invariant_violation":
        try:
            record(False)
        except InvariantViolation as exc:
            reason = "invariant_violation"
            trace.message = str(exc)
    trace.reason = reason
    trace.steps = steps
    trace.dt_last = dt
    trace.final_state = state
    final_area = enclosed_area(state.k, family.gauge(state.t, grid))
    trace.extinction_time = extinction_estimate(final_area, state.t, family, grid)
    return trace


def fd_derivative(t: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Three-point derivative on a nonuniform grid, at interior points."""
    h1 = t[1:-1] - t[:-2]
    h2 = t[2:] - t[1:-1]
    return (
        -h2 / (h1 * (h1 + h2)) * y[:-2]
        + (h2 - h1) / (h1 * h2) * y[1:-1]
        + h1 / (h2 * (h1 + h2)) * y[2:]
    )


def _interior(trace: FlowTrace, min_records: int = 3):
    if len(trace.records) < min_records or len(trace.states) != len(trace.records):
        raise FlowError(
            f"need at least {min_records} records with stored states, "
            f"got {len(trace.records)} records / {len(trace.states)} states"
        )
    return trace.column("t")


def _smooth_mask(t: np.ndarray, family: PlaneFamily) -> np.ndarray:
    """Interior records whose three-point stencil does not straddle a rate kink."""
    keep = np.ones(t.size - 2, dtype=bool)
    for b in family.breakpoints():
        keep &= ~((t[:-2] < b) & (b < t[2:]))
    return keep


def _relative(fd: np.ndarray, exact: np.ndarray, scale: np.ndarray) -> np.ndarray:
    return np.abs(fd - exact) / scale


def qlength_rate_terms(state: CurvatureState, family: PlaneFamily) -> tuple[float, float]:
    """``(int k^2 lambda, int (d log a/dt) lambda)`` at one state."""
    gauge = family.gauge(state.t, state.grid)
    lam = metric_factor(state.k, gauge)
    return float(integrate(state.k ** 2 * lam)), float(integrate(gauge.dlog_a_dt * lam))


def check_qlength_evolution(trace: FlowTrace, family: PlaneFamily, tol: float = 1e-5) -> CheckReport:
    """Compare the finite-difference rate of the dual length with its formula.

    Deviations are measured relative to ``int k^2 lambda + |int (log a)_t lambda|``,
    the size of the two competing terms.
    """
    t = _interior(trace)
    lq = trace.column("q_length")
    fd = fd_derivative(t, lq)
    terms = np.array([qlength_rate_terms(s, family) for s in trace.states[1:-1]])
    exact = -terms[:, 0] + terms[:, 1]
    dev = _relative(fd, exact, terms[:, 0] + np.abs(terms[:, 1]))[_smooth_mask(t, family)]
    worst = float(np.max(dev))
    return CheckReport("qlength_evolution", worst <= tol, worst, tol,
                       f"{dev.size} interior records")


def check_isoperimetric_evolution(trace: FlowTrace, family: PlaneFamily, tol: float = 1e-5) -> CheckReport:
    """Finite-difference rate of ``L_Q^2 / A`` against its closed-form rate."""
    t = _interior(trace)
    iso = trace.column("iso_ratio")
    fd = fd_derivative(t, iso)
    exact = np.empty_like(fd)
    scale = np.empty_like(fd)
    for i, (rec, st) in enumerate(zip(trace.records[1:-1], trace.states[1:-1])):
        ksq, drift = qlength_rate_terms(st, family)
        ball = family.ball_area(st.t, st.grid)
        ratio = rec.q_length / rec.area_curve
        exact[i] = -2.0 * ratio * (ksq - ball * ratio) + 2.0 * ratio * drift
        scale[i] = 2.0 * ratio * (ksq + ball * ratio + abs(drift))
    dev = _relative(fd, exact, scale)[_smooth_mask(t, family)]
    worst = float(np.max(dev))
    return CheckReport("isoperimetric_evolution", worst <= tol, worst, tol,
                       f"{dev.size} interior records")


def check_entropy_identity(trace: FlowTrace, tol: float = 1e-3) -> CheckReport:
    """d/dt of the entropy against ``int (a0 k)^2 - ((a0 k)')^2``.

    Deviations are relative to ``sq_fun + grad_fun`` because the identity's
    right side changes sign on anisotropic runs.
    """
    t = _interior(trace)
    fd = fd_derivative(t, trace.column("entropy"))
    sq = trace.column("sq_fun")[1:-1]
    grad = trace.column("grad_fun")[1:-1]
    dev = _relative(fd, sq - grad, sq + grad)
    worst = float(np.max(dev))
    return CheckReport("entropy_identity", worst <= tol, worst, tol,
                       f"{dev.size} interior records")


def check_area_law(trace: FlowTrace, tol: float = 1e-6, area_frac: float = 0.0) -> CheckReport:
    """``|A_curve - A_analytic| <= tol * A(0)`` at records with ``A > area_frac * A(0)``."""
    a_c = trace.column("area_curve")
    a_a = trace.column("area_analytic")
    mask = a_c >= area_frac * trace.area0
    dev = np.abs(a_c - a_a)[mask] / trace.area0
    worst = float(np.max(dev)) if dev.size else 0.0
    return CheckReport("area_law", worst <= tol, worst, tol, f"{dev.size} records")


def check_closing(trace: FlowTrace, family: PlaneFamily, tol: float = CLOSING_TOL) -> CheckReport:
    worst = 0.0
    for rec, st in zip(trace.records, trace.states):
        scale = closing_scale(st.k, family.gauge(st.t, st.grid))
        worst = max(worst, rec.closing_res / scale)
    return CheckReport("closing_conditions", worst <= tol, worst, tol,
                       f"{len(trace.states)} records")


def check_positivity_floor(trace: FlowTrace, tol: float = 1e-8) -> CheckReport:
    kmin = trace.column("k_min")
    drop = float(max(0.0, kmin[0] - np.min(kmin)))
    return CheckReport("positivity_floor", drop <= tol, drop, tol, f"min k(0) = {kmin[0]:.6g}")


def check_median_bound(trace: FlowTrace, c0: float | None = None) -> CheckReport:
    """``k* <= C L_Q / A`` at every record; ``c0`` fixes ``C`` at its initial value."""
    k_star = trace.column("k_star")
    if c0 is None:
        bound = trace.column("c_bound")
    else:
        bound = c0 * trace.column("q_length") / trace.column("area_curve")
    excess = k_star / bound - 1.0
    worst = float(np.max(excess))
    return CheckReport("median_bound", worst <= 0.0, worst, 0.0,
                       "max of k*/(C L_Q/A) - 1")

