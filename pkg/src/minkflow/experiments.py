"""Initial data, homothetic studies and the uniform blow-up time experiment."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .flow import (
    CLOSING_TOL,
    CheckReport,
    CurvatureState,
    FlowTrace,
    SolverConfig,
    check_entropy_identity,
    check_median_bound,
    closing_residual,
    closing_scale,
    enclosed_area,
    evolve,
)
from .gauge import (
    FSpec,
    Gauge,
    GaugeProfile,
    Homothetic,
    PlaneFamily,
    ball_area,
    median_bound_constant,
)
from .spectral import AngleGrid, integrate

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class FromSupport:
    """Seed curve given by its Euclidean support function.

    ``h(theta) = h0 + sum_m c_m cos(m theta) + s_m sin(m theta)``, any ``m >= 1``.
    """

    h0: float
    harmonics: Mapping[int, tuple[float, float]] = field(default_factory=dict)

    def evaluate(self, theta: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        h = np.full_like(theta, self.h0, dtype=float)
        ddh = np.zeros_like(h)
        for m, (c, s) in self.harmonics.items():
            m = int(m)
            if m < 1:
                raise ValueError(f"support harmonic index must be >= 1, got {m}")
            wave = c * np.cos(m * theta) + s * np.sin(m * theta)
            h = h + wave
            ddh = ddh - m * m * wave
        return h, ddh

    def build(self, gauge: Gauge) -> CurvatureState:
        return make_initial_from_support(self, gauge)


@dataclass(frozen=True)
class ExplicitK:
    """Curvature samples given directly on the grid."""

    samples: Sequence[float]

    def build(self, gauge: Gauge) -> CurvatureState:
        return CurvatureState(gauge.grid, np.array(self.samples, dtype=float), gauge.t)


def make_initial_from_support(h: FromSupport, gauge: Gauge) -> CurvatureState:
    """Curvature ``(a + a'') / (h + h'')`` of the convex curve with support ``h``.

    The closing conditions hold automatically since ``(a+a'')/k = h + h''``
    and ``int (h + h'') e^{i theta} = 0``.
    """
    hv, ddh = h.evaluate(gauge.grid.theta)
    radius = hv + ddh
    if np.min(radius) <= 0.0:
        raise ValueError(
            f"support function is not strictly convex: min(h + h'') = {np.min(radius):.6g}"
        )
    return CurvatureState(gauge.grid, gauge.conv / radius, gauge.t)


def extinction_bound(area0: float, ball: float) -> float:
    """Uniform upper bound ``A / (2 B)`` for the terminal time."""
    if not (area0 > 0.0 and ball > 0.0):
        raise ValueError(f"areas must be positive, got A={area0}, B={ball}")
    return area0 / (2.0 * ball)


@dataclass(frozen=True)
class BlowupRow:
    f_desc: str
    t_terminal: float
    reason: str
    bound_T: float
    slack: float
    dt_last: float
    extinction_time: float
    k_max: float
    grad_fun: float

    @property
    def within_bound(self) -> bool:
        return self.slack >= -2.0 * self.dt_last


@dataclass
class BlowupReport:
    area0: float
    ball: float
    rows: list[BlowupRow] = field(default_factory=list)
    traces: list[FlowTrace] = field(default_factory=list, repr=False)

    @property
    def bound(self) -> float:
        return extinction_bound(self.area0, self.ball)

    @property
    def loose_bound(self) -> float:
        """``A(0) / A(P_0)``, the cruder estimate without the factor two."""
        return self.area0 / self.ball

    @property
    def ok(self) -> bool:
        return all(row.within_bound and row.reason != "invariant_violation" for row in self.rows)


def blowup_study(a0: GaugeProfile, u0, fs: Sequence[FSpec], config: SolverConfig,
                 strict: bool = True) -> BlowupReport:
    """Evolve ``u0`` under every homothetic family in ``fs`` and compare to ``A/(2B)``.

    ``u0`` is a :class:`FromSupport`, an :class:`ExplicitK` or a ready
    :class:`CurvatureState`. With ``strict`` a run ending in an invariant
    violation, or overshooting the bound by more than two steps, raises
    ``RuntimeError``; otherwise the row is kept and ``report.ok`` is false.
    """
    grid = AngleGrid(config.n)
    gauge0 = Homothetic(a0).gauge(0.0, grid)
    initial = u0 if isinstance(u0, CurvatureState) else u0.build(gauge0)
    area0 = enclosed_area(initial.k, gauge0)
    ball = ball_area(gauge0)
    bound = extinction_bound(area0, ball)
    report = BlowupReport(area0, ball)
    for fspec in fs:
        trace = evolve(initial, Homothetic(a0, fspec), config)
        last = trace.records[-1]
        row = BlowupRow(
            f_desc=fspec.describe(),
            t_terminal=trace.t_last,
            reason=trace.reason,
            bound_T=bound,
            slack=bound - trace.t_last,
            dt_last=trace.dt_last,
            extinction_time=trace.extinction_time,
            k_max=last.k_max,
            grad_fun=last.grad_fun,
        )
        log.info("%s: t=%.12g (%s), bound %.12g", row.f_desc, row.t_terminal, row.reason, bound)
        report.rows.append(row)
        report.traces.append(trace)
        if not strict:
            continue
        if trace.reason == "invariant_violation":
            raise RuntimeError(f"run with f={row.f_desc} violated an invariant: {trace.message}")
        if not row.within_bound:
            raise RuntimeError(
                f"run with f={row.f_desc} ended at t={row.t_terminal:.12g}, "
                f"past the bound {bound:.12g}"
            )
    return report


def gronwall_check(trace: FlowTrace, M: float, family: PlaneFamily | None = None,
                   rel: float = 1e-6) -> CheckReport:
    """``L_Q(t) <= exp(M t) L_Q(0) (1 + rel)`` at every record.

    When ``family`` is given, ``M`` is first checked against the largest
    ``d log a / dt`` the family attains over the run.
    """
    t = trace.column("t")
    if family is not None:
        grid = trace.states[0].grid if trace.states else AngleGrid(256)
        observed = family.sup_log_rate(float(t[0]), float(t[-1]), grid)
        if M < observed - 1e-15:
            raise ValueError(f"M = {M} is below sup d(log a)/dt = {observed} over the run")
    lq = trace.column("q_length")
    bound = np.exp(M * (t - t[0])) * lq[0]
    excess = lq / bound - 1.0
    worst = float(np.max(excess))
    return CheckReport("gronwall", worst <= rel, worst, rel, f"M={M:g}")


@dataclass
class EntropyReport:
    identity: CheckReport
    lower_bound: CheckReport
    empirical_N: float
    checks: list[CheckReport] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)


def entropy_and_bounds_check(trace: FlowTrace, a0: GaugeProfile, fspec: FSpec,
                             tol: float = 1e-3) -> EntropyReport:
    """Entropy rate identity, its lower bound, and the empirical gradient constant.

    The lower bound compares ``int a0 (a0+a0'') log k`` to
    ``log(min k(0)) * int a0 (a0+a0'')``. ``empirical_N`` is
    ``max(0, sup_t grad_fun - sq_fun)``.
    """
    if not trace.records:
        raise ValueError("trace has no records")
    grid = trace.states[0].grid if trace.states else AngleGrid(256)
    a, _, dda = a0.samples(grid)
    weight = float(integrate(a * (a + dda)))
    identity = check_entropy_identity(trace, tol)

    t = trace.column("t")
    f = np.array([fspec.value(s) for s in t])
    # stored entropy is taken with k/f; shift back to log k
    log_k = trace.column("entropy") + np.log(f) * weight
    floor = math.log(trace.records[0].k_min) * weight
    deficit = float(np.max(floor - log_k))
    lower = CheckReport("entropy_lower_bound", deficit <= 1e-10 * max(1.0, abs(floor)),
                        deficit, 1e-10 * max(1.0, abs(floor)), f"floor={floor:.6g}")

    gap = trace.column("grad_fun") - trace.column("sq_fun")
    n_emp = float(max(0.0, np.max(gap)))
    finite = CheckReport("gradient_constant", bool(np.all(np.isfinite(gap))), n_emp,
                         math.inf, "empirical N = sup(grad_fun - sq_fun)")
    return EntropyReport(identity, lower, n_emp, [identity, lower, finite])


def median_bound_check(trace: FlowTrace, family: PlaneFamily, rel: float = 1e-12) -> list[CheckReport]:
    """``k* <= C(0) L_Q / A`` at every record, plus ``C(0) == C(t_end)`` for homothetic families."""
    grid = trace.states[0].grid if trace.states else AngleGrid(256)
    c0 = median_bound_constant(family.gauge(trace.records[0].t, grid))
    reports = [check_median_bound(trace, c0)]
    if isinstance(family, Homothetic):
        c1 = median_bound_constant(family.gauge(trace.records[-1].t, grid))
        drift = abs(c1 - c0) / c0
        reports.append(CheckReport("median_constant_time_independent", drift <= rel, drift, rel,
                                   f"C(0)={c0:.12g}"))
    return reports


def closing_report(state: CurvatureState, gauge: Gauge) -> CheckReport:
    res = closing_residual(state.k, gauge)
    scale = closing_scale(state.k, gauge)
    worst = math.hypot(*res) / scale
    return CheckReport("initial_closing", worst <= CLOSING_TOL, worst, CLOSING_TOL)
