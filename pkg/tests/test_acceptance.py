"""Acceptance suite: exact special solutions, identities and bounds at n = 256.

Run with ``pytest -s tests/test_acceptance.py`` to see one PASS/FAIL line per
criterion.
"""

import math

import numpy as np
import pytest

from minkflow import (
    AngleGrid,
    CurvatureState,
    FromSupport,
    FSpec,
    GaugeProfile,
    Homothetic,
    SolverConfig,
    Static,
    blowup_study,
    dual_boundary,
    entropy_and_bounds_check,
    evolve,
    gronwall_check,
    make_initial_from_support,
    median_bound_check,
    median_curvature,
    step,
    wedge,
)
from minkflow.cli import main
from minkflow.flow import (
    check_area_law,
    check_closing,
    check_positivity_floor,
)
from minkflow.spectral import derivative

from .conftest import random_profile
from .test_gauge import brute_force_median

N = 256
EXP_T = math.log(2) / 2
ANISO = GaugeProfile(1.0, {2: (0.3, 0.0)})


def verdict(criterion, passed, detail):
    print(f"\n[{'PASS' if passed else 'FAIL'}] criterion {criterion}: {detail}", flush=True)
    assert passed, detail


# -- shared runs ----------------------------------------------------------

@pytest.fixture(scope="session")
def study():
    """Circle under f = 1, 1 + t, e^t; also the runs of criteria 1 and 2."""
    fs = [FSpec("constant"), FSpec("linear", 1.0), FSpec("exponential", 1.0)]
    return blowup_study(GaugeProfile(1.0), FromSupport(1.0), fs, SolverConfig(n=N))


@pytest.fixture(scope="session")
def circle(study):
    return study.traces[0], Static(GaugeProfile(1.0))


@pytest.fixture(scope="session")
def exp_circle(study):
    return study.traces[2], Homothetic(GaugeProfile(1.0), FSpec("exponential", 1.0))


@pytest.fixture(scope="session")
def aniso_runs():
    grid = AngleGrid(N)
    runs = []
    for fspec in (FSpec("constant"), FSpec("linear", 1.0)):
        fam = Homothetic(ANISO, fspec)
        state = make_initial_from_support(FromSupport(1.0), fam.gauge(0.0, grid))
        runs.append((evolve(state, fam, SolverConfig(n=N, stop_area_frac=0.1)), fam))
    return runs


@pytest.fixture(scope="session")
def all_runs(study, aniso_runs):
    circle_fams = [Homothetic(GaugeProfile(1.0), FSpec(*spec))
                   for spec in (("constant",), ("linear", 1.0), ("exponential", 1.0))]
    return list(zip(study.traces, circle_fams)) + aniso_runs


# -- criteria -------------------------------------------------------------

def test_01_circle_exactness(circle):
    trace, _ = circle
    worst = 0.0
    for state in trace.states:
        if state.t <= 0.45:
            exact = 1 / math.sqrt(1 - 2 * state.t)
            worst = max(worst, float(np.max(np.abs(state.k - exact))) / exact)
    gap = abs(trace.extinction_time - 0.5)
    ok = worst <= 1e-5 and gap <= 2 * trace.dt_last and trace.t_last <= 0.5
    verdict(1, ok, f"max rel err {worst:.3g} (t<=0.45); |T_est - 0.5| = {gap:.3g} "
                   f"vs 2 dt_last = {2 * trace.dt_last:.3g}; t_last = {trace.t_last:.12g}")


def test_02_exponential_circle(exp_circle):
    trace, _ = exp_circle
    worst = 0.0
    for state in trace.states:
        if state.t <= 0.9 * EXP_T:
            exact = math.exp(state.t) / math.sqrt(2 - math.exp(2 * state.t))
            worst = max(worst, float(np.max(np.abs(state.k - exact))) / exact)
    gap = abs(trace.extinction_time - EXP_T)
    ok = worst <= 1e-4 and gap <= 2 * trace.dt_last and trace.t_last <= 0.5
    verdict(2, ok, f"max rel err {worst:.3g} (t<=0.9 ln2/2); |T_est - ln2/2| = {gap:.3g} "
                   f"vs 2 dt_last = {2 * trace.dt_last:.3g}; t_last = {trace.t_last:.12g} <= 0.5")


def test_03_area_law(aniso_runs):
    reports = [check_area_law(trace, 1e-6) for trace, _ in aniso_runs]
    reasons = [trace.reason for trace, _ in aniso_runs]
    ok = all(r.passed for r in reports) and reasons == ["area_floor"] * 2
    verdict(3, ok, "; ".join(f"f={fam.fspec.describe()}: {r.worst:.3g}"
                             for r, (_, fam) in zip(reports, aniso_runs)) + " (tol 1e-6 A0)")


def test_04_closing(circle, exp_circle, aniso_runs):
    runs = [circle, exp_circle] + aniso_runs
    reports = [check_closing(trace, fam) for trace, fam in runs]
    worst = max(r.worst for r in reports)
    verdict(4, all(r.passed for r in reports), f"worst scaled residual {worst:.3g} (tol 1e-8)")


def test_05_gronwall(exp_circle):
    trace, fam = exp_circle
    report = gronwall_check(trace, 1.0, fam, rel=1e-6)
    verdict(5, report.passed, f"max L_Q / (e^t L_Q(0)) - 1 = {report.worst:.3g} (tol 1e-6)")


def test_06_entropy_identity(exp_circle, aniso_runs):
    runs = [(exp_circle[0], GaugeProfile(1.0), FSpec("exponential", 1.0))]
    runs += [(trace, ANISO, fam.fspec) for trace, fam in aniso_runs]
    reports = [entropy_and_bounds_check(trace, a0, fs, tol=1e-3) for trace, a0, fs in runs]
    worst = max(r.identity.worst for r in reports)
    ok = all(r.identity.passed and r.lower_bound.passed for r in reports)
    verdict(6, ok, f"worst relative FD mismatch {worst:.3g} (tol 1e-3); lower bound holds")


def test_07_median_bound(all_runs):
    lines = []
    ok = True
    for trace, fam in all_runs:
        reports = median_bound_check(trace, fam, rel=1e-12)
        ok = ok and len(reports) == 2 and all(r.passed for r in reports)
        lines.append(f"{reports[0].worst:.3g}/{reports[1].worst:.1g}")
    verdict(7, ok, "max(k*/(C L_Q/A)) - 1 / C drift per run: " + ", ".join(lines))


def test_08_blowup_study(study, tmp_path):
    rows = study.rows
    ok = study.bound == pytest.approx(0.5, rel=1e-12)
    ok = ok and all(r.t_terminal <= 0.5 + 2 * r.dt_last for r in rows)
    ok = ok and all(r.reason in ("area_floor", "k_blowup") for r in rows)
    cfg = tmp_path / "study.cfg"
    cfg.write_text("[profile]\nc0 = 1\n[family]\nfs = constant, linear:1, exponential:1\n"
                   "[initial]\nh0 = 1\n")
    code = main(["blowup-study", "--config", str(cfg), "--out", str(tmp_path)])
    report = tmp_path / "blowup_report.csv"
    written = report.exists() and len(report.read_text().splitlines()) == 4
    ok = ok and code == 0 and written
    verdict(8, ok, ", ".join(f"{r.f_desc}: {r.t_terminal:.6f}" for r in rows)
            + f" <= 0.5 + 2 dt_last; report written={written}; exit {code}")


def test_09_positivity_floor(all_runs):
    reports = [check_positivity_floor(trace) for trace, fam in all_runs if fam.conv_nondecreasing()]
    worst = max(r.worst for r in reports)
    verdict(9, len(reports) == 5 and all(r.passed for r in reports),
            f"{len(reports)} runs, worst drop below min k(0): {worst:.3g} (tol 1e-8)")


def test_10a_median_brute_force():
    rng = np.random.default_rng(100)
    mismatches = 0
    for i in range(100):
        n = int(rng.integers(4, 65)) * 2
        # integer samples force ties; continuous samples exercise the generic case
        k = rng.integers(1, 6, n).astype(float) if i % 2 else rng.uniform(0.1, 10.0, n)
        mismatches += median_curvature(k) != brute_force_median(k)
    verdict("10a", mismatches == 0, f"{mismatches} mismatches on 100 random grids")


def test_10b_duality_round_trip():
    rng = np.random.default_rng(20)
    grid = AngleGrid(N)
    worst = 0.0
    for _ in range(20):
        g = Static(random_profile(rng)).gauge(0.0, grid)
        q = dual_boundary(g)
        dq = derivative(q.T).T
        p_back = -dq / wedge(q, dq)[:, None]
        p = g.a[:, None] * np.stack([np.cos(grid.theta), np.sin(grid.theta)], axis=1) \
            + g.da[:, None] * np.stack([-np.sin(grid.theta), np.cos(grid.theta)], axis=1)
        worst = max(worst, float(np.max(np.abs(p_back - p))))
    verdict("10b", worst <= 1e-10, f"max |p - (-q'/[q,q'])| = {worst:.3g} on 20 profiles (tol 1e-10)")


def test_10c_rk4_order_in_dt():
    grid = AngleGrid(16)
    fam = Static(GaugeProfile(1.0))
    T = 0.4

    def error(dt):
        state = CurvatureState(grid, np.ones(16))
        for _ in range(round(T / dt)):
            state = step(state, fam, dt)
        return abs(state.k[0] - 1 / math.sqrt(1 - 2 * T))

    errs = [error(dt) for dt in (0.01, 0.005, 0.0025)]
    orders = [math.log2(a / b) for a, b in zip(errs, errs[1:])]
    ok = all(abs(p - 4) <= 0.25 for p in orders)
    verdict("10c", ok, "observed orders " + ", ".join(f"{p:.3f}" for p in orders) + " (expect 4)")


def test_10d_spectral_convergence_in_n():
    """Non-circular Euclidean run, h = 1 + 0.25 cos 2theta, shared fixed dt."""
    fam = Static(GaugeProfile(1.0))
    seed = FromSupport(1.0, {2: (0.25, 0.0)})
    T, dt = 0.01, 2e-6

    def run(n):
        grid = AngleGrid(n)
        state = make_initial_from_support(seed, fam.gauge(0.0, grid))
        for _ in range(round(T / dt)):
            state = step(state, fam, dt)
        return state.k

    ref = run(512)
    errs = {n: float(np.max(np.abs(run(n) - ref[:: 512 // n]))) for n in (64, 128, 256)}
    drop = errs[64] / max(errs[256], np.finfo(float).tiny)
    verdict("10d", drop >= 1e3, "max |k_n - k_512|: " + ", ".join(
        f"n={n}: {e:.3g}" for n, e in errs.items()) + f"; drop 64->256 = {drop:.3g}")
