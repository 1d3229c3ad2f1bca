"""Command line drivers: ``minkflow run | blowup-study | verify``.

Exit codes: 0 success, 1 usage/IO/configuration error or failed check,
2 invariant violation (including inadmissible initial data).
"""

from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
from pathlib import Path

from .config import ConfigError, RunConfig, load_config
from .experiments import (
    blowup_study,
    entropy_and_bounds_check,
    gronwall_check,
    median_bound_check,
)
from .flow import (
    RECORD_COLUMNS,
    FlowTrace,
    InvariantViolation,
    check_area_law,
    check_closing,
    check_isoperimetric_evolution,
    check_positivity_floor,
    check_qlength_evolution,
    evolve,
)

log = logging.getLogger("minkflow")

TRACE_COLUMNS = RECORD_COLUMNS
SNAPSHOT_COLUMNS = ("theta", "k", "F_x", "F_y", "lambda")
REPORT_COLUMNS = ("f_desc", "t_terminal", "reason", "bound_T", "slack")

EXIT_OK, EXIT_ERROR, EXIT_INVARIANT = 0, 1, 2

# verification tolerances for cmd_verify
QLENGTH_TOL = 1e-5
ISO_TOL = 1e-5
ENTROPY_TOL = 1e-3
AREA_TOL = 1e-6


def fmt(x) -> str:
    """Round-trip exact float text (17 significant digits)."""
    return format(float(x), ".17g")


def write_trace(trace: FlowTrace, path: Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(TRACE_COLUMNS)
        for rec in trace.records:
            writer.writerow([fmt(getattr(rec, name)) for name in TRACE_COLUMNS])


def snapshot_name(t: float) -> str:
    return f"snapshot_{float(t)!r}.csv"


def write_snapshots(trace: FlowTrace, out: Path) -> list[Path]:
    paths = []
    for snap in trace.snapshots:
        path = out / snapshot_name(snap.t)
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(SNAPSHOT_COLUMNS)
            for row in zip(snap.grid.theta, snap.k, snap.points[:, 0], snap.points[:, 1], snap.lam):
                writer.writerow([fmt(v) for v in row])
        paths.append(path)
    return paths


def write_blowup_report(report, path: Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(REPORT_COLUMNS)
        for row in report.rows:
            writer.writerow([row.f_desc, fmt(row.t_terminal), row.reason, fmt(row.bound_T), fmt(row.slack)])


def _run_flow(config: RunConfig, fspec=None) -> FlowTrace:
    family = config.family(fspec)
    return evolve(config.initial_state(), family, config.solver)


def cmd_run(config: RunConfig, out: Path) -> int:
    try:
        trace = _run_flow(config)
    except InvariantViolation as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    out.mkdir(parents=True, exist_ok=True)
    write_trace(trace, out / "trace.csv")
    write_snapshots(trace, out)
    print(
        f"{trace.reason}: t={fmt(trace.t_last)} after {trace.steps} steps, "
        f"{len(trace.records)} records, extinction estimate {fmt(trace.extinction_time)}"
    )
    if trace.reason == "invariant_violation":
        print(f"error: {trace.message}", file=sys.stderr)
        return EXIT_INVARIANT
    return EXIT_OK


def cmd_blowup_study(config: RunConfig, out: Path) -> int:
    if not config.fs:
        print("error: blowup-study needs a non-empty 'fs' list in [family]", file=sys.stderr)
        return EXIT_ERROR
    try:
        report = blowup_study(config.profile, config.initial, config.fs, config.solver, strict=False)
    except InvariantViolation as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    out.mkdir(parents=True, exist_ok=True)
    write_blowup_report(report, out / "blowup_report.csv")
    print(f"A={fmt(report.area0)} B={fmt(report.ball)} T=A/(2B)={fmt(report.bound)} "
          f"A/B={fmt(report.loose_bound)}")
    for row in report.rows:
        print(f"{row.f_desc}: t={fmt(row.t_terminal)} ({row.reason}) slack={fmt(row.slack)} "
              f"extinction estimate {fmt(row.extinction_time)}")
    return EXIT_OK if report.ok else EXIT_ERROR


def verify_checks(config: RunConfig, trace: FlowTrace) -> list:
    family = config.family()
    fspec = config.fspec
    t_end = trace.records[-1].t
    checks = [
        gronwall_check(trace, fspec.sup_log_rate(0.0, t_end), family),
        check_qlength_evolution(trace, family, QLENGTH_TOL),
        check_isoperimetric_evolution(trace, family, ISO_TOL),
    ]
    checks.extend(entropy_and_bounds_check(trace, config.profile, fspec, ENTROPY_TOL).checks)
    checks.extend(median_bound_check(trace, family))
    checks.append(check_area_law(trace, AREA_TOL))
    checks.append(check_closing(trace, family))
    if family.conv_nondecreasing():
        checks.append(check_positivity_floor(trace))
    return checks


def cmd_verify(config: RunConfig, out: Path) -> int:
    try:
        trace = _run_flow(config)
    except InvariantViolation as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    lines = [f"termination: {trace.reason} at t={fmt(trace.t_last)}"]
    ok = trace.reason != "invariant_violation"
    if not ok:
        lines.append(f"FAIL run: {trace.message}")
    if len(trace.records) >= 3:
        for check in verify_checks(config, trace):
            lines.append(check.line())
            ok = ok and check.passed
    else:
        lines.append(f"FAIL records: only {len(trace.records)} records, need 3")
        ok = False
    out.mkdir(parents=True, exist_ok=True)
    text = "\n".join(lines) + "\n"
    (out / "verify.txt").write_text(text, encoding="utf-8")
    print(text, end="")
    if trace.reason == "invariant_violation":
        return EXIT_INVARIANT
    return EXIT_OK if ok else EXIT_ERROR


COMMANDS = {"run": cmd_run, "blowup-study": cmd_blowup_study, "verify": cmd_verify}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="minkflow", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, type=Path)
        p.add_argument("--out", type=Path, default=None,
                       help="output directory (default: $MINKFLOW_OUT, then [outputs] dir, then ./out)")
        p.add_argument("--n", type=int)
        p.add_argument("--cfl", type=float)
        p.add_argument("--stop-area-frac", type=float)
        p.add_argument("--stop-kmax", type=float)
    return parser


def resolve_out(arg: Path | None, config: RunConfig) -> Path:
    if arg is not None:
        return arg
    env = os.environ.get("MINKFLOW_OUT")
    if env:
        return Path(env)
    return Path(config.out_dir or "out")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = load_config(args.config).with_overrides(
            n=args.n, cfl=args.cfl, stop_area_frac=args.stop_area_frac, stop_kmax=args.stop_kmax
        )
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    try:
        return COMMANDS[args.command](config, resolve_out(args.out, config))
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
