"""Run configuration files.

Grammar: ``[section]`` headers followed by ``key = value`` lines; ``#``
starts a comment; lists are comma-separated. Sections and keys::

    [profile]   c0, c<m>, s<m>          (m even, >= 2)
    [family]    f = constant|linear|exponential, c, fs = <tag>[:c], ...
    [initial]   kind = support|explicit; h0, hc<m>, hs<m> | k = v0, v1, ...
    [solver]    n, cfl, stop_area_frac, stop_kmax, t_max
    [outputs]   dir, snapshot_times, record_every

Unknown sections or keys are rejected.
"""

from __future__ import annotations

import dataclasses
import math
import re
from dataclasses import dataclass, field

import numpy as np

from .experiments import ExplicitK, FromSupport
from .flow import CurvatureState, SolverConfig
from .gauge import FSpec, GaugeError, GaugeProfile, Homothetic
from .spectral import AngleGrid


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


SECTIONS = ("profile", "family", "initial", "solver", "outputs")
_SCALAR_KEYS = {
    "family": {"f", "c", "fs"},
    "initial": {"kind", "k"},
    "solver": {"n", "cfl", "stop_area_frac", "stop_kmax", "t_max"},
    "outputs": {"dir", "snapshot_times", "record_every"},
}
_HARMONIC = re.compile(r"^([cs])(\d+)$")
_SUPPORT = re.compile(r"^h([cs])(\d+)$")


@dataclass
class RunConfig:
    profile: GaugeProfile
    fspec: FSpec
    initial: FromSupport | ExplicitK
    solver: SolverConfig
    fs: tuple[FSpec, ...] = ()
    out_dir: str | None = None

    def __post_init__(self):
        self.validate()

    @property
    def grid(self) -> AngleGrid:
        return AngleGrid(self.solver.n)

    def family(self, fspec: FSpec | None = None) -> Homothetic:
        return Homothetic(self.profile, fspec or self.fspec)

    def initial_state(self) -> CurvatureState:
        return self.initial.build(self.family().gauge(0.0, self.grid))

    def validate(self) -> None:
        try:
            self.profile.check(self.grid)
            state = self.initial_state()
        except (GaugeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc
        if not np.all(np.isfinite(state.k)) or np.min(state.k) <= 0.0:
            raise ConfigError("initial curvature must be finite and strictly positive")

    def with_overrides(self, **overrides) -> "RunConfig":
        changes = {k: v for k, v in overrides.items() if v is not None}
        if not changes:
            return self
        try:
            solver = dataclasses.replace(self.solver, **changes)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        return dataclasses.replace(self, solver=solver)


def _number(text: str, line: int) -> float:
    try:
        value = float(text)
    except ValueError:
        raise ConfigError(f"expected a number, got {text!r}", line) from None
    if math.isnan(value):
        raise ConfigError("NaN is not allowed", line)
    return value


def _integer(text: str, line: int) -> int:
    value = _number(text, line)
    if not value.is_integer():
        raise ConfigError(f"expected an integer, got {text!r}", line)
    return int(value)


def _numbers(text: str, line: int) -> list[float]:
    items = [s.strip() for s in text.split(",")]
    if items == [""]:
        return []
    return [_number(s, line) for s in items]


def parse_fspec(text: str, line: int | None = None) -> FSpec:
    """``constant``, ``linear[:c]`` or ``exponential[:c]`` (``exp`` accepted); ``c`` defaults to 1."""
    tag, _, rate = text.strip().partition(":")
    tag = {"const": "constant", "exp": "exponential"}.get(tag.strip(), tag.strip())
    if tag not in FSpec.KINDS:
        raise ConfigError(f"unknown family tag {tag!r}", line)
    c = 0.0 if tag == "constant" else (_number(rate, line) if rate else 1.0)
    try:
        return FSpec(tag, c)
    except ValueError as exc:
        raise ConfigError(str(exc), line) from exc


def _tokenize(text: str) -> dict[str, dict[str, tuple[str, int]]]:
    sections: dict[str, dict[str, tuple[str, int]]] = {}
    current = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigError(f"malformed section header {line!r}", lineno)
            current = line[1:-1].strip()
            if current not in SECTIONS:
                raise ConfigError(f"unknown section [{current}]", lineno)
            if current in sections:
                raise ConfigError(f"duplicate section [{current}]", lineno)
            sections[current] = {}
            continue
        if current is None:
            raise ConfigError("key outside of any section", lineno)
        key, eq, value = line.partition("=")
        key = key.strip()
        if not eq or not key:
            raise ConfigError(f"expected 'key = value', got {line!r}", lineno)
        if key in sections[current]:
            raise ConfigError(f"duplicate key {key!r}", lineno)
        sections[current][key] = (value.strip(), lineno)
    return sections


def _profile(entries: dict[str, tuple[str, int]]) -> GaugeProfile:
    c0 = 1.0
    harmonics: dict[int, list[float]] = {}
    for key, (value, line) in entries.items():
        if key == "c0":
            c0 = _number(value, line)
            continue
        match = _HARMONIC.match(key)
        if not match:
            raise ConfigError(f"unknown profile key {key!r}", line)
        m = int(match.group(2))
        if m == 0 or m % 2:
            raise ConfigError(
                f"profile key {key!r}: only even harmonics keep the unit ball pi-periodic", line
            )
        pair = harmonics.setdefault(m, [0.0, 0.0])
        pair[0 if match.group(1) == "c" else 1] = _number(value, line)
    return GaugeProfile(c0, {m: tuple(v) for m, v in harmonics.items()})


def _initial(entries: dict[str, tuple[str, int]]) -> FromSupport | ExplicitK:
    kind, line = entries.get("kind", ("support", None))
    if kind == "explicit":
        extra = set(entries) - {"kind", "k"}
        if extra:
            raise ConfigError(f"unexpected keys for explicit initial data: {sorted(extra)}")
        if "k" not in entries:
            raise ConfigError("explicit initial data need 'k = ...'", line)
        value, kline = entries["k"]
        return ExplicitK(tuple(_numbers(value, kline)))
    if kind != "support":
        raise ConfigError(f"initial kind must be 'support' or 'explicit', got {kind!r}", line)
    h0 = 1.0
    harmonics: dict[int, list[float]] = {}
    for key, (value, kline) in entries.items():
        if key == "kind":
            continue
        if key == "h0":
            h0 = _number(value, kline)
            continue
        match = _SUPPORT.match(key)
        if not match or int(match.group(2)) < 1:
            raise ConfigError(f"unknown initial key {key!r}", kline)
        pair = harmonics.setdefault(int(match.group(2)), [0.0, 0.0])
        pair[0 if match.group(1) == "c" else 1] = _number(value, kline)
    return FromSupport(h0, {m: tuple(v) for m, v in sorted(harmonics.items())})


def parse_config(text: str) -> RunConfig:
    """Parse and validate a run configuration."""
    sections = _tokenize(text)
    for name in ("family", "initial", "solver", "outputs"):
        for key, (_, line) in sections.get(name, {}).items():
            if name == "initial" and (key == "h0" or _SUPPORT.match(key)):
                continue
            if key not in _SCALAR_KEYS[name]:
                raise ConfigError(f"unknown key {key!r} in [{name}]", line)

    profile = _profile(sections.get("profile", {}))

    fam = sections.get("family", {})
    tag, tline = fam.get("f", ("constant", None))
    if "c" in fam:
        c_text, cline = fam["c"]
        fspec = parse_fspec(f"{tag}:{c_text}" if tag.strip() not in ("constant", "const") else tag, cline)
    else:
        fspec = parse_fspec(tag, tline)
    fs: tuple[FSpec, ...] = ()
    if "fs" in fam:
        value, fline = fam["fs"]
        fs = tuple(parse_fspec(item, fline) for item in value.split(",") if item.strip())

    initial = _initial(sections.get("initial", {}))

    solver_kw: dict = {}
    for key, (value, line) in sections.get("solver", {}).items():
        solver_kw[key] = _integer(value, line) if key == "n" else _number(value, line)
    out = sections.get("outputs", {})
    if "record_every" in out:
        value, line = out["record_every"]
        solver_kw["record_every"] = _integer(value, line)
    if "snapshot_times" in out:
        value, line = out["snapshot_times"]
        solver_kw["snapshot_times"] = tuple(_numbers(value, line))
    try:
        solver = SolverConfig(**solver_kw)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    if isinstance(initial, ExplicitK) and len(initial.samples) != solver.n:
        line = sections["initial"]["k"][1]
        raise ConfigError(f"explicit k has {len(initial.samples)} samples, grid has n={solver.n}", line)

    out_dir = out["dir"][0] if "dir" in out else None
    return RunConfig(profile, fspec, initial, solver, fs, out_dir)


def load_config(path) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())
