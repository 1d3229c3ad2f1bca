"""Unit balls of Minkowski planes given by radial profiles.

A centrally symmetric, strictly convex unit ball is described by a
pi-periodic profile ``a(theta)``; its boundary is

    p(theta) = a e_r + a' e_theta,   p'(theta) = (a + a'') e_theta,

and the dual ball boundary is ``q = p' / [p, p'] = e_theta / a``.
Families of such balls indexed by time are described by
:class:`PlaneFamily` subclasses.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Mapping, Sequence

import numpy as np

from .spectral import AngleGrid, integrate

CONVEXITY_EPS = 1e-8


class GaugeError(ValueError):
    """Raised when a profile does not describe a valid unit ball."""


def wedge(x, y):
    """Planar determinant ``[x, y] = x1*y2 - x2*y1``; broadcasts over rows."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return x[..., 0] * y[..., 1] - x[..., 1] * y[..., 0]


def e_r(theta):
    return np.stack([np.cos(theta), np.sin(theta)], axis=-1)


def e_theta(theta):
    return np.stack([-np.sin(theta), np.cos(theta)], axis=-1)


@dataclass(frozen=True)
class GaugeProfile:
    """Radial profile ``a0(theta) = c0 + sum_m c_m cos(m theta) + s_m sin(m theta)``.

    Only even ``m`` are accepted, which makes the ball centrally symmetric
    by construction. ``harmonics`` maps ``m`` to the pair ``(c_m, s_m)``.
    """

    c0: float
    harmonics: tuple[tuple[int, float, float], ...] = ()

    def __init__(self, c0: float, harmonics: Mapping[int, tuple[float, float]] | None = None):
        terms = []
        for m, (c, s) in sorted((harmonics or {}).items()):
            m = int(m)
            if m <= 0 or m % 2:
                raise GaugeError(
                    f"harmonic {m} is not a positive even integer; "
                    "profiles must be pi-periodic"
                )
            terms.append((m, float(c), float(s)))
        object.__setattr__(self, "c0", float(c0))
        object.__setattr__(self, "harmonics", tuple(terms))

    @classmethod
    def constant(cls, value: float = 1.0) -> "GaugeProfile":
        return cls(value)

    def coefficient_map(self) -> dict[int, tuple[float, float]]:
        return {m: (c, s) for m, c, s in self.harmonics}

    def evaluate(self, theta) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Exact values of ``a0``, ``a0'`` and ``a0''`` at ``theta``."""
        theta = np.asarray(theta, dtype=float)
        a = np.full_like(theta, self.c0)
        da = np.zeros_like(theta)
        dda = np.zeros_like(theta)
        for m, c, s in self.harmonics:
            cos_m = np.cos(m * theta)
            sin_m = np.sin(m * theta)
            a = a + c * cos_m + s * sin_m
            da = da + m * (s * cos_m - c * sin_m)
            dda = dda - m * m * (c * cos_m + s * sin_m)
        return a, da, dda

    def samples(self, grid: AngleGrid) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return _profile_samples(self, grid.n)

    def check(self, grid: AngleGrid) -> None:
        a, _, dda = self.samples(grid)
        _check_samples(a, a + dda)


@lru_cache(maxsize=64)
def _profile_samples(profile: GaugeProfile, n: int):
    out = profile.evaluate(AngleGrid(n).theta)
    for arr in out:
        arr.setflags(write=False)
    return out


def _check_samples(a: np.ndarray, conv: np.ndarray) -> None:
    if not np.all(np.isfinite(a)) or np.min(a) <= 0.0:
        raise GaugeError(f"radial profile must be positive (min a = {np.min(a):.6g})")
    if np.min(conv) <= CONVEXITY_EPS:
        raise GaugeError(
            f"profile is not strictly convex: min(a + a'') = {np.min(conv):.6g} "
            f"<= {CONVEXITY_EPS:g}"
        )


@dataclass(frozen=True)
class Gauge:
    """Instantaneous unit ball sampled on a grid.

    ``dlog_a_dt`` and ``dlog_conv_dt`` hold the time derivatives of
    ``log a`` and ``log(a + a'')`` at the sample time.
    """

    grid: AngleGrid
    t: float
    a: np.ndarray
    da: np.ndarray
    dda: np.ndarray
    dlog_a_dt: np.ndarray
    dlog_conv_dt: np.ndarray
    validate: bool = field(default=True, repr=False, compare=False)

    def __post_init__(self):
        if self.validate:
            _check_samples(self.a, self.conv)

    @property
    def conv(self) -> np.ndarray:
        """``a + a''``, the speed of the unit-ball boundary."""
        return self.a + self.dda

    @property
    def bracket(self) -> np.ndarray:
        """``[p, p'] = a (a + a'')``."""
        return self.a * self.conv


@dataclass(frozen=True)
class FSpec:
    """Scale factor ``f(t)`` of a homothetic family.

    ``kind`` is one of ``constant``, ``linear`` (``1 + c t``) or
    ``exponential`` (``exp(c t)``); ``c`` must be nonnegative.
    """

    kind: str = "constant"
    c: float = 0.0

    KINDS = ("constant", "linear", "exponential")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown scale factor kind {self.kind!r}")
        if not math.isfinite(self.c) or self.c < 0.0:
            raise ValueError(f"scale factor rate must be finite and >= 0, got {self.c}")
        if self.kind == "constant" and self.c != 0.0:
            object.__setattr__(self, "c", 0.0)

    def value(self, t: float) -> float:
        if self.kind == "linear":
            return 1.0 + self.c * t
        if self.kind == "exponential":
            return math.exp(self.c * t)
        return 1.0

    def rate(self, t: float) -> float:
        if self.kind == "linear":
            return self.c
        if self.kind == "exponential":
            return self.c * math.exp(self.c * t)
        return 0.0

    def log_rate(self, t: float) -> float:
        """``f'(t) / f(t)``."""
        if self.kind == "linear":
            return self.c / (1.0 + self.c * t)
        if self.kind == "exponential":
            return self.c
        return 0.0

    def sup_log_rate(self, t0: float, t1: float) -> float:
        # linear decays, exponential is flat
        return self.log_rate(t0)

    def describe(self) -> str:
        if self.kind == "constant":
            return "constant"
        if self.kind == "linear":
            return f"linear({self.c:g})"
        return f"exponential({self.c:g})"


class PlaneFamily:
    """Time-indexed family of unit balls ``a(theta, t)``."""

    def gauge(self, t: float, grid: AngleGrid) -> Gauge:
        raise NotImplementedError

    def ball_area(self, t: float, grid: AngleGrid) -> float:
        return ball_area(self.gauge(t, grid))

    def base_and_scale(self, t: float) -> tuple[GaugeProfile, float]:
        """Profile and scale used by the entropy-type functionals."""
        raise NotImplementedError

    def sup_log_rate(self, t0: float, t1: float, grid: AngleGrid) -> float:
        """Upper bound for ``d log a / dt`` on ``[t0, t1]``."""
        raise NotImplementedError

    def conv_nondecreasing(self) -> bool:
        """Whether ``t -> a + a''`` is nondecreasing at every angle."""
        raise NotImplementedError

    def breakpoints(self) -> tuple[float, ...]:
        """Times where ``a_t`` jumps; the solver steps exactly onto them."""
        return ()


class Homothetic(PlaneFamily):
    """``a(theta, t) = f(t) a0(theta)`` with ``f`` from an :class:`FSpec`."""

    def __init__(self, profile: GaugeProfile, fspec: FSpec | None = None):
        self.profile = profile
        self.fspec = fspec if fspec is not None else FSpec()

    def __repr__(self):
        return f"{type(self).__name__}({self.profile!r}, {self.fspec!r})"

    def gauge(self, t: float, grid: AngleGrid) -> Gauge:
        a0, da0, dda0 = self.profile.samples(grid)
        _checked_profile(self.profile, grid.n)
        f = self.fspec.value(t)
        rate = np.full(grid.n, self.fspec.log_rate(t))
        # f > 0 scales a valid profile into a valid one
        return Gauge(grid, t, f * a0, f * da0, f * dda0, rate, rate, validate=False)

    def ball_area(self, t: float, grid: AngleGrid) -> float:
        return self.fspec.value(t) ** 2 * _base_area(self.profile, grid.n)

    def base_and_scale(self, t: float) -> tuple[GaugeProfile, float]:
        return self.profile, self.fspec.value(t)

    def sup_log_rate(self, t0: float, t1: float, grid: AngleGrid | None = None) -> float:
        return self.fspec.sup_log_rate(t0, t1)

    def conv_nondecreasing(self) -> bool:
        return True


class Static(Homothetic):
    """Fixed unit ball."""

    def __init__(self, profile: GaugeProfile):
        super().__init__(profile, FSpec())

    def __repr__(self):
        return f"Static({self.profile!r})"


@lru_cache(maxsize=64)
def _checked_profile(profile: GaugeProfile, n: int) -> bool:
    profile.check(AngleGrid(n))
    return True


@lru_cache(maxsize=64)
def _base_area(profile: GaugeProfile, n: int) -> float:
    a, _, dda = _profile_samples(profile, n)
    return 0.5 * float(integrate(a * (a + dda)))


class Tabulated(PlaneFamily):
    """Profiles given at increasing times, coefficients interpolated linearly.

    Outside the tabulated range the nearest end profile is used.
    """

    def __init__(self, table: Sequence[tuple[float, GaugeProfile]]):
        if not table:
            raise ValueError("tabulated family needs at least one node")
        times = [float(t) for t, _ in table]
        if any(t1 <= t0 for t0, t1 in zip(times, times[1:])):
            raise ValueError("tabulated times must be strictly increasing")
        self.times = np.array(times)
        self.profiles = [p for _, p in table]
        keys = sorted({m for p in self.profiles for m, _, _ in p.harmonics})
        self._keys = keys
        rows = []
        for p in self.profiles:
            cmap = p.coefficient_map()
            row = [p.c0]
            for m in keys:
                row.extend(cmap.get(m, (0.0, 0.0)))
            rows.append(row)
        self._coef = np.array(rows)

    def _coefficients(self, t: float) -> tuple[np.ndarray, np.ndarray]:
        ts = self.times
        # one-sided from the right at the knots, as seen by a forward solver
        if len(ts) == 1 or t < ts[0]:
            return self._coef[0], np.zeros_like(self._coef[0])
        if t >= ts[-1]:
            return self._coef[-1], np.zeros_like(self._coef[0])
        j = int(np.searchsorted(ts, t, side="right")) - 1
        slope = (self._coef[j + 1] - self._coef[j]) / (ts[j + 1] - ts[j])
        return self._coef[j] + slope * (t - ts[j]), slope

    def _profile(self, row: np.ndarray) -> GaugeProfile:
        return GaugeProfile(
            row[0],
            {m: (row[1 + 2 * i], row[2 + 2 * i]) for i, m in enumerate(self._keys)},
        )

    def profile_at(self, t: float) -> GaugeProfile:
        return self._profile(self._coefficients(t)[0])

    def gauge(self, t: float, grid: AngleGrid) -> Gauge:
        row, slope = self._coefficients(t)
        a, da, dda = self._profile(row).evaluate(grid.theta)
        at, _, ddat = self._profile(slope).evaluate(grid.theta)
        return Gauge(grid, t, a, da, dda, at / a, (at + ddat) / (a + dda))

    def base_and_scale(self, t: float) -> tuple[GaugeProfile, float]:
        return self.profile_at(t), 1.0

    def sup_log_rate(self, t0: float, t1: float, grid: AngleGrid) -> float:
        # within one piece a_t is fixed and a is linear in t, so a_t / a is
        # monotone and its sup sits at a clipped piece end
        best = 0.0
        ts = self.times
        for j in range(len(ts) - 1):
            lo, hi = max(t0, ts[j]), min(t1, ts[j + 1])
            if lo > hi:
                continue
            slope = (self._coef[j + 1] - self._coef[j]) / (ts[j + 1] - ts[j])
            at, _, _ = self._profile(slope).evaluate(grid.theta)
            for t in (lo, hi):
                row = self._coef[j] + slope * (t - ts[j])
                a, _, _ = self._profile(row).evaluate(grid.theta)
                best = max(best, float(np.max(at / a)))
        return best

    def breakpoints(self) -> tuple[float, ...]:
        return tuple(float(t) for t in self.times)

    def conv_nondecreasing(self) -> bool:
        grid = AngleGrid(256)
        for j in range(len(self.times) - 1):
            _, slope = self._coefficients(0.5 * (self.times[j] + self.times[j + 1]))
            at, _, ddat = self._profile(slope).evaluate(grid.theta)
            if np.min(at + ddat) < 0.0:
                return False
        return True


def unit_ball_boundary(gauge: Gauge) -> tuple[np.ndarray, np.ndarray]:
    """Boundary points ``p`` and tangents ``p'`` of the unit ball, shape ``(n, 2)``."""
    th = gauge.grid.theta
    p = gauge.a[:, None] * e_r(th) + gauge.da[:, None] * e_theta(th)
    dp = gauge.conv[:, None] * e_theta(th)
    return p, dp


def dual_boundary(gauge: Gauge) -> np.ndarray:
    """Boundary of the dual ball, ``q = p' / [p, p']``."""
    p, dp = unit_ball_boundary(gauge)
    br = wedge(p, dp)
    if np.min(br) <= 0.0:
        raise GaugeError("[p, p'] must be positive on the grid")
    return dp / br[:, None]


def ball_area(gauge: Gauge) -> float:
    """Area of the unit ball, ``1/2 * int a (a + a'') dtheta``."""
    return 0.5 * float(integrate(gauge.bracket))


def metric_factor(k: np.ndarray, gauge: Gauge) -> np.ndarray:
    """``lambda = [p, p'] / k``, the dual-arclength density in theta."""
    return gauge.bracket / k


def q_length(k: np.ndarray, gauge: Gauge) -> float:
    """Length of the curve with curvature ``k`` measured in the dual norm."""
    k = getattr(k, "k", k)
    if np.min(k) <= 0.0:
        raise ValueError("curvature must be positive to define a dual length")
    return float(integrate(metric_factor(k, gauge)))


def curve_area(snapshot) -> float:
    """Enclosed area ``1/2 * int [F, dF/dtheta] dtheta`` with ``dF/dtheta = lambda q``.

    Warns when the snapshot is flagged as an open curve.
    """
    if not getattr(snapshot, "closed", True):
        warnings.warn(f"area of an open curve at t={snapshot.t:.6g}", RuntimeWarning, stacklevel=2)
    tangent = snapshot.lam[:, None] * snapshot.dual
    return 0.5 * float(integrate(wedge(snapshot.points, tangent)))


def median_curvature(k: np.ndarray) -> float:
    """Largest level exceeded by ``k`` on some closed arc of length pi.

    Each window covers ``n/2 + 1`` consecutive samples, wrapping around.
    """
    k = np.asarray(getattr(k, "k", k), dtype=float)
    n = k.shape[-1]
    idx = (np.arange(n)[:, None] + np.arange(n // 2 + 1)[None, :]) % n
    return float(np.max(np.min(k[idx], axis=1)))


def median_bound_constant(gauge: Gauge) -> float:
    """``(max |q|)^2 * max [p, p']`` with ``|q| = 1/a``."""
    return float(np.max(1.0 / gauge.a) ** 2 * np.max(gauge.bracket))
