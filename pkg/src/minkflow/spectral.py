"""Uniform periodic grids and Fourier-based calculus on them."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class AngleGrid:
    """Uniform grid on the circle, ``theta_i = 2*pi*i/n``.

    ``n`` must be even and at least 8.
    """

    n: int
    theta: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        n = int(self.n)
        if n != self.n or n < 8 or n % 2:
            raise ValueError(f"grid size must be an even integer >= 8, got {self.n!r}")
        object.__setattr__(self, "n", n)
        theta = TWO_PI * np.arange(n) / n
        theta.setflags(write=False)
        object.__setattr__(self, "theta", theta)

    @property
    def dtheta(self) -> float:
        return TWO_PI / self.n

    @property
    def wavenumbers(self) -> np.ndarray:
        """Integer wavenumbers matching ``np.fft.rfft`` output."""
        return np.arange(self.n // 2 + 1)

    def index(self, i: int) -> int:
        return i % self.n


def derivatives(values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """First and second derivatives of periodic samples on ``[0, 2pi)``.

    The Nyquist mode is dropped for the first derivative (it has no real
    odd counterpart) and kept for the second.
    """
    n = values.shape[-1]
    m = np.arange(n // 2 + 1)
    vh = np.fft.rfft(values)
    spec = np.stack([1j * m * vh, -(m.astype(float) ** 2) * vh])
    spec[0, ..., -1] = 0.0
    d1, d2 = np.fft.irfft(spec, n)
    return d1, d2


def derivative(values: np.ndarray) -> np.ndarray:
    n = values.shape[-1]
    m = np.arange(n // 2 + 1)
    d1 = 1j * m * np.fft.rfft(values)
    d1[..., -1] = 0.0
    return np.fft.irfft(d1, n)


@lru_cache(maxsize=16)
def _origin_row(n: int) -> np.ndarray:
    row = derivative(np.eye(n))[:, 0].copy()
    row.setflags(write=False)
    return row


def derivative_at_origin(values: np.ndarray) -> float:
    """Spectral derivative at ``theta = 0`` only; same value as ``derivative(values)[0]``."""
    return float(_origin_row(values.shape[-1]) @ values)


def integrate(values: np.ndarray) -> float | np.ndarray:
    """Periodic trapezoid rule over a full period."""
    n = values.shape[-1]
    return np.sum(values, axis=-1) * (TWO_PI / n)


def antiderivative(values: np.ndarray, theta: np.ndarray) -> np.ndarray:
    """``G(theta_i) = int_0^{theta_i} g``, exact for trigonometric polynomials.

    A nonzero mean contributes the secular part ``mean * theta``, so an
    integrand that does not integrate to zero over a period yields an open
    curve rather than being silently periodized.
    """
    n = values.shape[-1]
    vh = np.fft.rfft(values)
    mean = vh[..., 0].real / n
    m = np.arange(n // 2 + 1)
    gh = np.zeros_like(vh)
    gh[..., 1:-1] = vh[..., 1:-1] / (1j * m[1:-1])
    g = np.fft.irfft(gh, n)
    g = g - g[..., :1]
    return g + mean[..., None] * theta if np.ndim(mean) else g + mean * theta
