import numpy as np
import pytest

from minkflow.spectral import (
    AngleGrid,
    antiderivative,
    derivative,
    derivative_at_origin,
    derivatives,
    integrate,
)


@pytest.mark.parametrize("n", [3, 6, 7, 9.5, 0])
def test_grid_rejects_bad_sizes(n):
    with pytest.raises(ValueError):
        AngleGrid(n)


def test_grid_spacing_and_wrap():
    g = AngleGrid(16)
    assert g.dtheta == 2 * np.pi / 16
    assert np.allclose(np.diff(g.theta), g.dtheta)
    assert g.index(17) == 1 and g.index(-1) == 15


def test_derivatives_of_trig_polynomial():
    th = AngleGrid(64).theta
    f = np.sin(3 * th) + 0.5 * np.cos(7 * th)
    d1, d2 = derivatives(f)
    assert np.allclose(d1, 3 * np.cos(3 * th) - 3.5 * np.sin(7 * th), atol=1e-12)
    assert np.allclose(d2, -9 * np.sin(3 * th) - 24.5 * np.cos(7 * th), atol=1e-11)
    assert np.allclose(derivative(f), d1, atol=1e-13)
    assert derivative_at_origin(f) == pytest.approx(d1[0], abs=1e-12)


def test_trapezoid_is_spectral():
    th = AngleGrid(32).theta
    assert integrate(np.exp(np.cos(th))) == pytest.approx(2 * np.pi * 1.2660658777520082, rel=1e-14)


def test_antiderivative_exact_and_secular():
    th = AngleGrid(32).theta
    g = antiderivative(np.cos(th) + 0.25, th)
    assert np.allclose(g, np.sin(th) + 0.25 * th, atol=1e-14)
