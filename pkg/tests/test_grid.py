import numpy as np
import pytest
from hypothesis import given, strategies as st

from solhier.errors import StructuralError
from solhier.grid import (Axis, Grid, GridField, cumulative_quad4, fd4_derivative, integrate, line_grid,
                          spectral_antiderivative, spectral_derivative)


def _fd4_error(n):
    x = np.linspace(0, 2, n)
    return np.max(np.abs(fd4_derivative(np.sin(3 * x), x[1] - x[0]) - 3 * np.cos(3 * x)))


def test_fd4_is_fourth_order_including_edges():
    errs = [_fd4_error(n) for n in (41, 81, 161)]
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(orders > 3.7)


def test_fd4_is_exact_on_quartics():
    x = np.linspace(-1, 1, 9)
    f = 2 * x ** 4 - x ** 3 + x
    assert np.allclose(fd4_derivative(f, x[1] - x[0]), 8 * x ** 3 - 3 * x ** 2 + 1)


def test_fd4_needs_five_nodes():
    with pytest.raises(StructuralError):
        fd4_derivative(np.ones(4), 0.1)


@given(st.integers(1, 6))
def test_spectral_derivative_exact_on_trig_modes(k):
    g = line_grid(0, 2 * np.pi, 32)
    x = g.axes[0].points
    assert np.allclose(g.d(np.exp(1j * k * x)), 1j * k * np.exp(1j * k * x), atol=1e-11)
    assert np.isrealobj(spectral_derivative(np.cos(k * x), x[1] - x[0]))


def test_spectral_antiderivative_reports_mean():
    g = line_grid(0, 2 * np.pi, 64)
    x = g.axes[0].points
    F, mean = g.antiderivative(np.cos(x) + 0.5)
    assert mean == pytest.approx(0.5)
    assert np.allclose(F, np.sin(x) + 0.5 * x, atol=1e-12)
    G, m2 = spectral_antiderivative(np.cos(2 * x), x[1] - x[0])
    assert abs(m2) < 1e-14 and np.allclose(G, np.sin(2 * x) / 2, atol=1e-12)


def test_cumulative_quadrature_order():
    errs = []
    for n in (21, 41, 81):
        x = np.linspace(0, 1, n)
        errs.append(np.max(np.abs(cumulative_quad4(np.exp(x), x[1] - x[0]) - (np.exp(x) - 1))))
    assert np.log2(errs[0] / errs[1]) > 3.7 and np.log2(errs[1] / errs[2]) > 3.7


def test_integrate_decaying_and_periodic():
    g = line_grid(-10, 10, 401, "decaying")
    x = g.axes[0].points
    assert integrate(np.exp(-x ** 2), g) == pytest.approx(np.sqrt(np.pi), rel=1e-10)
    gp = line_grid(-20, 20, 256)
    xp = gp.axes[0].points
    assert integrate(1 / np.cosh(xp) ** 2, gp) == pytest.approx(2.0, rel=1e-12)


def test_axis_and_grid_validation():
    with pytest.raises(StructuralError):
        Axis("x", 0.0, -1.0, 10)
    with pytest.raises(StructuralError):
        Axis("x", 0.0, 1.0, 3)
    with pytest.raises(StructuralError):
        Axis("x", 0.0, 1.0, 10, "reflecting")
    with pytest.raises(StructuralError):
        Grid((Axis.closed("x", 0, 1, 10),), "open")
    with pytest.raises(StructuralError):
        line_grid(0, 1, 8).axis_index("t")


def test_periodic_axis_omits_endpoint_and_mixed_boundaries():
    ax = Axis.periodic("x", 0, 1, 4 * 2)
    assert ax.points[-1] < 1
    g = Grid((Axis.periodic("x", 0, 2 * np.pi, 32), Axis.closed("t", 0, 1, 11, "decaying")), "periodic")
    X, T = g.mesh()
    f = np.sin(X) * T ** 2
    assert np.allclose(g.d(f, 0), np.cos(X) * T ** 2, atol=1e-12)
    assert np.allclose(g.d(f, "t"), 2 * np.sin(X) * T, atol=1e-12)


def test_grid_field_decay_check():
    g = line_grid(-10, 10, 101, "decaying")
    x = g.axes[0].points
    assert GridField(g, np.exp(-x ** 2)).check_decay(1e-10)
    assert not GridField(g, 1 / np.cosh(x / 5)).check_decay(1e-3)
    with pytest.raises(StructuralError):
        GridField(g, np.zeros(5))
