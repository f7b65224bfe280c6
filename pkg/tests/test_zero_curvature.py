import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, strategies as st

from solhier.errors import DomainError, FlatnessError, SingularityError
from solhier.grid import Axis, Grid
from solhier.lie import NestedDecomposition, diagonal_cartan, onn_algebra, real_form, su_algebra
from solhier.loops import LoopElement, make_family
from solhier.tasks import random_orthogonal
from solhier.zero_curvature import (GAUSS_COEFFICIENT, ConnectionForm, GSGEData, assemble_gsge_lax,
                                    assemble_twisted_u_lax, assemble_twisted_uk_lax, assemble_uk_lax, curvature,
                                    curvature_norm, frame, gsge_connection, gsge_from_connection,
                                    gsge_lax_three_term, gsge_residual_norms, build_F_from_metric,
                                    log_derivative_residual, u_system_residual)

LAMS = (0.5, 1.0, 2.0)


def square(lo=-1.0, hi=1.0, m=41):
    return Grid((Axis.closed("x", lo, hi, m), Axis.closed("y", lo, hi, m)), "decaying")


def test_vacuum_connection_is_exactly_flat():
    fam = make_family("tau", 2)
    g = square(m=9)
    comps = [fam.vacuum_generator(1, j).map(lambda c: np.broadcast_to(c[:, None, None], (c.shape[0], 9, 9, 2, 2)))
             for j in (1, 2)]
    assert curvature_norm(ConnectionForm(g, comps), LAMS) == 0.0


@pytest.fixture(scope="module")
def frame_oracle():
    """``E = expm(M)`` with ``theta_i = E^{-1} dE/dx_i`` from exact Frechet derivatives."""
    g = square()
    X, Y = g.mesh()
    r = np.random.default_rng(5)
    U = real_form(su_algebra(2))
    A, B, C = (U.project(r.standard_normal((2, 2)) + 0j) for _ in range(3))
    M = np.sin(X)[..., None, None] * A + Y[..., None, None] * B + (X * Y)[..., None, None] * C
    dMx = np.cos(X)[..., None, None] * A + Y[..., None, None] * C
    dMy = B + X[..., None, None] * C
    E = np.empty(M.shape, complex)
    th = [np.empty(M.shape, complex) for _ in range(2)]
    for idx in np.ndindex(X.shape):
        e, dx = scipy.linalg.expm_frechet(M[idx], dMx[idx])
        _, dy = scipy.linalg.expm_frechet(M[idx], dMy[idx])
        E[idx] = e
        th[0][idx] = np.linalg.solve(e, dx)
        th[1][idx] = np.linalg.solve(e, dy)
    return g, E, ConnectionForm.from_matrices(g, th)


def test_curvature_of_a_pure_gauge_connection_is_small(frame_oracle):
    g, E, theta = frame_oracle
    assert curvature_norm(theta, [1.0], trim=2) < 1e-6


def test_frame_round_trip(frame_oracle):
    g, E, theta = frame_oracle
    Ef, defect = frame(theta, 1.0)
    base = (20, 20)
    ref = np.linalg.solve(E[base], E)
    assert np.max(np.abs(Ef - ref)) < 1e-6
    assert defect < 1e-6
    assert log_derivative_residual(Ef, theta, 1.0) < 1e-5


def test_curvature_grows_linearly_with_perturbation(frame_oracle):
    g, E, theta = frame_oracle
    X, Y = g.mesh()
    bump = (np.sin(2 * X) * np.cos(Y))[..., None, None] * np.array([[1j, 1], [-1, -1j]])
    kappas = []
    for eps in (1e-2, 2e-2, 4e-2):
        comps = [theta.components[0], theta.components[1] + LoopElement(eps * bump[None], 0)]
        kappas.append(curvature_norm(ConnectionForm(g, comps), [1.0], trim=2))
    slopes = np.diff(np.log(kappas)) / np.log(2)
    assert np.all(np.abs(slopes - 1) < 0.05)


def test_frame_refuses_curved_connection():
    g = square(m=11)
    X, Y = g.mesh()
    a = np.zeros(X.shape + (2, 2), complex)
    a[..., 0, 1] = Y
    theta = ConnectionForm.from_matrices(g, [a, np.zeros_like(a)])
    with pytest.raises(FlatnessError):
        frame(theta, 1.0)


def test_pole_at_zero():
    g = square(m=9)
    c = LoopElement(np.zeros((3, 9, 9, 2, 2)), -1)
    with pytest.raises(DomainError):
        curvature(ConnectionForm(g, [c, c]), (0, 1), 0.0)


@pytest.fixture(scope="module")
def su3():
    U = real_form(su_algebra(3))
    return diagonal_cartan([[1j, 0, -1j], [1j, -2j, 1j]], U)


@given(st.integers(0, 2 ** 32 - 1))
def test_uk_lax_curvature_equals_minus_system_residual(seed):
    U = real_form(su_algebra(3))
    c = diagonal_cartan([[1j, 0, -1j], [1j, -2j, 1j]], U)
    r = np.random.default_rng(seed)
    g = square(m=11)
    X, Y = g.mesh()
    V = [c.perp_part(U.project(r.standard_normal((3, 3)) + 0j)) for _ in range(2)]
    v = np.cos(X)[..., None, None] * V[0] + (X * Y)[..., None, None] * V[1]
    theta = assemble_uk_lax(v, c, g)
    res = u_system_residual(v, c, g)
    for lam in LAMS:
        assert np.max(np.abs(curvature(theta, (0, 1), lam) + res)) < 1e-10


def test_uk_lax_constant_v_and_membership(su3):
    g = square(m=9)
    A = su3.span.matrices()[0]
    with pytest.raises(DomainError):
        assemble_uk_lax(np.broadcast_to(A, (9, 9, 3, 3)), su3, g)
    E13 = np.zeros((3, 3), complex)
    E13[0, 2], E13[2, 0] = 1, -1
    theta = assemble_uk_lax(np.broadcast_to(E13, (9, 9, 3, 3)), su3, g)
    br = lambda P, Q: P @ Q - Q @ P
    a1, a2 = su3.basis
    expected = float(np.max(np.abs(br(br(a1, E13), br(a2, E13)))))
    assert curvature_norm(theta, LAMS) == pytest.approx(expected, abs=1e-12)


def test_twisted_u_lax_assembly():
    fam = make_family("twisted-U", 3)
    sigma = fam.algebra.involution("sigma")
    g = square(m=9)
    r = np.random.default_rng(2)
    G = np.triu(r.standard_normal((3, 3))) + 2 * np.eye(3)
    K = r.standard_normal((3, 3))
    K = K - K.T
    theta = assemble_twisted_u_lax(np.broadcast_to(G, (9, 9, 3, 3)), [np.broadcast_to(K, (9, 9, 3, 3))] * 2,
                                   fam.cartan.basis, sigma, g)
    lam = 1.7
    X = G @ fam.cartan.basis[0] @ np.linalg.inv(G)
    direct = X * lam + K + sigma(X) / lam
    assert np.allclose(theta.evaluate(lam)[0][3, 4], direct)
    c = theta.components[0]
    assert np.allclose(sigma(c.coeff(1)), c.coeff(-1))
    with pytest.raises(DomainError):
        assemble_twisted_u_lax(np.broadcast_to(G.T, (9, 9, 3, 3)), [K, K], fam.cartan.basis, sigma, g)


def test_twisted_uk_lax_vacuum_and_compatibility():
    fam = make_family("twisted-U/K", 2)
    nested = NestedDecomposition(onn_algebra(2))
    g = square(m=9)
    eye = np.broadcast_to(np.eye(4, dtype=complex), (9, 9, 4, 4))
    theta = assemble_twisted_uk_lax(eye, np.zeros((9, 9, 4, 4)), fam.cartan, nested, g)
    s2 = fam.algebra.involution("sigma2")
    for a, c in zip(fam.cartan.basis, theta.components):
        assert np.allclose(c.coeff(1), a) and np.allclose(c.coeff(-1), s2(a)) and np.allclose(c.coeff(0), 0)
    assert curvature_norm(theta, LAMS) < 1e-14
    X, Y = g.mesh()
    K = nested.K1p.matrices()[0]
    moving = scipy.linalg.expm(X[..., None, None] * K)
    with pytest.raises(DomainError):
        assemble_twisted_uk_lax(moving, np.zeros((9, 9, 4, 4)), fam.cartan, nested, g)


@pytest.mark.parametrize("n", [2, 3])
def test_gsge_assemblies_coincide_exactly(n):
    r = np.random.default_rng(n)
    for _ in range(20):
        d = GSGEData(random_orthogonal(r, n), r.standard_normal((n, n)))
        lam = complex(*r.standard_normal(2))
        blocks, identical = assemble_gsge_lax(d, lam)
        assert identical
        assert all(np.array_equal(b, t) for b, t in zip(blocks, gsge_lax_three_term(d, lam)))
    with pytest.raises(DomainError):
        assemble_gsge_lax(d, 0)


def test_gsge_vacuum_block_form():
    d = GSGEData(np.eye(2), np.zeros((2, 2)))
    lam = 2.0
    blocks, _ = assemble_gsge_lax(d, lam)
    J = np.diag([1.0, -1.0])
    for i, M in enumerate(blocks):
        e = np.zeros((2, 2))
        e[i, i] = 1
        assert np.allclose(M[:2, 2:], lam / 2 * e + 1 / (2 * lam) * e @ J)
        assert np.allclose(M[2:, :2], lam / 2 * e + 1 / (2 * lam) * J @ e)
        assert np.allclose(M[:2, :2], 0)
    assert np.all(d.F.diagonal() == 0)


def test_gsge_connection_round_trip():
    g = square(m=9)
    r = np.random.default_rng(3)
    d = GSGEData(random_orthogonal(r, 2, (9, 9)), r.standard_normal((9, 9, 2, 2)), g)
    back = gsge_from_connection(gsge_connection(d).components, g)
    assert np.allclose(back.A, d.A) and np.allclose(back.F, d.F)


def test_metric_quotient_is_singular_where_a_row_vanishes():
    g = square(m=9)
    with pytest.raises(SingularityError):
        build_F_from_metric(np.broadcast_to([1.0, 0.0], (9, 9, 2)), g)


@pytest.fixture(scope="module")
def dressed():
    from solhier.tasks import dressed_gsge
    d, _ = dressed_gsge({"box": [-0.3, 0.3], "size": 15})
    return d


def test_gauss_coefficient_is_fixed_by_the_lax_curvature(dressed):
    """Only the coefficient 1 makes dressed data satisfy the Gauss equation."""
    assert GAUSS_COEFFICIENT == 1.0
    good = gsge_residual_norms(dressed)
    assert max(good) < 1e-4
    for c in (-0.5, 0.5, -1.0):
        assert gsge_residual_norms(dressed, gauss_coefficient=c)[0] > 1e-2
    assert curvature_norm(gsge_connection(dressed), LAMS, trim=2) < 1e-4
    assert dressed.orthogonality_defect() < 1e-10
