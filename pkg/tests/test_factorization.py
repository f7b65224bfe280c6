import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, strategies as st

from solhier.errors import DomainError, FactorizationError, UnsupportedOperationError
from solhier.factorization import (ProjectorFactor, RationalLoop, birkhoff_factorize, depth_schedule, dress,
                                   dress_projector_closed_form, formal_inverse_scattering, hermitian_projection,
                                   identity_loop, inverse_scattering, nls_soliton_closed_form, residue,
                                   simple_element, simplicity_probe, track_soliton, uniqueness_probe,
                                   vacuum_frame_function)
from solhier.grid import Axis, Grid
from solhier.loops import make_family

TAU = make_family("tau", 2)
UK = make_family("twisted-U/K", 2)
SAMPLE_LAMS = np.array([0.3 + 1.1j, -2.0 + 0.4j, 1.7, 3.1 - 0.2j])


@given(st.floats(-2, 2), st.floats(0.1, 2), st.complex_numbers(max_magnitude=3))
def test_projector_factor_reality_and_inverse(a, b, c):
    f = simple_element("tau", complex(a, b), [1, c])
    assert f.reality_defect(SAMPLE_LAMS) < 1e-12
    assert np.allclose(f(SAMPLE_LAMS) @ f.inverse(SAMPLE_LAMS), np.eye(2))
    assert np.allclose(f(1e8), np.eye(2), atol=1e-7)


@given(st.floats(1.1, 4), st.floats(-1, 1), st.booleans())
def test_twisted_quadruple_symmetries(z, s, flip):
    z = -z if flip else z
    v = [1, s, np.sqrt((1 + s * s) / 2), np.sqrt((1 + s * s) / 2)]
    f = simple_element("twisted-U/K", z, v)
    assert f.reality_defect(SAMPLE_LAMS) < 1e-10
    assert sorted(np.round(np.abs(f.poles), 12)) == sorted(np.round([abs(z)] * 2 + [1 / abs(z)] * 2, 12))


def test_simple_element_errors():
    with pytest.raises(DomainError):
        simple_element("tau", 0.5, [1, 0])
    with pytest.raises(DomainError):
        simple_element("twisted-U/K", 1.0, [1, 0, 1, 0])
    with pytest.raises(DomainError):
        simple_element("twisted-U/K", 2.0, [1, 0, 0, 0])
    with pytest.raises(UnsupportedOperationError):
        simple_element("twisted-U/K", 2.0 + 1j, [1, 0, 1, 0])
    with pytest.raises(UnsupportedOperationError):
        simple_element("tau-sigma", 1j, [1, 0])


def test_json_round_trip():
    f = simple_element("tau", 0.3 + 0.6j, [1, 0.5]) * simple_element("tau", -1 + 1j, [1, -1j])
    g = RationalLoop.from_json(f.to_json())
    assert np.allclose(f(SAMPLE_LAMS), g(SAMPLE_LAMS))
    h = simple_element("twisted-U/K", 1.5, [1, 0.3, 1, -0.3])
    assert np.allclose(RationalLoop.from_json(h.to_json())(SAMPLE_LAMS), h(SAMPLE_LAMS))


def test_residue_of_projector_factor():
    z = 0.4 + 0.7j
    pi = hermitian_projection([1, 2j])
    f = RationalLoop([ProjectorFactor(z, pi)], "tau")
    assert np.allclose(residue(f, z), (z - np.conj(z)) * pi, atol=1e-12)


def test_simplicity_probe():
    f1 = simple_element("tau", 0.3 + 0.6j, [1, 0.5])
    f2 = simple_element("tau", -0.4 + 0.9j, [1, -0.7])
    ok, parts = simplicity_probe(f1)
    assert ok and len(parts) == 1
    ok, parts = simplicity_probe(f1 * f2)
    assert not ok and len(parts) == 2
    with pytest.raises(UnsupportedOperationError):
        simplicity_probe(simple_element("twisted-U/K", 1.5, [1, 0.3, 1, -0.3]))


def test_vacuum_frame_matches_matrix_exponential():
    gens = [TAU.vacuum_generator(1, 1), TAU.vacuum_generator(1, 2)]
    coords = np.array([[0.3, -0.2], [1.1, 0.5]])
    V = vacuum_frame_function(TAU, gens, coords)(SAMPLE_LAMS)
    for a, lam in enumerate(SAMPLE_LAMS):
        for k, (x, t) in enumerate(coords):
            M = x * gens[0].evaluate(lam) + t * gens[1].evaluate(lam)
            assert np.allclose(V[a, k], scipy.linalg.expm(M))


@pytest.mark.parametrize("name", ["standard", "tau"])
def test_synthetic_product_recovery(name):
    fam = make_family(name, 2)
    r = np.random.default_rng(11)
    X, Y, m = (fam.random_member(r, 0, 0).coeff(0) * s for s in (0.5, 0.3, 0.4))
    E0 = lambda L: scipy.linalg.expm(L[:, None, None] * X + (L ** 2)[:, None, None] * Y)
    M0 = lambda L: scipy.linalg.expm((1 / L)[:, None, None] * m)
    G = lambda L: E0(np.atleast_1d(L)) @ M0(np.atleast_1d(L))
    res = birkhoff_factorize(G, fam, 1.0, samples=128)
    lams = 1.3 * np.exp(2j * np.pi * (np.arange(8) + 0.3) / 8)
    assert np.max(np.abs(res.plus(lams) - E0(lams))) < 1e-9
    assert np.max(np.abs(res.minus(lams) - M0(lams))) < 1e-9
    assert uniqueness_probe(G, fam, 1.0, res, lams, samples=128) < 1e-9


def test_twisted_u_factorization_is_unsupported():
    with pytest.raises(UnsupportedOperationError):
        birkhoff_factorize(lambda L: np.broadcast_to(np.eye(3), (len(L), 3, 3)), "twisted-U", 2.0)


def test_depth_schedule():
    assert depth_schedule(0.5) == (32,)
    assert depth_schedule(0.05) == (8, 16, 24, 32)
    assert depth_schedule(None) == (8, 16, 24, 32)


@pytest.fixture(scope="module")
def soliton():
    g = Grid((Axis.closed("x", -6, 6, 121), Axis.closed("t", 0, 1, 5)), "decaying")
    z = 0.25 + 0.5j
    return g, z, formal_inverse_scattering(simple_element("tau", z, [1, 1]), TAU, g)


def test_inverse_scattering_gives_the_sech_soliton(soliton):
    g, z, res = soliton
    X, T = g.mesh()
    q = res.P.coeff(0)[..., 0, 1]
    assert np.max(np.abs(q - nls_soliton_closed_form(X, T, z))) < 1e-8
    # textbook profile: amplitude 2 Im z, velocity -2 Re z
    beta, alpha = z.imag, z.real
    assert np.max(np.abs(np.abs(q) - 2 * beta / np.cosh(2 * beta * (X + 2 * alpha * T)))) < 1e-8
    assert res.failed == []


def test_closed_form_dressing_matches_factorization(soliton):
    g, z, res = soliton
    f = simple_element("tau", z, [1, 1])
    X, T = g.mesh()
    gens = [TAU.vacuum_generator(1, 1), TAU.vacuum_generator(1, 2)]
    V = vacuum_frame_function(TAU, gens, np.stack([X, T], -1))
    u, _ = dress_projector_closed_form(f, lambda p: V(np.array([np.conj(p)]))[0], TAU.cartan.a1,
                                       np.zeros(X.shape + (2, 2)))
    assert np.max(np.abs(u - res.P.coeff(0))) < 1e-8


def test_identity_loop_leaves_the_vacuum():
    g = Grid((Axis.closed("x", -2, 2, 9), Axis.closed("t", 0, 1, 5)), "decaying")
    res = formal_inverse_scattering(identity_loop(2), TAU, g)
    assert np.max(np.abs(res.P.coeff(0))) < 1e-12


@pytest.mark.parametrize("family", ["tau", "twisted-U/K"])
def test_action_axiom(family):
    fam = make_family(family, 2)
    if family == "tau":
        gens = [fam.vacuum_generator(1, 1), fam.vacuum_generator(1, 2)]
        x = np.linspace(-2, 2, 7)
        coords = np.stack([x, 0.1 * np.ones_like(x)], -1)
        f1 = simple_element("tau", 0.3 + 0.6j, [1, 0.5])
        f2 = simple_element("tau", -0.4 + 0.9j, [1, -0.7j])
    else:
        gens = [fam.vacuum_generator(i, 1) for i in (1, 2)]
        x = np.linspace(-0.5, 0.5, 7)
        coords = np.stack([x, 0.3 * x + 0.1], -1)
        f1 = simple_element("twisted-U/K", 1.5, [1, 0.3, 1.0, -0.3])
        f2 = simple_element("twisted-U/K", -2.5, [0.2, 1, -1, 0.2])
    V = vacuum_frame_function(fam, gens, coords)
    both, _ = dress(f2 * f1, V, gens, fam)
    one, fac1 = dress(f1, V, gens, fam)
    two, _ = dress(f2, fac1.plus_direct, one, fam)
    assert max(float(np.max(np.abs(a.coeffs - b.coeffs))) for a, b in zip(both, two)) < 1e-8
    direct = inverse_scattering(f2 * f1, fam, gens, coords)
    assert max(float(np.max(np.abs(a.coeffs - b.coeffs))) for a, b in zip(both, direct.components)) < 1e-10


def test_unconverged_nodes_are_reported():
    f = simple_element("tau", 0.25 + 1.0j, [1, 1])
    g = Grid((Axis.closed("x", -12, 12, 9), Axis.closed("t", 0, 0.5, 5)), "decaying")
    with pytest.raises(FactorizationError):
        formal_inverse_scattering(f, TAU, g, raise_on_failure=True)
    res = formal_inverse_scattering(f, TAU, g)
    assert res.failed
    node = res.failed[0]
    assert np.all(np.isnan(res.P.coeffs[(slice(None),) + node]))
    ok = np.ones(g.shape, bool)
    for nd in res.failed:
        ok[nd] = False
    assert np.all(np.isfinite(res.P.coeffs[:, ok]))


def test_track_soliton_on_exact_profile():
    x = np.linspace(-15, 15, 1201)
    t = np.linspace(0, 1, 6)
    q = 1.3 / np.cosh(1.3 * (x[:, None] - 0.7 * t[None])) * np.exp(1j * x[:, None])
    tr = track_soliton(q, x, t)
    assert np.allclose(tr.velocities, 0.7, atol=1e-8)
    assert np.allclose(tr.amplitudes, 1.3, atol=1e-3)
    assert tr.drift()[1] < 1e-8
