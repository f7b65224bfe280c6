import numpy as np
import pytest
from hypothesis import given, strategies as st

from solhier.errors import ConfigurationError, DomainError, ResourceError, StructuralError
from solhier.loops import LoopElement, loop_bracket, loop_product, make_family, transform
from solhier.oracles import build_split_oracle

seeds = st.integers(0, 2 ** 32 - 1)
FAMILIES = [("standard", 2), ("standard", 3), ("tau", 2), ("tau", 3), ("tau-sigma", 2), ("twisted-U", 3),
            ("twisted-U/K", 2), ("twisted-U/K", 3)]
_cache = {}


def family(name, n):
    if (name, n) not in _cache:
        _cache[(name, n)] = make_family(name, n)
    return _cache[(name, n)]


def random_loop(r, lo, hi, N=3):
    c = r.standard_normal((hi - lo + 1, N, N)) + 1j * r.standard_normal((hi - lo + 1, N, N))
    return LoopElement(c, lo)


@given(seeds, st.integers(-3, 1), st.integers(0, 3))
def test_evaluate_matches_direct_sum(seed, lo, width):
    r = np.random.default_rng(seed)
    xi = random_loop(r, lo, lo + width)
    lam = complex(*r.standard_normal(2)) + 0.5
    direct = sum(xi.coeff(j) * lam ** j for j in xi.degrees)
    assert np.allclose(xi.evaluate(lam), direct)


@given(seeds)
def test_bracket_and_product_commute_with_evaluation(seed):
    r = np.random.default_rng(seed)
    xi, eta = random_loop(r, -1, 2), random_loop(r, -2, 1)
    lam = np.exp(1j * r.uniform(0, 2 * np.pi)) * r.uniform(0.5, 2)
    X, Y = xi.evaluate(lam), eta.evaluate(lam)
    assert np.allclose(loop_bracket(xi, eta).evaluate(lam), X @ Y - Y @ X)
    assert np.allclose(loop_product(xi, eta).evaluate(lam), X @ Y)


def test_band_errors():
    xi = LoopElement(np.ones((3, 2, 2)), -1)
    with pytest.raises(StructuralError):
        xi.with_band(0, 1)
    with pytest.raises(DomainError):
        xi.evaluate(0.0)
    with pytest.raises(ResourceError):
        LoopElement(np.zeros((5, 2, 2)), 0, max_band=4)
    with pytest.raises(ResourceError):
        loop_bracket(LoopElement(np.ones((3, 2, 2)), 0, max_band=4), LoopElement(np.ones((3, 2, 2)), 0, max_band=4))
    with pytest.raises(StructuralError):
        LoopElement(np.ones((2, 3)), 0)


def test_truncate_and_trim():
    xi = LoopElement.from_dict({-2: np.zeros((2, 2)), 0: np.eye(2), 1: np.eye(2)})
    assert (xi.trim().lo, xi.trim().hi) == (0, 1)
    assert xi.truncate(0, 0).norm() == pytest.approx(np.sqrt(2))


def test_json_roundtrip(rng):
    fam = family("twisted-U/K", 2)
    xi = fam.random_member(rng, -2, 2)
    back = LoopElement.from_json(xi.to_json())
    assert back.lo == xi.lo and np.array_equal(back.coeffs, xi.coeffs)
    assert back.algebra.label == xi.algebra.label


@pytest.mark.parametrize("name,n", FAMILIES)
def test_loop_involutions_are_involutive(name, n, rng):
    fam = family(name, n)
    xi = random_loop(rng, -2, 3, fam.algebra.size)
    for inv in fam.algebra.involutions.values():
        twice = transform(inv, transform(inv, xi))
        assert np.allclose(twice.with_band(xi.lo, xi.hi).coeffs, xi.coeffs)


@pytest.mark.parametrize("name,n", FAMILIES)
def test_split_properties(name, n, rng):
    fam = family(name, n)
    for _ in range(10):
        xi = fam.random_member(rng, -3, 3)
        xp, xm = fam.project_split(xi)
        assert (xp + xm - xi).norm() < 1e-12 * max(1, xi.norm())
        assert fam.membership("L+", xp) < 1e-10 and fam.membership("L-", xm) < 1e-10
        pp, pm = fam.project_split(xp)
        assert (pp - xp).norm() < 1e-10 and pm.norm() < 1e-10


@pytest.mark.parametrize("name,n", FAMILIES)
def test_split_agrees_with_linear_solve_oracle(name, n, rng):
    fam = family(name, n)
    oracle = build_split_oracle(name, n, 2)
    assert oracle.intersection_dim == 0
    for _ in range(5):
        xi = fam.random_member(rng, -2, 2)
        xp, xm = fam.project_split(xi)
        op, om, res = oracle.split(xi)
        assert res < 1e-10
        assert (op - xp).norm() < 1e-10 and (om - xm).norm() < 1e-10


@pytest.mark.parametrize("name,n", FAMILIES)
def test_both_halves_are_subalgebras(name, n, rng):
    fam = family(name, n)
    a, b = (fam.project_split(fam.random_member(rng, -2, 2)) for _ in range(2))
    assert fam.membership("L+", loop_bracket(a[0], b[0])) < 1e-10
    assert fam.membership("L-", loop_bracket(a[1], b[1])) < 1e-10


@pytest.mark.parametrize("name,n", [f for f in FAMILIES if f[0] != "twisted-U"])
def test_vacuum_generators_commute_and_lie_in_plus(name, n):
    fam = family(name, n)
    rank = fam.cartan.rank
    degrees = (1, 3, 5) if name in ("tau-sigma", "twisted-U/K") else (1, 2, 3)
    gens = [fam.vacuum_generator(i, j) for i in range(1, rank + 1) for j in degrees]
    gens = [g for g in gens if g.norm() > 0]
    for g in gens:
        assert fam.membership("L+", g) < 1e-12
        for h in gens:
            assert loop_bracket(g, h).norm() < 1e-12


def test_twisted_generators_have_odd_degree():
    with pytest.raises(DomainError):
        family("twisted-U/K", 2).vacuum_generator(1, 2)


def test_unknown_family():
    with pytest.raises(ConfigurationError):
        make_family("affine", 2)
