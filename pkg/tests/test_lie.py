import numpy as np
import pytest
from hypothesis import given, strategies as st

from solhier.errors import ConfigurationError, StructuralError, UnsupportedOperationError
from solhier.lie import (AlgebraDescriptor, CartanData, InvolutionSpec, NestedDecomposition, Subspace, bracket,
                         diagonal_cartan, eigenspace_split, iwasawa_project, iwasawa_subspaces, onn_algebra,
                         onn_cartan, real_form, signature_matrix, sl_real_algebra, su2_so2_algebra,
                         su_algebra, unvec, vec)

seeds = st.integers(0, 2 ** 32 - 1)
ALGEBRAS = [su_algebra(2), su_algebra(3), su2_so2_algebra(), sl_real_algebra(3), onn_algebra(2), onn_algebra(3)]


def test_bracket_rejects_mismatched_shapes():
    with pytest.raises(StructuralError):
        bracket(np.eye(2), np.eye(3))


@given(seeds)
def test_bracket_is_antisymmetric_and_satisfies_jacobi(seed):
    r = np.random.default_rng(seed)
    X, Y, Z = r.standard_normal((3, 4, 4)) + 1j * r.standard_normal((3, 4, 4))
    assert np.allclose(bracket(X, Y), -bracket(Y, X))
    jac = bracket(X, bracket(Y, Z)) + bracket(Y, bracket(Z, X)) + bracket(Z, bracket(X, Y))
    assert np.max(np.abs(jac)) < 1e-12


@given(seeds)
def test_vec_roundtrip(seed):
    r = np.random.default_rng(seed)
    X = r.standard_normal((2, 3, 3)) + 1j * r.standard_normal((2, 3, 3))
    assert np.array_equal(unvec(vec(X), 3), X)


@pytest.mark.parametrize("alg", ALGEBRAS, ids=lambda a: repr(a))
def test_involutions_are_involutive_automorphisms(alg, rng):
    X, Y = alg.random(rng, 2)
    for inv in alg.involutions.values():
        assert np.max(np.abs(inv(inv(X)) - X)) < 1e-12
        assert np.max(np.abs(inv(bracket(X, Y)) - bracket(inv(X), inv(Y)))) < 1e-12
        assert alg.check(inv(X))
    assert alg.commutation_defect(rng, 10) < 1e-12


@pytest.mark.parametrize("alg,dim", [(su_algebra(2), 3), (su_algebra(3), 8), (sl_real_algebra(3), 8),
                                     (onn_algebra(2), 6), (onn_algebra(3), 15)])
def test_real_form_dimensions(alg, dim):
    assert real_form(alg).dim == dim


def test_unknown_algebra_and_foreign_involution():
    with pytest.raises(ConfigurationError):
        AlgebraDescriptor("sp", 2)
    alg = su_algebra(2)
    with pytest.raises(StructuralError):
        alg.register(InvolutionSpec("bad", np.eye(3)))
    with pytest.raises(StructuralError):
        alg.involution("sigma")


def test_involution_serialization_roundtrip():
    inv = onn_algebra(2).involution("sigma2")
    back = InvolutionSpec.from_dict(inv.to_dict())
    X = onn_algebra(2).random(np.random.default_rng(0))
    assert np.allclose(back(X), inv(X))
    alg = AlgebraDescriptor.from_dict(onn_algebra(2).to_dict())
    assert set(alg.involutions) == {"tau", "sigma1", "sigma2"}


def test_eigenspace_split_parts_are_eigenvectors(rng):
    s1 = onn_algebra(2).involution("sigma1")
    X = onn_algebra(2).random(rng)
    k, p = eigenspace_split(s1, X)
    assert np.allclose(k + p, X)
    assert np.allclose(s1(k), k) and np.allclose(s1(p), -p)


def test_subspace_projector_is_orthogonal_and_idempotent(rng):
    U = real_form(su_algebra(3))
    P = U.projector()
    assert np.allclose(P @ P, P) and np.allclose(P, P.T)
    X = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
    Y = U.project(X)
    assert U.contains(Y)
    assert np.allclose(Y, -np.conj(Y.T)) and abs(np.trace(Y)) < 1e-12


def test_subspace_sum_intersection_and_complement():
    K, B = iwasawa_subspaces(3)
    total = K + B
    assert total.dim == K.dim + B.dim == 8
    assert K.intersect(B).dim == 0
    assert B.orth_complement(total).dim == K.dim


@given(seeds)
def test_iwasawa_split(seed):
    r = np.random.default_rng(seed)
    X = r.standard_normal((3, 3))
    X -= np.trace(X) / 3 * np.eye(3)
    k, b = iwasawa_project(X)
    assert np.allclose(k + b, X)
    assert np.allclose(k, -k.T)
    assert np.allclose(np.tril(b, -1), 0)


def test_iwasawa_requires_registered_data():
    with pytest.raises(UnsupportedOperationError):
        iwasawa_project(np.eye(2), su_algebra(2))


def test_ad_inverse_on_the_perp_space(rng):
    U = real_form(su_algebra(3))
    cartan = diagonal_cartan([[1j, -1j, 0], [1j, 1j, -2j]], U)
    Y = cartan.perp_part(U.project(rng.standard_normal((3, 3)) + 0j))
    X = cartan.ad_inv(Y)
    assert np.max(np.abs(bracket(cartan.a1, X) - Y)) < 1e-12
    assert cartan.perp.contains(X)


def test_non_regular_element_is_rejected():
    U = real_form(su_algebra(3))
    with pytest.raises(ConfigurationError):
        diagonal_cartan([[1j, 1j, -2j]], U)


def test_non_commuting_basis_is_rejected():
    U = real_form(su_algebra(2))
    X = np.array([[0, 1], [-1, 0]], complex)
    with pytest.raises(ConfigurationError):
        CartanData([np.diag([1j, -1j]), X], U)


@pytest.mark.parametrize("n", [2, 3, 4])
def test_nested_decomposition_structure(n):
    nd = NestedDecomposition(onn_algebra(n))
    assert nd.K1.dim == n * (n - 1)
    assert nd.S1.dim + nd.S2.dim + nd.Q1.dim == nd.K1.dim
    assert nd.sum.total.dim == nd.U.dim
    # K1' vanishes on the first n rows and columns, K2' on the last n - 1
    for M in nd.K1p.matrices():
        assert np.allclose(M[:n, :], 0) and np.allclose(M[:, :n], 0)
    for M in nd.K2p.matrices():
        assert np.allclose(M[n + 1:, :], 0) and np.allclose(M[:, n + 1:], 0)


def test_nested_components_reconstruct(rng):
    nd = NestedDecomposition(onn_algebra(3))
    X = nd.U.project(rng.standard_normal((6, 6)) + 0j)
    assert np.allclose(sum(nd.nested_project(X)), X)


def test_onn_cartan_is_regular_and_in_p1():
    c = onn_cartan(3)
    nd = NestedDecomposition(onn_algebra(3))
    for a in c.basis:
        assert nd.P1.contains(a)
    assert c.is_regular()
    assert np.allclose(signature_matrix(1, 2), np.diag([1, -1, -1]))
