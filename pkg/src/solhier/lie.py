"""Finite-dimensional matrix Lie algebras, involutions and subspace decompositions.

Matrices are complex ``(N, N)`` numpy arrays, and every function accepts
stacks ``(..., N, N)``.  Subspaces are *real* linear subspaces of
``C^{N x N}``, stored through the identification ``C^{N x N} = R^{2 N^2}``
(real parts followed by imaginary parts).  This lets compact real forms,
split real forms and complex subalgebras share one implementation.  The
inner product on that real space is ``Re tr(X Y^*)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigurationError, StructuralError, UnsupportedOperationError

RANK_TOL = 1e-9
MEMBER_TOL = 1e-10


def bracket(X, Y):
    """Lie bracket ``XY - YX``, broadcasting over leading axes."""
    X = np.asarray(X)
    Y = np.asarray(Y)
    if X.shape[-2:] != Y.shape[-2:] or X.shape[-1] != X.shape[-2]:
        raise StructuralError(f"cannot bracket shapes {X.shape} and {Y.shape}")
    return X @ Y - Y @ X


def signature_matrix(p, q):
    """``I_{p,q} = diag(1,...,1,-1,...,-1)`` with ``p`` plus and ``q`` minus signs."""
    return np.diag(np.r_[np.ones(p), -np.ones(q)]).astype(complex)


# --------------------------------------------------------------------------
# real vectorization
# --------------------------------------------------------------------------

def vec(X):
    """Map ``(..., N, N)`` complex matrices to ``(..., 2 N^2)`` real vectors."""
    X = np.asarray(X, dtype=complex)
    N = X.shape[-1]
    return np.concatenate([X.real.reshape(*X.shape[:-2], N * N),
                           X.imag.reshape(*X.shape[:-2], N * N)], axis=-1)


def unvec(v, N):
    """Inverse of :func:`vec`."""
    v = np.asarray(v, dtype=float)
    half = N * N
    re = v[..., :half].reshape(*v.shape[:-1], N, N)
    im = v[..., half:].reshape(*v.shape[:-1], N, N)
    return re + 1j * im


def real_matrix_of(op: Callable, N: int) -> np.ndarray:
    """Real ``2N^2 x 2N^2`` matrix of a real-linear map on ``C^{N x N}``."""
    dim = 2 * N * N
    basis = unvec(np.eye(dim), N)
    images = op(basis)
    return vec(images).T


# --------------------------------------------------------------------------
# subspaces
# --------------------------------------------------------------------------

class Subspace:
    """A real linear subspace of ``C^{N x N}`` with an orthonormal basis.

    ``basis`` has shape ``(k, 2 N^2)`` and orthonormal rows.  The orthogonal
    projector is taken with respect to ``Re tr(X Y^*)``.
    """

    def __init__(self, basis, N: int, name: str = ""):
        basis = np.asarray(basis, dtype=float).reshape(-1, 2 * N * N)
        if basis.shape[0]:
            u, s, vt = np.linalg.svd(basis, full_matrices=False)
            keep = s > RANK_TOL * max(1.0, s[0])
            basis = vt[keep]
        self.basis = basis
        self.N = N
        self.name = name

    # constructors -------------------------------------------------------
    @classmethod
    def span(cls, matrices, N=None, name=""):
        mats = np.asarray(matrices, dtype=complex)
        if N is None:
            N = mats.shape[-1]
        if mats.size == 0:
            return cls(np.zeros((0, 2 * N * N)), N, name)
        return cls(vec(mats.reshape(-1, N, N)), N, name)

    @classmethod
    def kernel(cls, op: Callable, N: int, within: "Subspace | None" = None, name=""):
        """Kernel of a real-linear map, optionally intersected with ``within``."""
        M = real_matrix_of(op, N)
        if within is None:
            B = np.eye(2 * N * N)
        else:
            B = within.basis
        if B.shape[0] == 0:
            return cls(np.zeros((0, 2 * N * N)), N, name)
        MB = M @ B.T
        _, s, vt = np.linalg.svd(MB)
        rank = int(np.sum(s > RANK_TOL * max(1.0, s[0] if s.size else 1.0)))
        null = vt[rank:]
        return cls(null @ B, N, name)

    @classmethod
    def image(cls, op: Callable, N: int, within: "Subspace", name=""):
        """Image of ``within`` under a real-linear map."""
        return cls.span(op(within.matrices()), N, name)

    # basic properties ---------------------------------------------------
    @property
    def dim(self) -> int:
        return self.basis.shape[0]

    def matrices(self):
        return unvec(self.basis, self.N)

    def projector(self):
        return self.basis.T @ self.basis

    def project(self, X):
        X = np.asarray(X, dtype=complex)
        c = vec(X) @ self.basis.T
        return unvec(c @ self.basis, self.N)

    def coords(self, X):
        return vec(X) @ self.basis.T

    def from_coords(self, c):
        return unvec(np.asarray(c) @ self.basis, self.N)

    def residual(self, X):
        """Norm of the component of ``X`` orthogonal to the subspace."""
        X = np.asarray(X, dtype=complex)
        return np.linalg.norm(vec(X - self.project(X)), axis=-1)

    def contains(self, X, tol=MEMBER_TOL):
        return bool(np.all(self.residual(X) < tol * max(1.0, float(np.max(np.abs(X))))))

    # lattice operations -------------------------------------------------
    def intersect(self, other: "Subspace", name=""):
        """``self ∩ other``, computed as the kernel of ``(I - P_other)`` on ``self``."""
        if self.dim == 0:
            return Subspace(self.basis, self.N, name)
        comp = self.basis - (self.basis @ other.basis.T) @ other.basis
        _, s, vt = np.linalg.svd(comp.T, full_matrices=True)
        rank = int(np.sum(s > RANK_TOL))
        null = vt[rank:]
        return Subspace(null @ self.basis, self.N, name)

    def __add__(self, other: "Subspace"):
        return Subspace(np.vstack([self.basis, other.basis]), self.N)

    def orth_complement(self, within: "Subspace", name=""):
        comp = within.basis - (within.basis @ self.basis.T) @ self.basis
        return Subspace(comp, self.N, name)

    def __repr__(self):
        return f"Subspace({self.name!r}, dim={self.dim}, N={self.N})"


class DirectSum:
    """Projections of a direct sum of subspaces onto its summands.

    The summands need not be mutually orthogonal; the components of ``X``
    are the unique coefficients along the concatenated bases, computed with
    a precomputed pseudo-inverse.
    """

    def __init__(self, parts: Sequence[Subspace], names: Sequence[str] | None = None):
        self.parts = list(parts)
        self.names = list(names) if names is not None else [p.name for p in parts]
        self.N = parts[0].N
        B = np.vstack([p.basis for p in self.parts])
        self.dims = [p.dim for p in self.parts]
        self.offsets = np.cumsum([0] + self.dims)
        s = np.linalg.svd(B, compute_uv=False) if B.size else np.zeros(0)
        if B.shape[0] and np.sum(s > RANK_TOL) != B.shape[0]:
            raise ConfigurationError(f"summands {self.names} are not independent")
        self._B = B
        self._pinv = np.linalg.pinv(B) if B.size else B.T
        self.total = Subspace(B, self.N, "+".join(self.names))

    def components(self, X):
        """List of components of ``X`` (assumed to lie in the span)."""
        c = vec(X) @ self._pinv
        out = []
        for k, p in enumerate(self.parts):
            ck = c[..., self.offsets[k]:self.offsets[k + 1]]
            out.append(unvec(ck @ p.basis, self.N))
        return out

    def component(self, X, name: str):
        k = self.names.index(name)
        c = vec(X) @ self._pinv[:, self.offsets[k]:self.offsets[k + 1]]
        return unvec(c @ self.parts[k].basis, self.N)

    def projector_matrices(self):
        """Real matrices of the oblique projectors onto each summand."""
        mats = []
        for k, p in enumerate(self.parts):
            sl = slice(self.offsets[k], self.offsets[k + 1])
            mats.append(self._pinv[:, sl] @ p.basis)
        return mats


# --------------------------------------------------------------------------
# algebras and involutions
# --------------------------------------------------------------------------

LAMBDA_ACTIONS = ("lambda", "-lambda", "1/lambda", "-1/lambda")


@dataclass(frozen=True)
class InvolutionSpec:
    """An involution ``X -> C op(X) C^{-1}`` of a matrix Lie algebra.

    ``op`` is the identity, ``X -> -X^T`` when ``transpose`` is set, and is
    preceded by complex conjugation when ``conjugate_linear`` is set.  The
    ``lambda_action`` records how the involution is paired with the loop
    parameter when it is used to cut out a loop subalgebra (``"lambda"`` for
    reality conditions ``tau(xi(conj lambda))``, ``"-lambda"`` for parity
    conditions and ``"1/lambda"`` for twisted mirror conditions).
    """

    symbol: str
    C: np.ndarray = field(repr=False)
    conjugate_linear: bool = False
    transpose: bool = False
    lambda_action: str = "lambda"

    def __post_init__(self):
        if self.lambda_action not in LAMBDA_ACTIONS:
            raise ConfigurationError(f"unknown lambda action {self.lambda_action!r}")
        C = np.asarray(self.C, dtype=complex)
        object.__setattr__(self, "C", C)
        object.__setattr__(self, "_Cinv", np.linalg.inv(C))

    def __call__(self, X):
        X = np.asarray(X, dtype=complex)
        if X.shape[-1] != self.C.shape[0]:
            raise StructuralError(f"involution {self.symbol} acts on size {self.C.shape[0]}")
        if self.conjugate_linear:
            X = X.conj()
        if self.transpose:
            X = -np.swapaxes(X, -1, -2)
        return self.C @ X @ self._Cinv

    def on_group(self, g):
        """The induced group involution (``g -> C g^{-T} C^{-1}`` in the transpose case)."""
        g = np.asarray(g, dtype=complex)
        if self.conjugate_linear:
            g = g.conj()
        if self.transpose:
            g = np.linalg.inv(np.swapaxes(g, -1, -2))
        return self.C @ g @ self._Cinv

    @property
    def acts_linearly_on_group(self):
        """True when the group involution is (real-)linear in the matrix entries."""
        return not self.transpose

    def to_dict(self):
        return {"symbol": self.symbol,
                "C_re": self.C.real.tolist(), "C_im": self.C.imag.tolist(),
                "conjugate_linear": self.conjugate_linear,
                "transpose": self.transpose, "lambda_action": self.lambda_action}

    @classmethod
    def from_dict(cls, d):
        C = np.asarray(d["C_re"], float) + 1j * np.asarray(d.get("C_im", np.zeros_like(d["C_re"])), float)
        return cls(d["symbol"], C, bool(d.get("conjugate_linear", False)),
                   bool(d.get("transpose", False)), d.get("lambda_action", "lambda"))


ALGEBRA_NAMES = ("sl", "gl", "o")


class AlgebraDescriptor:
    """A complex matrix Lie algebra ``sl(n,C)``, ``gl(n,C)`` or ``o(n,n,C)``.

    ``n`` is the parameter in the name; the matrix size is ``size`` (``2n``
    for ``o(n,n,C)``).  Involutions are registered by symbol.
    """

    def __init__(self, name: str, n: int, involutions: Sequence[InvolutionSpec] = ()):
        if name not in ALGEBRA_NAMES:
            raise ConfigurationError(f"unknown algebra {name!r}; expected one of {ALGEBRA_NAMES}")
        if n < 1:
            raise ConfigurationError("n must be positive")
        self.name = name
        self.n = n
        self.size = 2 * n if name == "o" else n
        if name == "o":
            self.form = signature_matrix(n, n)
        self.involutions = {}
        for inv in involutions:
            self.register(inv)
        self._ambient = None

    def register(self, inv: InvolutionSpec):
        if inv.C.shape != (self.size, self.size):
            raise StructuralError(f"involution {inv.symbol} has wrong size")
        self.involutions[inv.symbol] = inv
        return inv

    def involution(self, symbol: str) -> InvolutionSpec:
        try:
            return self.involutions[symbol]
        except KeyError:
            raise StructuralError(f"involution {symbol!r} not registered for {self}") from None

    @property
    def label(self):
        return {"sl": f"sl({self.n},C)", "gl": f"gl({self.n},C)", "o": f"o({self.n},{self.n},C)"}[self.name]

    def __repr__(self):
        return f"AlgebraDescriptor({self.label}, involutions={list(self.involutions)})"

    def identity_defect(self, X):
        """Residual of the defining identity (trace, or ``X^T I + I X``)."""
        X = np.asarray(X, dtype=complex)
        if self.name == "sl":
            return np.abs(np.trace(X, axis1=-2, axis2=-1))
        if self.name == "gl":
            return np.zeros(X.shape[:-2])
        t = np.swapaxes(X, -1, -2) @ self.form + self.form @ X
        return np.linalg.norm(t, axis=(-2, -1))

    def check(self, X, tol=1e-10):
        X = np.asarray(X)
        if X.shape[-2:] != (self.size, self.size):
            raise StructuralError(f"expected matrices of size {self.size}, got {X.shape}")
        return bool(np.all(self.identity_defect(X) < tol * max(1.0, float(np.max(np.abs(X))))))

    def ambient(self) -> Subspace:
        """The algebra as a real subspace of ``C^{N x N}``."""
        if self._ambient is None:
            N = self.size
            if self.name == "gl":
                self._ambient = Subspace(np.eye(2 * N * N), N, self.label)
            elif self.name == "sl":
                self._ambient = Subspace.kernel(
                    lambda X: np.trace(X, axis1=-2, axis2=-1)[..., None, None] * np.eye(N), N, name=self.label)
            else:
                I = self.form
                self._ambient = Subspace.kernel(
                    lambda X: np.swapaxes(X, -1, -2) @ I + I @ X, N, name=self.label)
        return self._ambient

    def random(self, rng, size=()):
        """Random elements of the complex algebra (projected Gaussian matrices)."""
        N = self.size
        shape = tuple(np.atleast_1d(size)) if size != () else ()
        X = rng.standard_normal(shape + (N, N)) + 1j * rng.standard_normal(shape + (N, N))
        return self.ambient().project(X)

    def fixed_space(self, symbol: str, within: Subspace | None = None) -> Subspace:
        inv = self.involution(symbol)
        base = self.ambient() if within is None else within
        return Subspace.kernel(lambda X: inv(X) - X, self.size, within=base, name=f"Fix({symbol})")

    def anti_space(self, symbol: str, within: Subspace | None = None) -> Subspace:
        inv = self.involution(symbol)
        base = self.ambient() if within is None else within
        return Subspace.kernel(lambda X: inv(X) + X, self.size, within=base, name=f"Anti({symbol})")

    def commutation_defect(self, rng, samples=50):
        """Largest ``|a(b(X)) - b(a(X))|`` over registered involution pairs."""
        syms = list(self.involutions)
        X = self.random(rng, samples)
        worst = 0.0
        for i, s in enumerate(syms):
            for t in syms[i + 1:]:
                a, b = self.involutions[s], self.involutions[t]
                worst = max(worst, float(np.max(np.abs(a(b(X)) - b(a(X))))))
        return worst

    def to_dict(self):
        return {"name": self.name, "n": self.n,
                "involutions": [inv.to_dict() for inv in self.involutions.values()]}

    @classmethod
    def from_dict(cls, d):
        return cls(d["name"], int(d["n"]), [InvolutionSpec.from_dict(i) for i in d.get("involutions", [])])


def apply_involution(spec: InvolutionSpec, X, algebra: AlgebraDescriptor | None = None):
    """Apply ``spec`` to ``X``; when ``algebra`` is given the spec must be registered there."""
    if algebra is not None:
        registered = algebra.involutions.get(spec.symbol)
        if registered is None or registered is not spec and not np.array_equal(registered.C, spec.C):
            raise StructuralError(f"involution {spec.symbol!r} not registered for {algebra.label}")
    return spec(X)


def eigenspace_split(spec: InvolutionSpec, X):
    """``(fixed part, anti part)`` via the projector formulas ``(X +- s(X))/2``."""
    X = np.asarray(X, dtype=complex)
    sX = spec(X)
    return 0.5 * (X + sX), 0.5 * (X - sX)


# --------------------------------------------------------------------------
# concrete algebras used by the hierarchies
# --------------------------------------------------------------------------

def su_algebra(n: int) -> AlgebraDescriptor:
    """``sl(n,C)`` with ``tau(X) = -X^*`` (real form ``su(n)``)."""
    tau = InvolutionSpec("tau", np.eye(n), conjugate_linear=True, transpose=True)
    return AlgebraDescriptor("sl", n, [tau])


def su2_so2_algebra() -> AlgebraDescriptor:
    """``su(2)`` with the Cartan involution complex conjugation (``K = so(2)``)."""
    alg = su_algebra(2)
    alg.register(InvolutionSpec("sigma", np.eye(2), conjugate_linear=True, lambda_action="-lambda"))
    return alg


def sl_real_algebra(n: int) -> AlgebraDescriptor:
    """``sl(n,C)`` with ``tau`` = complex conjugation and ``sigma(X) = -X^T``."""
    tau = InvolutionSpec("tau", np.eye(n), conjugate_linear=True)
    sigma = InvolutionSpec("sigma", np.eye(n), transpose=True, lambda_action="1/lambda")
    return AlgebraDescriptor("sl", n, [tau, sigma])


def onn_algebra(n: int) -> AlgebraDescriptor:
    """``o(n,n,C)`` with ``tau`` = conjugation, ``sigma1 = Ad I_{n,n}``, ``sigma2 = Ad I_{n+1,n-1}``."""
    if n < 2:
        raise ConfigurationError("o(n,n) nested decomposition needs n >= 2")
    N = 2 * n
    tau = InvolutionSpec("tau", np.eye(N), conjugate_linear=True)
    s1 = InvolutionSpec("sigma1", signature_matrix(n, n), lambda_action="-lambda")
    s2 = InvolutionSpec("sigma2", signature_matrix(n + 1, n - 1), lambda_action="1/lambda")
    return AlgebraDescriptor("o", n, [tau, s1, s2])


def real_form(alg: AlgebraDescriptor) -> Subspace:
    """Fixed space of ``tau`` (the real form ``U``), or the whole algebra if none."""
    if "tau" in alg.involutions:
        return alg.fixed_space("tau")
    return alg.ambient()


# --------------------------------------------------------------------------
# Cartan data
# --------------------------------------------------------------------------

class CartanData:
    """Commuting basis ``a_1..a_r`` of a maximal abelian subspace of ``ambient``.

    ``regular_index`` selects the element whose centralizer in ``ambient``
    must be exactly the span of the basis.  ``perp`` is the image of
    ``ad(a_reg)`` on ``ambient``, on which ``ad(a_reg)`` is invertible.
    """

    def __init__(self, basis, ambient: Subspace, tag: str = "U", regular_index: int = 0,
                 check_regular: bool = True, regular=None, complex_span: bool = False):
        self.basis = np.asarray(basis, dtype=complex)
        self._a1 = self.basis[regular_index] if regular is None else np.asarray(regular, dtype=complex)
        self.ambient = ambient
        self.tag = tag
        self.regular_index = regular_index
        self.N = self.basis.shape[-1]
        r = len(self.basis)
        for i in range(r):
            if ambient.residual(self.basis[i]) > 1e-10:
                raise ConfigurationError(f"a_{i + 1} is not in the ambient subspace {tag}")
            for j in range(i + 1, r):
                if np.linalg.norm(bracket(self.basis[i], self.basis[j])) > 1e-12:
                    raise ConfigurationError(f"a_{i + 1} and a_{j + 1} do not commute")
        span_mats = np.concatenate([self.basis, 1j * self.basis]) if complex_span else self.basis
        self.span = Subspace.span(span_mats, self.N, "A")
        if self.span.residual(self._a1) > 1e-10:
            raise ConfigurationError("regular element is not in the span of the basis")
        a1 = self.a1
        self.ad_rank = ambient.dim - Subspace.kernel(lambda X: bracket(a1, X), self.N, within=ambient).dim
        if check_regular and not self.is_regular():
            raise ConfigurationError(
                f"a_{regular_index + 1} is not regular: rank ad = {self.ad_rank}, "
                f"expected {ambient.dim - self.span.dim}")
        self.perp = Subspace.image(lambda X: bracket(a1, X), self.N, ambient, "A_perp")
        self.split = DirectSum([self.span, self.perp], ["A", "perp"])
        # matrix of ad(a1) on perp in the orthonormal perp basis
        Mb = self.perp.coords(bracket(a1, self.perp.matrices()))
        self._ad_perp_inv = np.linalg.inv(Mb)

    @property
    def a1(self):
        """The regular element (``a_1`` unless an explicit combination was given)."""
        return self._a1

    @property
    def rank(self):
        return len(self.basis)

    def is_regular(self):
        return self.ad_rank == self.ambient.dim - self.span.dim

    def a_part(self, X):
        return self.split.component(X, "A")

    def perp_part(self, X):
        return self.split.component(X, "perp")

    def ad_inv(self, Y):
        """Solve ``[a_1, X] = Y`` for ``X`` in ``perp``; ``Y`` must lie in ``perp``."""
        c = self.perp.coords(Y)
        return self.perp.from_coords(c @ self._ad_perp_inv)


# --------------------------------------------------------------------------
# Iwasawa data for sl(n, R)
# --------------------------------------------------------------------------

def iwasawa_project(X, algebra: AlgebraDescriptor | None = None):
    """Split real ``X`` in ``sl(n,R)`` as ``k + b`` with ``k`` antisymmetric, ``b`` upper triangular.

    ``k`` is built from the strictly lower part of ``X``.
    """
    if algebra is not None and not (algebra.name == "sl" and "sigma" in algebra.involutions
                                    and algebra.involutions["sigma"].transpose):
        raise UnsupportedOperationError(f"no Iwasawa data registered for {algebra}")
    X = np.asarray(X, dtype=complex)
    L = np.tril(X, -1)
    k = L - np.swapaxes(L, -1, -2)
    return k, X - k


def iwasawa_subspaces(n: int):
    """``(K, B)`` for ``sl(n,R)``: antisymmetric and upper-triangular traceless real matrices."""
    mats_k, mats_b = [], []
    for i in range(n):
        for j in range(n):
            E = np.zeros((n, n), complex)
            E[i, j] = 1
            if i < j:
                mats_k.append(E - E.T)
                mats_b.append(E)
    for i in range(n - 1):
        H = np.zeros((n, n), complex)
        H[i, i], H[i + 1, i + 1] = 1, -1
        mats_b.append(H)
    return Subspace.span(mats_k, n, "K"), Subspace.span(mats_b, n, "B")


# --------------------------------------------------------------------------
# nested decomposition for o(n,n)
# --------------------------------------------------------------------------

class NestedDecomposition:
    """Subspaces ``K1, P1, K2, P2, S1, S2, Q1, Q2, K1', K2'`` of ``U = o(n,n,R)``.

    ``S1 = o(n) x 0`` and ``S2 = 0 x o(n-1)`` (acting on the last ``n - 1``
    coordinates), which realize ``K1 ∩ K2 = S1 + S2`` as a direct sum of
    commuting ideals.
    """

    SUMMANDS = ("s1", "s2", "q1", "q2", "p")

    def __init__(self, algebra: AlgebraDescriptor, check=True):
        if algebra.name != "o":
            raise UnsupportedOperationError("nested decomposition is defined for o(n,n)")
        n, N = algebra.n, algebra.size
        self.algebra = algebra
        self.n = n
        U = real_form(algebra)
        self.U = U
        self.K1 = algebra.fixed_space("sigma1", U)
        self.P1 = algebra.anti_space("sigma1", U)
        self.K2 = algebra.fixed_space("sigma2", U)
        self.P2 = algebra.anti_space("sigma2", U)
        K12 = self.K1.intersect(self.K2, "K1∩K2")
        s1, s2 = [], []
        for i in range(n):
            for j in range(i + 1, n):
                E = np.zeros((N, N), complex)
                E[i, j], E[j, i] = 1, -1
                s1.append(E)
        for i in range(n + 1, N):
            for j in range(i + 1, N):
                E = np.zeros((N, N), complex)
                E[i, j], E[j, i] = 1, -1
                s2.append(E)
        self.S1 = Subspace.span(s1, N, "S1")
        self.S2 = Subspace.span(s2, N, "S2")
        self.Q1 = self.K1.intersect(self.P2, "Q1")
        self.Q2 = self.K2.intersect(self.P1, "Q2")
        self.K1p = (self.S2 + self.Q1)
        self.K1p.name = "K1'"
        self.K2p = (self.S1 + self.Q2)
        self.K2p.name = "K2'"
        self.PP = self.P1.intersect(self.P2, "P1∩P2")
        self.K12 = K12
        self.sum = DirectSum([self.S1, self.S2, self.Q1, self.Q2, self.PP], list(self.SUMMANDS))
        if check:
            self.validate()

    def validate(self, tol=1e-10):
        """Raise :class:`ConfigurationError` unless all structural identities hold."""
        n = self.n
        problems = []
        if self.K1.dim != n * (n - 1):
            problems.append(f"dim K1 = {self.K1.dim}")
        if self.S1.dim != n * (n - 1) // 2 or self.S2.dim != (n - 1) * (n - 2) // 2:
            problems.append("dim S1/S2")
        if self.sum.total.dim != self.U.dim:
            problems.append("summands do not span U")
        # K1 = S1 + S2 + Q1 with complementary projectors
        K1sum = DirectSum([self.S1, self.S2, self.Q1])
        P = K1sum.projector_matrices()
        PK1 = self.K1.projector()
        if np.linalg.norm(sum(P) - PK1) > tol:
            problems.append("K1 projectors do not sum to the K1 projector")
        for i in range(3):
            for j in range(3):
                if i != j and np.linalg.norm(P[i] @ P[j]) > tol:
                    problems.append("K1 projectors do not annihilate")
        mS1, mS2 = self.S1.matrices(), self.S2.matrices()
        if mS1.size and mS2.size:
            if np.max(np.abs(bracket(mS1[:, None], mS2[None]))) > 1e-12:
                problems.append("[S1, S2] != 0")
        if self.K12.dim != self.S1.dim + self.S2.dim or (self.S1 + self.S2).intersect(self.K12).dim != self.K12.dim:
            problems.append("K1 ∩ K2 != S1 + S2")
        if problems:
            raise ConfigurationError("inconsistent nested decomposition: " + "; ".join(problems))

    def nested_project(self, X):
        """Components ``(s1, s2, q1, q2, p)`` of ``X`` in ``U``."""
        return tuple(self.sum.components(X))

    def subspace(self, name: str) -> Subspace:
        table = {"K1": self.K1, "P1": self.P1, "K2": self.K2, "P2": self.P2, "S1": self.S1,
                 "S2": self.S2, "Q1": self.Q1, "Q2": self.Q2, "K1'": self.K1p, "K2'": self.K2p,
                 "U": self.U, "P1∩P2": self.PP}
        return table[name]


def onn_cartan(n: int, d=None, U: Subspace | None = None) -> CartanData:
    """``a_i = (1/2) [[0, e_ii], [e_ii, 0]]``, a maximal abelian subspace of ``P1``.

    The regular element is ``sum_i d_i a_i``; the default ``d = (1, 2, ..., n)``
    satisfies ``d_i != +-d_j``.
    """
    N = 2 * n
    basis = []
    for i in range(n):
        m = np.zeros((N, N), complex)
        m[i, n + i] = m[n + i, i] = 0.5
        basis.append(m)
    alg = onn_algebra(n)
    U = real_form(alg) if U is None else U
    d = np.arange(1, n + 1, dtype=float) if d is None else np.asarray(d, dtype=float)
    regular = sum(di * b for di, b in zip(d, basis))
    return CartanData(basis, U, tag="U", regular=regular)


def diagonal_cartan(diag_list, ambient: Subspace, tag="U", regular_index=0, check_regular=True,
                    complex_span=False):
    """Cartan data from a list of diagonal entries."""
    basis = [np.diag(np.asarray(d, dtype=complex)) for d in diag_list]
    return CartanData(basis, ambient, tag, regular_index, check_regular, complex_span=complex_span)
