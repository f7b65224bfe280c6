"""Laurent-band loop algebra elements and the five splittings ``L = L+ + L-``.

A :class:`LoopElement` stores the coefficients ``xi_lo, ..., xi_hi`` of
``xi(lambda) = sum_j xi_j lambda^j`` as one array of shape
``(hi - lo + 1, *grid, N, N)``; the optional grid axes let the same object
hold a loop-valued field sampled on a spatial grid.
"""

from __future__ import annotations

import json

import numpy as np

from .errors import ConfigurationError, DomainError, ResourceError, StructuralError
from .lie import (AlgebraDescriptor, CartanData, InvolutionSpec, NestedDecomposition, Subspace,
                  bracket, iwasawa_project, iwasawa_subspaces, real_form)

MAX_BAND = 64


class LoopElement:
    """An immutable finite Laurent band of matrix coefficients."""

    __slots__ = ("coeffs", "lo", "algebra", "max_band")

    def __init__(self, coeffs, lo: int, algebra: AlgebraDescriptor | None = None, max_band: int = MAX_BAND):
        c = np.array(coeffs, dtype=complex)
        if c.ndim < 3 or c.shape[-1] != c.shape[-2]:
            raise StructuralError(f"coefficients must have shape (deg, ..., N, N), got {c.shape}")
        if c.shape[0] > max_band:
            raise ResourceError(f"band width {c.shape[0]} exceeds the maximum {max_band}")
        c.setflags(write=False)
        self.coeffs = c
        self.lo = int(lo)
        self.algebra = algebra
        self.max_band = max_band

    # construction -----------------------------------------------------
    @classmethod
    def from_dict(cls, terms: dict, algebra=None, grid_shape=(), N=None):
        """Build from ``{degree: matrix}``."""
        if not terms:
            if N is None:
                raise StructuralError("empty loop needs an explicit matrix size")
            return cls(np.zeros((1, *grid_shape, N, N)), 0, algebra)
        lo, hi = min(terms), max(terms)
        first = np.asarray(next(iter(terms.values())))
        c = np.zeros((hi - lo + 1,) + first.shape, complex)
        for d, m in terms.items():
            c[d - lo] = m
        return cls(c, lo, algebra)

    @classmethod
    def monomial(cls, X, degree: int, algebra=None):
        X = np.asarray(X, dtype=complex)
        return cls(X[None], degree, algebra)

    @classmethod
    def zeros_like(cls, other: "LoopElement"):
        return cls(np.zeros_like(other.coeffs[:1]), 0, other.algebra)

    # basic accessors --------------------------------------------------
    @property
    def hi(self) -> int:
        return self.lo + self.coeffs.shape[0] - 1

    @property
    def N(self) -> int:
        return self.coeffs.shape[-1]

    @property
    def grid_shape(self):
        return self.coeffs.shape[1:-2]

    @property
    def degrees(self):
        return range(self.lo, self.hi + 1)

    def coeff(self, j: int):
        if self.lo <= j <= self.hi:
            return self.coeffs[j - self.lo]
        return np.zeros(self.coeffs.shape[1:], complex)

    def terms(self):
        return {j: self.coeffs[j - self.lo] for j in self.degrees}

    def with_band(self, lo: int, hi: int) -> "LoopElement":
        """Re-express on the band ``[lo, hi]``; dropping nonzero coefficients is an error."""
        if hi < lo:
            raise StructuralError("empty band")
        for j in self.degrees:
            if (j < lo or j > hi) and np.any(self.coeff(j) != 0):
                raise StructuralError(f"coefficient of degree {j} is nonzero outside [{lo}, {hi}]")
        c = np.zeros((hi - lo + 1,) + self.coeffs.shape[1:], complex)
        for j in range(max(lo, self.lo), min(hi, self.hi) + 1):
            c[j - lo] = self.coeff(j)
        return LoopElement(c, lo, self.algebra, max(self.max_band, hi - lo + 1))

    def truncate(self, lo: int | None = None, hi: int | None = None) -> "LoopElement":
        """Keep only degrees in ``[lo, hi]`` (explicit, never silent)."""
        lo = self.lo if lo is None else lo
        hi = self.hi if hi is None else hi
        c = np.zeros((hi - lo + 1,) + self.coeffs.shape[1:], complex)
        for j in range(max(lo, self.lo), min(hi, self.hi) + 1):
            c[j - lo] = self.coeff(j)
        return LoopElement(c, lo, self.algebra, self.max_band)

    def trim(self, tol=0.0) -> "LoopElement":
        """Drop leading and trailing coefficients with max-abs ``<= tol``."""
        mags = np.abs(self.coeffs).reshape(self.coeffs.shape[0], -1).max(axis=1)
        nz = np.nonzero(mags > tol)[0]
        if nz.size == 0:
            return LoopElement(np.zeros_like(self.coeffs[:1]), 0, self.algebra, self.max_band)
        return LoopElement(self.coeffs[nz[0]:nz[-1] + 1], self.lo + nz[0], self.algebra, self.max_band)

    # arithmetic -------------------------------------------------------
    def _aligned(self, other: "LoopElement"):
        if self.coeffs.shape[1:] != other.coeffs.shape[1:]:
            raise StructuralError(f"incompatible coefficient shapes {self.coeffs.shape[1:]} "
                                  f"and {other.coeffs.shape[1:]}")
        lo, hi = min(self.lo, other.lo), max(self.hi, other.hi)
        a = self.with_band(lo, hi).coeffs
        b = other.with_band(lo, hi).coeffs
        return a, b, lo

    def __add__(self, other):
        a, b, lo = self._aligned(other)
        return LoopElement(a + b, lo, self.algebra or other.algebra, max(self.max_band, other.max_band))

    def __sub__(self, other):
        a, b, lo = self._aligned(other)
        return LoopElement(a - b, lo, self.algebra or other.algebra, max(self.max_band, other.max_band))

    def __neg__(self):
        return LoopElement(-self.coeffs, self.lo, self.algebra, self.max_band)

    def __mul__(self, s):
        return LoopElement(self.coeffs * s, self.lo, self.algebra, self.max_band)

    __rmul__ = __mul__

    def map(self, f) -> "LoopElement":
        """Apply a coefficient-wise linear map."""
        return LoopElement(f(self.coeffs), self.lo, self.algebra, self.max_band)

    def conjugate_by(self, g, ginv=None) -> "LoopElement":
        """``g xi g^{-1}`` for a constant (or grid-valued) matrix ``g``."""
        ginv = np.linalg.inv(g) if ginv is None else ginv
        return self.map(lambda c: g @ c @ ginv)

    def evaluate(self, lam):
        """Values at ``lam`` (scalar or 1-d array); output ``(len(lam), *grid, N, N)``."""
        lam = np.asarray(lam, dtype=complex)
        scalar = lam.ndim == 0
        lam = np.atleast_1d(lam)
        if self.lo < 0 and np.any(lam == 0):
            raise DomainError("cannot evaluate a loop with negative degrees at lambda = 0")
        powers = lam[:, None] ** np.arange(self.lo, self.hi + 1)[None, :]
        out = np.tensordot(powers, self.coeffs, axes=(1, 0))
        return out[0] if scalar else out

    def at_one(self):
        """The literal finite sum of coefficients ``xi(1)``."""
        return self.coeffs.sum(axis=0)

    def norm(self):
        return float(np.linalg.norm(self.coeffs))

    def __repr__(self):
        return f"LoopElement(band=[{self.lo}, {self.hi}], N={self.N}, grid={self.grid_shape})"

    # serialization ----------------------------------------------------
    def to_json(self) -> str:
        d = {"algebra": self.algebra.to_dict() if self.algebra is not None else None,
             "lo": self.lo, "shape": list(self.coeffs.shape[1:]),
             "coeffs": {str(j): {"re": self.coeff(j).real.ravel().tolist(),
                                 "im": self.coeff(j).imag.ravel().tolist()} for j in self.degrees}}
        return json.dumps(d)

    @classmethod
    def from_json(cls, s: str) -> "LoopElement":
        d = json.loads(s)
        alg = AlgebraDescriptor.from_dict(d["algebra"]) if d.get("algebra") else None
        shape = tuple(d["shape"])
        lo = int(d["lo"])
        degs = sorted(int(k) for k in d["coeffs"])
        c = np.zeros((len(degs),) + shape, complex)
        for j in degs:
            e = d["coeffs"][str(j)]
            c[j - lo] = (np.array(e["re"], float) + 1j * np.array(e["im"], float)).reshape(shape)
        return cls(c, lo, alg)


def loop_bracket(xi: LoopElement, eta: LoopElement, max_band: int | None = None) -> LoopElement:
    """Degree-wise convolution of matrix brackets; band ``[lo1 + lo2, hi1 + hi2]``."""
    if xi.coeffs.shape[1:] != eta.coeffs.shape[1:]:
        raise StructuralError("loop elements have incompatible coefficient shapes")
    if xi.algebra is not None and eta.algebra is not None and xi.algebra.label != eta.algebra.label:
        raise StructuralError("loop elements live in different algebras")
    max_band = max_band or max(xi.max_band, eta.max_band)
    width = xi.coeffs.shape[0] + eta.coeffs.shape[0] - 1
    if width > max_band:
        raise ResourceError(f"bracket band width {width} exceeds the maximum {max_band}")
    out = np.zeros((width,) + xi.coeffs.shape[1:], complex)
    for a in range(xi.coeffs.shape[0]):
        A = xi.coeffs[a]
        for b in range(eta.coeffs.shape[0]):
            out[a + b] += bracket(A, eta.coeffs[b])
    return LoopElement(out, xi.lo + eta.lo, xi.algebra or eta.algebra, max_band)


def loop_product(xi: LoopElement, eta: LoopElement) -> LoopElement:
    """Matrix product of two bands (used for group-level truncated loops)."""
    width = xi.coeffs.shape[0] + eta.coeffs.shape[0] - 1
    out = np.zeros((width,) + xi.coeffs.shape[1:], complex)
    for a in range(xi.coeffs.shape[0]):
        for b in range(eta.coeffs.shape[0]):
            out[a + b] += xi.coeffs[a] @ eta.coeffs[b]
    return LoopElement(out, xi.lo + eta.lo, xi.algebra or eta.algebra, max(width, xi.max_band))


def transform(inv: InvolutionSpec, xi: LoopElement) -> LoopElement:
    """The loop involution induced by ``inv`` and its lambda action.

    ``lambda``: ``tau(xi(conj lambda))`` (for conjugate-linear ``tau``),
    ``-lambda``: ``s(xi(-lambda))``, ``1/lambda``: ``s(xi(1/lambda))``,
    ``-1/lambda``: ``s(xi(-1/lambda))``.
    """
    act = inv.lambda_action
    c = inv(xi.coeffs)
    if act == "lambda":
        return LoopElement(c, xi.lo, xi.algebra, xi.max_band)
    if act == "-lambda":
        signs = (-1.0) ** np.arange(xi.lo, xi.hi + 1)
        return LoopElement(c * signs.reshape((-1,) + (1,) * (c.ndim - 1)), xi.lo, xi.algebra, xi.max_band)
    flipped = c[::-1]
    if act == "-1/lambda":
        signs = (-1.0) ** np.arange(-xi.hi, -xi.lo + 1)
        flipped = flipped * signs.reshape((-1,) + (1,) * (c.ndim - 1))
    return LoopElement(flipped, -xi.hi, xi.algebra, xi.max_band)


def _defect(xi: LoopElement, inv: InvolutionSpec) -> float:
    """Half the norm of ``xi - inv(xi)`` (the norm of the anti-invariant part)."""
    return 0.5 * (xi - transform(inv, xi)).norm()


# --------------------------------------------------------------------------
# splitting families
# --------------------------------------------------------------------------

class Family:
    """Common interface of the five splittings.

    Subclasses define the big algebra ``L`` through reality and twist
    conditions, the two subalgebras ``L+`` and ``L-`` and the projections.
    ``eps`` records the radius of the annulus on which the twisted loops are
    defined; with finite bands it is documentation only.
    """

    name = "abstract"
    twisted = False
    odd_degrees_only = False

    def __init__(self, algebra: AlgebraDescriptor, cartan: CartanData | None = None, eps: float | None = None):
        self.algebra = algebra
        self.cartan = cartan
        self.eps = eps
        self.N = algebra.size

    # conditions shared by L, L+ and L- --------------------------------
    def reality_conditions(self) -> list[InvolutionSpec]:
        return []

    def base_defects(self, xi: LoopElement) -> list[float]:
        d = [float(np.linalg.norm(self.algebra.identity_defect(xi.coeffs)))]
        d += [_defect(xi, inv) for inv in self.reality_conditions()]
        return d

    def plus_defects(self, xi: LoopElement) -> list[float]:
        raise NotImplementedError

    def minus_defects(self, xi: LoopElement) -> list[float]:
        raise NotImplementedError

    def membership(self, kind: str, xi: LoopElement) -> float:
        """Aggregate (2-norm) defect of ``xi`` from ``L``, ``L+`` or ``L-``."""
        d = self.base_defects(xi)
        if kind == "L+":
            d += self.plus_defects(xi)
        elif kind == "L-":
            d += self.minus_defects(xi)
        elif kind != "L":
            raise DomainError(f"unknown subalgebra kind {kind!r}")
        return float(np.sqrt(np.sum(np.square(d))))

    def check_member(self, xi: LoopElement, tol=1e-10):
        r = self.membership("L", xi)
        if r > tol * max(1.0, xi.norm()):
            raise DomainError(f"loop is not in the {self.name} algebra (residual {r:.3e})")

    def project_split(self, xi: LoopElement, check=True):
        if check:
            self.check_member(xi)
        return self._split(xi)

    def _split(self, xi):
        raise NotImplementedError

    def plus(self, xi: LoopElement, check=False) -> LoopElement:
        return self.project_split(xi, check)[0]

    def vacuum_generator(self, i: int, j: int) -> LoopElement:
        raise NotImplementedError

    def random_member(self, rng, lo: int, hi: int) -> LoopElement:
        raise NotImplementedError

    def __repr__(self):
        return f"{type(self).__name__}({self.algebra.label})"


def _neg_norm(xi: LoopElement, below: int) -> float:
    """Norm of coefficients with degree ``< below``."""
    return float(np.sqrt(sum(np.linalg.norm(xi.coeff(j)) ** 2 for j in xi.degrees if j < below)))


def _pos_norm(xi: LoopElement, above: int) -> float:
    return float(np.sqrt(sum(np.linalg.norm(xi.coeff(j)) ** 2 for j in xi.degrees if j > above)))


class StandardFamily(Family):
    """``L+`` = polynomial part (degrees >= 0), ``L-`` = degrees <= -1; no reality condition."""

    name = "standard"

    def plus_defects(self, xi):
        return [_neg_norm(xi, 0)]

    def minus_defects(self, xi):
        return [_pos_norm(xi, -1)]

    def _split(self, xi):
        hi = max(xi.hi, 0)
        lo = min(xi.lo, -1)
        full = xi.with_band(lo, hi).coeffs
        plus = LoopElement(full[-lo:], 0, xi.algebra, xi.max_band)
        minus = LoopElement(full[:-lo], lo, xi.algebra, xi.max_band)
        return plus, minus

    def vacuum_generator(self, i, j):
        if j < 1:
            raise DomainError("vacuum generators have positive degree")
        return LoopElement.monomial(self.cartan.basis[i - 1], j, self.algebra)

    def coefficient_space(self, j: int) -> Subspace:
        return self.algebra.ambient()

    def random_member(self, rng, lo, hi):
        c = np.stack([self.coefficient_space(j).project(
            rng.standard_normal((self.N, self.N)) + 1j * rng.standard_normal((self.N, self.N)))
            for j in range(lo, hi + 1)])
        return LoopElement(c, lo, self.algebra)


class TauFamily(StandardFamily):
    """Standard splitting restricted to loops with coefficients in the real form ``U``."""

    name = "tau"

    def __init__(self, algebra, cartan=None, eps=None):
        super().__init__(algebra, cartan, eps)
        self.U = real_form(algebra)

    def reality_conditions(self):
        return [self.algebra.involution("tau")]

    def coefficient_space(self, j):
        return self.U


class TauSigmaFamily(TauFamily):
    """``U/K`` splitting: even coefficients in ``K``, odd coefficients in ``P``."""

    name = "tau-sigma"
    odd_degrees_only = True

    def __init__(self, algebra, cartan=None, eps=None):
        super().__init__(algebra, cartan, eps)
        self.K = algebra.fixed_space("sigma", self.U)
        self.P = algebra.anti_space("sigma", self.U)

    def reality_conditions(self):
        return [self.algebra.involution("tau"), self.algebra.involution("sigma")]

    def coefficient_space(self, j):
        return self.K if j % 2 == 0 else self.P

    def vacuum_generator(self, i, j):
        if j % 2 == 0:
            raise DomainError("the U/K hierarchy only has odd-degree generators")
        return super().vacuum_generator(i, j)


class TwistedUFamily(Family):
    """Twisted splitting of ``L^{tau}`` for ``sl(n,R)`` with ``sigma(X) = -X^T``.

    ``L+`` consists of loops with ``xi_{-j} = sigma(xi_j)``; ``L-`` of loops
    with degrees ``<= 0`` and ``xi_0`` upper triangular.
    """

    name = "twisted-U"
    twisted = True

    def __init__(self, algebra, cartan=None, eps=0.5):
        super().__init__(algebra, cartan, eps)
        self.U = real_form(algebra)
        self.sigma = algebra.involution("sigma")
        self.K, self.B = iwasawa_subspaces(algebra.n)

    def reality_conditions(self):
        return [self.algebra.involution("tau")]

    def plus_defects(self, xi):
        return [_defect(xi, self.sigma)]

    def minus_defects(self, xi):
        return [_pos_norm(xi, 0), float(np.linalg.norm(self.B.residual(xi.coeff(0))))]

    def _split(self, xi):
        h = max(xi.hi, -xi.lo, 0)
        A = xi.with_band(-h, h)
        k0, b0 = iwasawa_project(A.coeff(0))
        plus = np.zeros((2 * h + 1,) + A.coeffs.shape[1:], complex)
        minus = np.zeros((h + 1,) + A.coeffs.shape[1:], complex)
        plus[h] = k0
        minus[h] = b0
        for j in range(1, h + 1):
            Aj = A.coeff(j)
            sAj = self.sigma(Aj)
            plus[h + j] = Aj
            plus[h - j] = sAj
            minus[h - j] = A.coeff(-j) - sAj
        return (LoopElement(plus, -h, xi.algebra, xi.max_band),
                LoopElement(minus, -h, xi.algebra, xi.max_band))

    def vacuum_generator(self, i, j):
        if j < 1:
            raise DomainError("vacuum generators have positive degree")
        a = self.cartan.basis[i - 1]
        return LoopElement.from_dict({j: a, -j: self.sigma(a)}, self.algebra)

    def random_member(self, rng, lo, hi):
        c = np.stack([self.U.project(rng.standard_normal((self.N, self.N)) + 0j) for _ in range(lo, hi + 1)])
        return LoopElement(c, lo, self.algebra)


class TwistedUKFamily(Family):
    """Twisted ``U/K`` splitting for ``o(n,n)`` with ``sigma1``, ``sigma2``.

    ``L``: real coefficients, ``sigma1(xi(-lambda)) = xi(lambda)``.
    ``L+``: additionally ``xi_{-j} = sigma2(xi_j)`` and ``xi(1)`` in ``K2'``.
    ``L-``: degrees ``<= 0`` and ``xi_0`` in ``K1'``.
    """

    name = "twisted-U/K"
    twisted = True
    odd_degrees_only = True

    def __init__(self, algebra, cartan=None, eps=0.5, nested: NestedDecomposition | None = None):
        super().__init__(algebra, cartan, eps)
        self.nested = nested if nested is not None else NestedDecomposition(algebra)
        self.U = self.nested.U
        self.sigma1 = algebra.involution("sigma1")
        self.sigma2 = algebra.involution("sigma2")

    def reality_conditions(self):
        return [self.algebra.involution("tau"), self.sigma1]

    def plus_defects(self, xi):
        return [_defect(xi, self.sigma2), float(np.linalg.norm(self.nested.K2p.residual(xi.at_one())))]

    def minus_defects(self, xi):
        r0 = self.nested.K1p.residual(xi.coeff(0))
        return [_pos_norm(xi, 0), float(np.linalg.norm(r0))]

    def xi0_eta0(self, xi: LoopElement):
        """The degree-zero parts ``(xi_0, eta_0)`` of ``pi_+`` and ``pi_-``."""
        D = self.nested
        A0 = xi.coeff(0)
        even = np.zeros_like(A0)
        for j in xi.degrees:
            if j > 0 and j % 2 == 0:
                Aj = xi.coeff(j)
                even = even + Aj + self.sigma2(Aj)
        s1 = D.sum.component(A0, "s1")
        s2 = -D.sum.component(even, "s2")
        xi0 = s1 + s2
        return xi0, A0 - xi0

    def _split(self, xi):
        h = max(xi.hi, -xi.lo, 0)
        A = xi.with_band(-h, h)
        xi0, eta0 = self.xi0_eta0(A)
        plus = np.zeros((2 * h + 1,) + A.coeffs.shape[1:], complex)
        minus = np.zeros((h + 1,) + A.coeffs.shape[1:], complex)
        plus[h] = xi0
        minus[h] = eta0
        for j in range(1, h + 1):
            Aj = A.coeff(j)
            sAj = self.sigma2(Aj)
            plus[h + j] = Aj
            plus[h - j] = sAj
            minus[h - j] = A.coeff(-j) - sAj
        return (LoopElement(plus, -h, xi.algebra, xi.max_band),
                LoopElement(minus, -h, xi.algebra, xi.max_band))

    def vacuum_generator(self, i, j):
        if j < 1 or j % 2 == 0:
            raise DomainError("the twisted U/K hierarchy only has odd positive degrees")
        a = self.cartan.basis[i - 1] if i > 0 else self.cartan.a1
        return LoopElement.from_dict({j: a, -j: self.sigma2(a)}, self.algebra)

    def coefficient_space(self, j):
        return self.nested.K1 if j % 2 == 0 else self.nested.P1

    def random_member(self, rng, lo, hi):
        c = np.stack([self.coefficient_space(j).project(rng.standard_normal((self.N, self.N)) + 0j)
                      for j in range(lo, hi + 1)])
        return LoopElement(c, lo, self.algebra)


FAMILIES = {"standard": StandardFamily, "tau": TauFamily, "tau-sigma": TauSigmaFamily,
            "twisted-U": TwistedUFamily, "twisted-U/K": TwistedUKFamily}


def project_split(family: Family, xi: LoopElement):
    """``(xi_+, xi_-)`` with ``xi = xi_+ + xi_-``."""
    return family.project_split(xi)


def membership(family: Family, kind: str, xi: LoopElement) -> float:
    return family.membership(kind, xi)


def vacuum_generator(family: Family, i: int, j: int) -> LoopElement:
    """``J_{i,j}``; index ``i = 0`` selects the regular element when it is not a basis vector."""
    return family.vacuum_generator(i, j)


def make_family(name: str, n: int = 2, **kw) -> Family:
    """Factory for the canonical instances used throughout the package.

    ``standard`` and ``tau`` use ``sl(n,C)`` / ``su(n)`` with a diagonal
    regular ``a_1``; ``tau-sigma`` uses ``su(2)/so(2)``; ``twisted-U`` uses
    ``sl(n,R)``; ``twisted-U/K`` uses ``o(n,n)``.
    """
    from .lie import (diagonal_cartan, onn_algebra, onn_cartan, sl_real_algebra, su2_so2_algebra,
                      su_algebra)
    if name in ("standard", "tau"):
        alg = su_algebra(n)
        d = kw.get("diag")
        if d is None:
            d = 1j * (np.arange(n) - (n - 1) / 2.0) if n > 2 else np.array([1j, -1j])
        d = np.asarray(d, complex)
        basis = _diagonal_basis(n, d)
        amb = alg.ambient() if name == "standard" else real_form(alg)
        cartan = diagonal_cartan(basis, amb, complex_span=(name == "standard"))
        return (StandardFamily if name == "standard" else TauFamily)(alg, cartan)
    if name == "tau-sigma":
        alg = su2_so2_algebra()
        fam = TauSigmaFamily(alg)
        fam.cartan = diagonal_cartan([[1j, -1j]], fam.U)
        return fam
    if name == "twisted-U":
        alg = sl_real_algebra(n)
        d = np.asarray(kw.get("diag", np.arange(n) - (n - 1) / 2.0), complex)
        basis = _diagonal_basis(n, d)
        fam = TwistedUFamily(alg)
        fam.cartan = diagonal_cartan(basis, fam.U)
        return fam
    if name == "twisted-U/K":
        alg = onn_algebra(n)
        fam = TwistedUKFamily(alg)
        fam.cartan = onn_cartan(n, kw.get("d"), fam.U)
        return fam
    raise ConfigurationError(f"unknown family {name!r}")


def _diagonal_basis(n, d):
    """A basis of the traceless diagonal matrices whose first element is ``diag(d)``."""
    basis = [d]
    for k in range(n - 1):
        e = np.zeros(n, complex)
        e[k], e[k + 1] = 1, -1
        e = e * (1j if np.iscomplexobj(d) and np.all(d.real == 0) else 1)
        basis.append(e)
    # keep a linearly independent subset of size n - 1
    out = []
    for b in basis:
        trial = np.array(out + [b])
        if np.linalg.matrix_rank(trial) == len(trial):
            out.append(b)
        if len(out) == n - 1:
            break
    return out
