"""Connection forms, curvature, frames and the Lax pairs of the first-order systems.

Curvature convention: for ``theta = sum_i theta_i dx_i``,

    F_ij = d_i theta_j - d_j theta_i + [theta_i, theta_j],

the coefficient of ``dx_i ^ dx_j`` in ``d theta + theta ^ theta``.  A frame
``E`` solves ``E^{-1} dE = theta`` with ``E = I`` at the base node.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg

from .errors import DomainError, FlatnessError, SingularityError, StructuralError, \
    UnsupportedOperationError
from .grid import Grid, fd4_derivative
from .lie import CartanData, InvolutionSpec, NestedDecomposition, Subspace, bracket, signature_matrix
from .loops import LoopElement

DEFAULT_LAMBDAS = (0.5, 1.0, 2.0, 0.9, 1.1)


# --------------------------------------------------------------------------
# connection forms
# --------------------------------------------------------------------------

@dataclass
class ConnectionForm:
    """Loop-valued 1-form on a grid: one :class:`LoopElement` per grid axis.

    Each component has coefficient arrays of shape ``(deg, *grid.shape, N, N)``.
    """

    grid: Grid
    components: tuple
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.components = tuple(self.components)
        if len(self.components) != self.grid.ndim:
            raise StructuralError("one component per grid axis is required")
        shapes = {c.coeffs.shape[1:] for c in self.components}
        if len(shapes) != 1:
            raise StructuralError("components do not share grid and matrix size")
        if next(iter(shapes))[:-2] != self.grid.shape:
            raise StructuralError("component samples do not match the grid")
        self._cache = {}

    @property
    def N(self):
        return self.components[0].N

    def evaluate(self, lam):
        """Matrix fields ``theta_i(lambda)`` for a single ``lambda``."""
        key = complex(lam)
        if key not in self._cache:
            self._cache[key] = [c.evaluate(lam) for c in self.components]
        return self._cache[key]

    def reality_defect(self, tau: InvolutionSpec, lams=DEFAULT_LAMBDAS):
        """``max |tau(theta(conj lambda)) - theta(lambda)|`` over sample ``lambda``."""
        worst = 0.0
        for lam in lams:
            lam = complex(lam) + 0.05j
            a = self.evaluate(lam)
            b = self.evaluate(np.conj(lam))
            for x, y in zip(a, b):
                worst = max(worst, float(np.max(np.abs(tau(y) - x))))
        return worst

    @classmethod
    def from_matrices(cls, grid: Grid, mats: Sequence[np.ndarray]):
        """A lambda-independent connection from matrix fields."""
        return cls(grid, [LoopElement(np.asarray(m, complex)[None], 0) for m in mats])


def curvature(theta: ConnectionForm, axes=(0, 1), lam=1.0):
    """``F_ij`` at ``lam`` sampled on the grid."""
    i, j = axes
    lam = complex(lam)
    if lam == 0 and any(c.lo < 0 for c in theta.components):
        raise DomainError("lambda = 0 is a pole of the connection")
    th = theta.evaluate(lam)
    g = theta.grid
    return g.d(th[j], i) - g.d(th[i], j) + bracket(th[i], th[j])


def curvature_norm(theta: ConnectionForm, lams=DEFAULT_LAMBDAS, trim: int = 0):
    """Largest curvature magnitude over all axis pairs and sample ``lambda``.

    ``trim`` drops that many nodes at every edge of every non-periodic axis.
    """
    worst = 0.0
    nd = theta.grid.ndim
    for lam in lams:
        for i in range(nd):
            for j in range(i + 1, nd):
                F = curvature(theta, (i, j), lam)
                worst = max(worst, float(np.max(np.abs(_interior(F, theta.grid, trim)))))
    return worst


def _interior(F, grid: Grid, trim):
    if trim <= 0:
        return F
    sl = []
    for k, ax in enumerate(grid.axes):
        if grid.axis_boundary(k) == "periodic":
            sl.append(slice(None))
        else:
            sl.append(slice(trim, ax.size - trim))
    return F[tuple(sl)]


# --------------------------------------------------------------------------
# frames
# --------------------------------------------------------------------------

GAUSS = (0.5 - np.sqrt(3) / 6, 0.5 + np.sqrt(3) / 6)


def _cubic_weights(s):
    """Lagrange weights at offset ``s`` in [0, 1] for nodes at -1, 0, 1, 2."""
    return np.array([-s * (s - 1) * (s - 2) / 6, (s + 1) * (s - 1) * (s - 2) / 2,
                     -(s + 1) * s * (s - 2) / 2, (s + 1) * s * (s - 1) / 6])


def _line_integrate(A, h, start):
    """Solve ``E' = E A`` along axis 0 of ``A`` from index ``start`` (``E = I`` there).

    Axes between the first and the last two are batch axes.  Fourth-order
    Magnus integrator with the generator interpolated to the Gauss points by
    cubics through four neighbouring nodes.
    """
    n = A.shape[0]
    N = A.shape[-1]
    E = np.empty(A.shape, complex)
    E[start] = np.eye(N)

    def step(k, direction):
        # interval between k and k + direction
        lo = k if direction > 0 else k - 1
        base = min(max(lo - 1, 0), n - 4)
        s1 = lo + GAUSS[0] - base - 1
        s2 = lo + GAUSS[1] - base - 1
        nodes = A[base:base + 4]
        A1 = np.tensordot(_cubic_weights(s1), nodes, axes=(0, 0))
        A2 = np.tensordot(_cubic_weights(s2), nodes, axes=(0, 0))
        Om = 0.5 * h * (A1 + A2) + (np.sqrt(3) / 12) * h * h * bracket(A1, A2)
        if direction > 0:
            return E[k] @ scipy.linalg.expm(Om)
        return E[k] @ scipy.linalg.expm(-Om)

    for k in range(start, n - 1):
        E[k + 1] = step(k, 1)
    for k in range(start, 0, -1):
        E[k - 1] = step(k, -1)
    return E


def frame(theta: ConnectionForm, lam, base=None, tol: float | None = 1e-6, check_paths=True):
    """Frame ``E`` with ``E^{-1} dE = theta(lam)`` and ``E(base) = I``.

    On 2-D grids ``E`` is integrated along axis 0 through the base node and
    then along axis 1 from that line; the opposite order is also computed
    and the largest difference is returned as ``path_defect``.  When ``tol``
    is given the curvature is checked first and :class:`FlatnessError` is
    raised if it exceeds ``tol``.
    """
    g = theta.grid
    if base is None:
        base = tuple(int(np.argmin(np.abs(ax.points))) for ax in g.axes)
    th = theta.evaluate(lam)
    if tol is not None and g.ndim > 1:
        trim = 2
        kappa = curvature_norm(theta, [lam], trim=trim)
        if kappa > tol:
            raise FlatnessError(f"connection is not flat (curvature {kappa:.3e})", kappa)
    if g.ndim == 1:
        return _line_integrate(th[0], g.axes[0].step, base[0]), 0.0
    if g.ndim != 2:
        raise UnsupportedOperationError("frames are integrated on 1-D and 2-D grids")

    def order(first, second):
        h1, h2 = g.axes[first].step, g.axes[second].step
        A1 = np.moveaxis(th[first], (first, second), (0, 1))
        A2 = np.moveaxis(th[second], (first, second), (0, 1))
        b1, b2 = base[first], base[second]
        line = _line_integrate(A1[:, b2], h1, b1)
        cols = _line_integrate(np.swapaxes(A2, 0, 1), h2, b2)
        E = line[:, None] @ np.swapaxes(cols, 0, 1)
        return np.moveaxis(E, (0, 1), (first, second))

    E01 = order(0, 1)
    if not check_paths:
        return E01, None
    E10 = order(1, 0)
    return E01, float(np.max(np.abs(E01 - E10)))


def log_derivative_residual(E, theta: ConnectionForm, lam, trim=2):
    """``max |E^{-1} d_i E - theta_i(lam)|`` over axes, excluding ``trim`` edge nodes."""
    g = theta.grid
    th = theta.evaluate(lam)
    Einv = np.linalg.inv(E)
    worst = 0.0
    for i in range(g.ndim):
        # frames are not periodic even on periodic grids: always use finite differences
        r = Einv @ fd4_derivative(E, g.axes[i].step, i) - th[i]
        sl = [slice(None)] * g.ndim
        sl[i] = slice(trim, g.axes[i].size - trim)
        worst = max(worst, float(np.max(np.abs(r[tuple(sl)]))))
    return worst


# --------------------------------------------------------------------------
# first-order systems
# --------------------------------------------------------------------------

def assemble_uk_lax(v, cartan: CartanData, grid: Grid, space: Subspace | None = None, tol=1e-10):
    """``theta = sum_i (a_i lambda + [a_i, v]) dx_i`` on an ``n``-coordinate grid."""
    v = np.asarray(v, complex)
    space = cartan.perp if space is None else space
    r = float(np.max(space.residual(v)))
    if r > tol * max(1.0, float(np.max(np.abs(v)))):
        raise DomainError(f"v is not in the required subspace (residual {r:.2e})")
    if grid.ndim != cartan.rank:
        raise StructuralError("the grid needs one coordinate per Cartan basis element")
    comps = []
    for a in cartan.basis:
        c = np.stack([bracket(a, v), np.broadcast_to(a, v.shape)])
        comps.append(LoopElement(c, 0))
    return ConnectionForm(grid, comps)


def u_system_residual(v, cartan: CartanData, grid: Grid, axes=(0, 1)):
    """``[a_i, v_{x_j}] - [a_j, v_{x_i}] - [[a_i, v], [a_j, v]]`` on the grid."""
    i, j = axes
    ai, aj = cartan.basis[i], cartan.basis[j]
    return (bracket(ai, grid.d(v, j)) - bracket(aj, grid.d(v, i))
            - bracket(bracket(ai, v), bracket(aj, v)))


def assemble_twisted_u_lax(g, vs, basis, sigma: InvolutionSpec, grid: Grid, tol=1e-10):
    """``theta_i = (g a_i g^{-1}) lambda + v_i + sigma(g a_i g^{-1}) lambda^{-1}``.

    ``g`` must be upper triangular (the Borel subgroup of ``SL(n,R)``) and
    each ``v_i`` antisymmetric.
    """
    g = np.asarray(g, complex)
    if np.max(np.abs(np.tril(g, -1))) > tol * max(1.0, float(np.max(np.abs(g)))):
        raise DomainError("g is not upper triangular")
    ginv = np.linalg.inv(g)
    comps = []
    for a, v in zip(basis, vs):
        X = g @ a @ ginv
        comps.append(LoopElement(np.stack([sigma(X), np.asarray(v, complex), X]), -1))
    return ConnectionForm(grid, comps)


def assemble_twisted_uk_lax(g, xi, cartan: CartanData, nested: NestedDecomposition, grid: Grid,
                            compat_tol=1e-6):
    """Lax connection of the ``U/K_1`` system twisted by ``sigma_2``.

    ``theta_i = g a_i g^{-1} lambda + pi_S1([a_i, xi]) + sigma_2(g a_i g^{-1}) lambda^{-1}``
    with ``g`` in ``K_1'`` and ``xi`` in ``A^perp ∩ P_1``.  The compatibility
    ``g^{-1} d_i g = pi_{K_1'}([a_i, xi])`` is checked and its residual, along
    with the residual of the gauge identity, is stored in ``meta``.
    """
    rank_U = nested.n
    if cartan.rank < rank_U:
        raise UnsupportedOperationError("U/K_1 does not have maximal rank for this Cartan subspace")
    sigma2 = nested.algebra.involution("sigma2")
    g = np.asarray(g, complex)
    xi = np.asarray(xi, complex)
    ginv = np.linalg.inv(g)
    dec = nested.sum
    comps, compat, gauge = [], 0.0, 0.0
    for i, a in enumerate(cartan.basis):
        br = bracket(a, xi)
        s1 = dec.component(br, "s1")
        k1p = dec.component(br, "s2") + dec.component(br, "q1")
        if grid.ndim > i:
            compat = max(compat, float(np.max(np.abs(ginv @ grid.d(g, i) - k1p))))
        X = g @ a @ ginv
        th = LoopElement(np.stack([sigma2(X), s1, X]), -1)
        comps.append(th)
        # gauge identity: g^{-1} theta g + g^{-1} dg
        if grid.ndim > i:
            lhs = th.map(lambda C: ginv @ C @ g) + LoopElement.monomial(ginv @ grid.d(g, i), 0)
            rhs = LoopElement(np.stack([ginv @ sigma2(X) @ g, ginv @ s1 @ g + ginv @ grid.d(g, i),
                                        np.broadcast_to(a, X.shape)]), -1)
            gauge = max(gauge, (lhs - rhs).norm())
    if compat > compat_tol:
        raise DomainError(f"compatibility g^-1 dg = pi_K1'([a_i, xi]) fails (residual {compat:.2e})")
    comps = comps[:grid.ndim]
    return ConnectionForm(grid, comps, {"compatibility": compat, "gauge_identity": gauge})


# --------------------------------------------------------------------------
# generalized sine-Gordon equation
# --------------------------------------------------------------------------

@dataclass
class GSGEData:
    """``(A, F)`` on a grid whose axes are the coordinates ``x_1..x_n``.

    ``A`` is ``O(n)``-valued, ``F`` has zero diagonal.  ``grid`` may be
    ``None`` for pointwise algebraic checks.
    """

    A: np.ndarray
    F: np.ndarray
    grid: Grid | None = None

    def __post_init__(self):
        self.A = np.asarray(self.A, float)
        self.F = np.array(self.F, float)
        n = self.A.shape[-1]
        if self.F.shape != self.A.shape:
            raise StructuralError("A and F must have the same shape")
        idx = np.arange(n)
        self.F[..., idx, idx] = 0.0

    @property
    def n(self):
        return self.A.shape[-1]

    @property
    def J(self):
        return signature_matrix(1, self.n - 1).real

    @property
    def a_row(self):
        return self.A[..., 0, :]

    def orthogonality_defect(self):
        n = self.n
        return float(np.max(np.abs(np.swapaxes(self.A, -1, -2) @ self.A - np.eye(n))))

    def w(self, i):
        """``w_i = e_ii F - F^T e_ii``, the ``dx_i`` component of ``w``."""
        n = self.n
        E = np.zeros((n, n))
        E[i, i] = 1
        return E @ self.F - np.swapaxes(self.F, -1, -2) @ E


def _eii(n, i):
    E = np.zeros((n, n))
    E[i, i] = 1
    return E


def gsge_lax_three_term(d: GSGEData, lam):
    """Components of the three-term Laurent form ``lambda/2 X + W + lambda^{-1}/2 Y``."""
    n = d.n
    J = d.J
    A = d.A
    At = np.swapaxes(A, -1, -2)
    out = []
    for i in range(n):
        e = _eii(n, i)
        shape = A.shape[:-2] + (2 * n, 2 * n)
        X = np.zeros(shape, complex)
        X[..., :n, n:] = e @ At
        X[..., n:, :n] = A @ e
        W = np.zeros(shape, complex)
        W[..., :n, :n] = d.w(i)
        Y = np.zeros(shape, complex)
        Y[..., :n, n:] = e @ At @ J
        Y[..., n:, :n] = J @ A @ e
        out.append((lam / 2) * X + W + (1 / lam / 2) * Y)
    return out


def gsge_lax_blocks(d: GSGEData, lam):
    """Components of the block form with entries ``delta F - F^T delta``,
    ``lambda/2 delta A^T + lambda^{-1}/2 delta A^T J`` and its transpose partner."""
    n = d.n
    J = d.J
    A = d.A
    At = np.swapaxes(A, -1, -2)
    out = []
    for i in range(n):
        e = _eii(n, i)
        M = np.zeros(A.shape[:-2] + (2 * n, 2 * n), complex)
        M[..., :n, :n] = d.w(i)
        M[..., :n, n:] = (lam / 2) * (e @ At) + (1 / lam / 2) * (e @ At @ J)
        M[..., n:, :n] = (lam / 2) * (A @ e) + (1 / lam / 2) * (J @ A @ e)
        out.append(M)
    return out


def assemble_gsge_lax(d: GSGEData, lam):
    """``(components, identical)``: block-form Lax components and whether they
    coincide exactly with the three-term Laurent assembly."""
    if lam == 0:
        raise DomainError("lambda = 0 is a pole of the GSGE Lax pair")
    blocks = gsge_lax_blocks(d, lam)
    terms = gsge_lax_three_term(d, lam)
    diff = max(float(np.max(np.abs(b - t))) for b, t in zip(blocks, terms))
    scale = max(1.0, max(float(np.max(np.abs(b))) for b in blocks))
    return blocks, diff <= 8 * np.finfo(float).eps * scale


def gsge_connection(d: GSGEData) -> ConnectionForm:
    """The GSGE Lax pair as a Laurent connection on ``d.grid``."""
    if d.grid is None:
        raise StructuralError("GSGE data has no grid")
    n = d.n
    J = d.J
    A = d.A
    At = np.swapaxes(A, -1, -2)
    comps = []
    for i in range(d.grid.ndim):
        e = _eii(n, i)
        shape = A.shape[:-2] + (2 * n, 2 * n)
        X = np.zeros(shape)
        X[..., :n, n:] = e @ At / 2
        X[..., n:, :n] = A @ e / 2
        W = np.zeros(shape)
        W[..., :n, :n] = d.w(i)
        Y = np.zeros(shape)
        Y[..., :n, n:] = e @ At @ J / 2
        Y[..., n:, :n] = J @ A @ e / 2
        comps.append(LoopElement(np.stack([Y, W, X]), -1))
    return ConnectionForm(d.grid, comps)


GAUSS_COEFFICIENT = 1.0


def gsge_residual(d: GSGEData, axes=None, gauss_coefficient=GAUSS_COEFFICIENT):
    """``(gauss, codazzi)`` residual fields.

    ``gauss[i, j] = d_i w_j - d_j w_i + [w_i, w_j] + c (e_ii X e_jj - e_jj X e_ii)``
    with ``X = A^T e_11 A``, i.e. the ``dx_i ^ dx_j`` coefficient of
    ``dw + w^w + c delta X delta``, and
    ``codazzi[k] = A^{-1} d_k A - (e_kk F^T - F e_kk)``.

    The default ``c = 1`` is the value for which the degree-zero part of the
    curvature of the three-term Lax connection vanishes (the off-diagonal
    blocks contribute ``(1/2)(e_ii A^T J A e_jj - e_jj A^T J A e_ii)`` and
    ``A^T J A = 2X - I``).  Only the coordinates present as grid axes are
    differentiated.
    """
    if d.grid is None:
        raise StructuralError("GSGE data has no grid")
    g = d.grid
    n = d.n
    m = g.ndim
    A = d.A
    At = np.swapaxes(A, -1, -2)
    e11 = _eii(n, 0)
    X = At @ e11 @ A
    gauss = {}
    pairs = [(i, j) for i in range(m) for j in range(i + 1, m)] if axes is None else [tuple(axes)]
    for i, j in pairs:
        wi, wj = d.w(i), d.w(j)
        ei, ej = _eii(n, i), _eii(n, j)
        gauss[(i, j)] = (g.d(wj, i) - g.d(wi, j) + wi @ wj - wj @ wi
                         + gauss_coefficient * (ei @ X @ ej - ej @ X @ ei))
    Ainv = At
    Ft = np.swapaxes(d.F, -1, -2)
    codazzi = {}
    for k in range(m):
        ek = _eii(n, k)
        codazzi[k] = Ainv @ g.d(A, k) - (ek @ Ft - d.F @ ek)
    return gauss, codazzi


def gsge_residual_norms(d: GSGEData, trim=2, gauss_coefficient=GAUSS_COEFFICIENT):
    gauss, cod = gsge_residual(d, gauss_coefficient=gauss_coefficient)
    gn = max(float(np.max(np.abs(_interior(v, d.grid, trim)))) for v in gauss.values())
    cn = max(float(np.max(np.abs(_interior(v, d.grid, trim)))) for v in cod.values())
    return gn, cn


def build_F_from_metric(a_row, grid: Grid, min_abs=1e-6):
    """``f_ij = d_{x_j}(a_{1i}) / a_{1j}`` for ``i != j`` and ``f_ii = 0``.

    ``a_row`` has shape ``(*grid.shape, n)``; coordinates beyond the grid
    dimension are treated as constant directions (zero derivative).
    """
    a_row = np.asarray(a_row, float)
    n = a_row.shape[-1]
    small = np.abs(a_row) < min_abs
    if np.any(small):
        node = tuple(int(k) for k in np.argwhere(small)[0])
        raise SingularityError(f"a_1j vanishes at node {node[:-1]} (j = {node[-1] + 1})", node[:-1])
    F = np.zeros(a_row.shape + (n,))
    for j in range(min(n, grid.ndim)):
        da = grid.d(a_row, j)
        for i in range(n):
            if i != j:
                F[..., i, j] = da[..., i] / a_row[..., j]
    return F


def row_norm_defect(a_row):
    """``| ||a_row|| - 1 |`` per node (diagnostic; the quotient formula ignores it)."""
    return np.abs(np.linalg.norm(a_row, axis=-1) - 1.0)


def gsge_from_connection(components: Sequence[LoopElement], grid: Grid | None = None) -> GSGEData:
    """Read ``(A, F)`` off a twisted ``o(n,n)`` connection ``theta_i = X_i lambda + W_i + Y_i lambda^{-1}``.

    Column ``i`` of ``A`` is twice the lower-left block of ``X_i``; row ``i``
    of ``F`` is row ``i`` of the upper-left block of ``W_i``.
    """
    n = components[0].N // 2
    m = len(components)
    if m != n:
        raise StructuralError(f"expected {n} components, got {m}")
    A = np.stack([2 * np.real(components[i].coeff(1)[..., n:, i]) for i in range(n)], -1)
    F = np.stack([np.real(components[i].coeff(0)[..., i, :n]) for i in range(n)], -2)
    return GSGEData(A, F, grid)
