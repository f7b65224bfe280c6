"""Hierarchy engine: the ``Q_{i,j}(P)`` recursion, flows and time evolution.

A point ``P`` of the phase space is a loop-valued field on a 1-D grid.  For
the untwisted families ``P = a_1 lambda + u``; for the twisted families
``P = P_1 lambda + P_0 + sigma(P_1) lambda^{-1}`` with ``P_1`` conjugate to
``a_1`` by a gauge ``g(x)`` (an upper unipotent matrix for twisted-U, an
element of ``K_1'`` for twisted-U/K).

``Q = Q_{i,j}(P)`` is the formal solution of ``[d/dx + P, Q] = 0`` with
leading term ``a_i lambda^j``.  It is computed degree by degree from the top
in the gauge where the leading coefficient of ``P`` is exactly ``a_1``:

* the part of ``Q_{k-1}`` orthogonal to the Cartan subspace ``A`` is read off
  from the degree-``k`` equation through ``ad(a_1)^{-1}``;
* its ``A``-part is an antiderivative of the ``A``-part of the
  degree-``(k-1)`` equation, normalised so that ``Q`` equals the vacuum
  generator ``J_{i,j}`` at the left edge.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import ConfigurationError, DomainError, IntegrationError, StructuralError
from .grid import Grid, integrate
from .lie import bracket
from .loops import Family, LoopElement, loop_bracket

BLOWUP_FACTOR = 1e6


@dataclass
class QField:
    """Result of :func:`compute_Q`: the loop field plus diagnostics."""

    Q: LoopElement
    residual: float
    meta: dict = field(default_factory=dict)


@dataclass
class Trajectory:
    """Snapshots of an evolution ``t -> P(t)``."""

    times: np.ndarray
    states: list
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.states)


class HierarchyInstance:
    """A family together with its regular element, seed ``J_1`` and grid.

    ``seed_index`` is the index ``i`` used for ``J_{i,1}`` as the seed: ``1``
    when the regular element is the first basis vector, ``0`` when it is an
    explicit combination of basis vectors (the twisted ``o(n,n)`` case).
    """

    def __init__(self, family: Family, grid: Grid, default_depth: int | None = None):
        if family.cartan is None:
            raise ConfigurationError("the family has no Cartan data")
        if not family.cartan.is_regular():
            raise ConfigurationError("a_1 is not regular")
        if grid.ndim != 1:
            raise StructuralError("the hierarchy engine works on 1-D grids")
        self.family = family
        self.cartan = family.cartan
        self.grid = grid
        c = self.cartan
        self.seed_index = 1 if np.allclose(c.a1, c.basis[0]) else 0
        self.J1 = family.vacuum_generator(self.seed_index, 1)
        self.default_depth = default_depth if default_depth is not None else (8 if family.twisted else 1)

    # ------------------------------------------------------------------
    # phase space
    # ------------------------------------------------------------------
    @property
    def twisted(self):
        return self.family.twisted

    def a(self, i):
        return self.cartan.a1 if i == 0 else self.cartan.basis[i - 1]

    def make_P(self, u=None, P1=None, P0=None) -> LoopElement:
        """Assemble ``P`` from its free data on the grid."""
        nx = self.grid.shape[0]
        N = self.family.N
        a1 = self.cartan.a1
        if not self.twisted:
            u = np.zeros((nx, N, N), complex) if u is None else np.asarray(u, complex)
            return LoopElement(np.stack([u, np.broadcast_to(a1, u.shape)]), 0, self.family.algebra)
        sig = self._sigma()
        P1 = np.broadcast_to(a1, (nx, N, N)) if P1 is None else np.asarray(P1, complex)
        P0 = np.zeros((nx, N, N), complex) if P0 is None else np.asarray(P0, complex)
        return LoopElement(np.stack([sig(P1), P0, P1]), -1, self.family.algebra)

    def vacuum_P(self) -> LoopElement:
        return self.make_P()

    def _sigma(self):
        fam = self.family
        return fam.sigma2 if hasattr(fam, "sigma2") else fam.sigma

    def gauge(self, P: LoopElement):
        """``g(x)`` with ``g^{-1} P_1 g = a_1`` (``None`` for the untwisted families)."""
        if not self.twisted:
            return None
        P1 = P.coeff(1)
        a1 = self.cartan.a1
        fam = self.family
        if fam.name == "twisted-U":
            d = np.diag(a1)
            N = len(d)
            g = np.zeros(P1.shape, complex)
            for k in range(N):
                g[..., k, k] = 1.0
                if k == 0:
                    continue
                M = P1[..., :k, :k] - d[k] * np.eye(k)
                rhs = -P1[..., :k, k]
                g[..., :k, k] = np.linalg.solve(M, rhs[..., None])[..., 0]
            return g
        n = fam.algebra.n
        D = 2.0 * np.diag(a1[n:, :n])
        H = 2.0 * P1[..., n:, :n] / D[None, :]
        g = np.zeros(P1.shape, complex)
        g[..., :n, :n] = np.eye(n)
        g[..., n:, n:] = H
        return g

    def Y_residual(self, P: LoopElement) -> float:
        """Defect of ``P`` from the phase space ``Y`` of the hierarchy."""
        fam, c = self.family, self.cartan
        if not self.twisted:
            if P.lo != 0 or P.hi != 1:
                return np.inf
            r1 = np.linalg.norm(P.coeff(1) - c.a1)
            u = P.coeff(0)
            space = c.perp
            r0 = np.linalg.norm(space.residual(u))
            extra = 0.0
            if fam.name == "tau-sigma":
                extra = np.linalg.norm(fam.K.residual(u))
            return float(np.sqrt(r1 ** 2 + r0 ** 2 + extra ** 2))
        if P.lo != -1 or P.hi != 1:
            return np.inf
        g = self.gauge(P)
        r1 = np.linalg.norm(g @ c.a1 @ np.linalg.inv(g) - P.coeff(1))
        rm = np.linalg.norm(self._sigma()(P.coeff(1)) - P.coeff(-1))
        if fam.name == "twisted-U":
            r0 = np.linalg.norm(fam.K.residual(P.coeff(0)))
            gb = np.linalg.norm(np.tril(g, -1))
        else:
            r0 = np.linalg.norm(fam.nested.S1.residual(P.coeff(0)))
            gb = np.linalg.norm(fam.nested.K1p.residual(
                np.linalg.inv(g) @ self.grid.d(g, 0)))
        return float(np.sqrt(r1 ** 2 + rm ** 2 + r0 ** 2 + gb ** 2))

    # ------------------------------------------------------------------
    # recursion
    # ------------------------------------------------------------------
    def compute_Q(self, P: LoopElement, i: int, j: int, depth: int | None = None) -> QField:
        """``Q_{i,j}(P)`` on the band ``[-depth, j]``.

        ``depth`` counts coefficients below degree 0, the lowest degree used
        by ``pi_+``.  The residual of ``[d/dx + P, Q] = 0`` is checked at all
        degrees whose equation involves only computed coefficients.
        """
        depth = self.default_depth if depth is None else depth
        if depth < 0:
            raise DomainError("depth must be nonnegative")
        if j < 1:
            raise DomainError("flows are indexed by j >= 1")
        if self.family.odd_degrees_only and j % 2 == 0:
            raise DomainError("this family only has odd flows")
        c = self.cartan
        grid = self.grid
        nx = grid.shape[0]
        N = self.family.N
        vac = self.family.vacuum_generator(i, j)
        meta = {"warnings": []}

        g = self.gauge(P)
        if g is not None:
            ginv = np.linalg.inv(g)
            Ph = P.map(lambda C: ginv @ C @ g)
            Ph = Ph + LoopElement.monomial(ginv @ grid.d(g, 0), 0)
        else:
            ginv = None
            Ph = P
        lead = Ph.coeff(1)
        if np.max(np.abs(lead - c.a1)) > 1e-8:
            raise ConfigurationError("leading coefficient of P is not conjugate to the regular a_1")
        lower = {m: Ph.coeff(m) for m in range(Ph.lo, 1)}

        lo = -depth
        Q = {j: np.broadcast_to(self.a(i), (nx, N, N)).astype(complex)}

        def Qc(k):
            return Q.get(k, 0.0) if k <= j else 0.0

        scale = max(1.0, float(np.max(np.abs(P.coeffs))))
        worst_mean = 0.0
        for k in range(j, lo, -1):
            R = grid.d(Q[k], 0)
            for m, Pm in lower.items():
                if k - m <= j:
                    R = R + bracket(Pm, Q[k - m])
            Rp = c.perp_part(R)
            Qp = -c.ad_inv(Rp)
            integrand = bracket(lower[0], Qp)
            for m, Pm in lower.items():
                if m < 0 and k - 1 - m <= j:
                    integrand = integrand + bracket(Pm, Q[k - 1 - m])
            integrand = -c.a_part(integrand)
            F, mean = grid.antiderivative(integrand, 0)
            if mean is not None:
                worst_mean = max(worst_mean, float(np.max(np.abs(mean))))
            vac_A = c.a_part(vac.coeff(k - 1))
            Q[k - 1] = Qp + vac_A + F
        if worst_mean > 1e-8 * scale:
            meta["warnings"].append(
                f"integrand of an A-part is not an exact derivative on the periodic grid "
                f"(mean {worst_mean:.2e})")
        meta["nonexact_mean"] = worst_mean

        # residual of [d/dx + Ph, Qh] at degrees lo+1-Ph.lo .. j+1
        full = dict(lower)
        full[1] = lead
        res = 0.0
        for k in range(j + 1, lo - Ph.lo, -1):
            E = grid.d(Q[k], 0) if k <= j else 0.0
            for m, Pm in full.items():
                kk = k - m
                if lo <= kk <= j:
                    E = E + bracket(Pm, Q[kk])
            res = max(res, float(np.max(np.abs(E))) if np.ndim(E) else 0.0)
        coeffs = np.stack([Q[k] for k in range(lo, j + 1)])
        if g is not None:
            coeffs = g @ coeffs @ ginv
        meta["band"] = (lo, j)
        meta["gauge"] = g is not None
        return QField(LoopElement(coeffs, lo, self.family.algebra), res, meta)

    # ------------------------------------------------------------------
    # flows
    # ------------------------------------------------------------------
    def Q_plus(self, P, i, j, depth=None) -> LoopElement:
        q = self.compute_Q(P, i, j, depth).Q
        return self.family.project_split(q, check=False)[0]

    def flow_rhs(self, P: LoopElement, i: int, j: int, depth=None, return_meta=False):
        """``[d/dx + P, pi_+(Q_{i,j}(P))]`` restricted to the band of ``P``.

        The norm of the discarded coefficients (which vanish for an exact
        recursion) is returned in the metadata as ``tangency``.
        """
        Qp = self.Q_plus(P, i, j, depth)
        full = Qp.map(lambda C: self.grid.d(C, 0, array_axis=1)) + loop_bracket(P, Qp, max_band=10 ** 6)
        out, leak = self.tangent_projection(full, P)
        if return_meta:
            return out, {"tangency": leak}
        return out

    def tangent_projection(self, V: LoopElement, P: LoopElement):
        """Project a loop field onto the tangent structure of ``Y`` at ``P``.

        Untwisted: only the degree-0 coefficient survives, projected onto the
        admissible subspace of ``u``.  Twisted: degrees ``-1..1`` survive with
        the degree-``-1`` part tied to degree 1 by the twist.  Returns the
        projection and the largest discarded entry.
        """
        fam = self.family
        if not self.twisted:
            u = V.coeff(0)
            space = fam.K if fam.name == "tau-sigma" else None
            pu = self.cartan.perp_part(u)
            if space is not None:
                pu = space.project(pu)
            leak = float(np.max(np.abs(u - pu)))
            for k in V.degrees:
                if k != 0:
                    leak = max(leak, float(np.max(np.abs(V.coeff(k)))))
            return LoopElement(np.stack([pu, np.zeros_like(pu)]), 0, fam.algebra), leak
        sig = self._sigma()
        V1, V0 = V.coeff(1), V.coeff(0)
        sub = fam.K if fam.name == "twisted-U" else fam.nested.S1
        p0 = sub.project(V0)
        leak = max(float(np.max(np.abs(V0 - p0))), float(np.max(np.abs(V.coeff(-1) - sig(V1)))))
        for k in V.degrees:
            if abs(k) > 1:
                leak = max(leak, float(np.max(np.abs(V.coeff(k)))))
        return LoopElement(np.stack([sig(V1), p0, V1]), -1, fam.algebra), leak

    def connection(self, P: LoopElement, i: int, j: int, depth=None):
        """``(P, pi_+(Q_{i,j}(P)))``: the ``x`` and ``t`` components of the Lax connection."""
        return P, self.Q_plus(P, i, j, depth)

    # ------------------------------------------------------------------
    # conserved quantities
    # ------------------------------------------------------------------
    def conserved_quantities(self, P: LoopElement, count: int = 3, depth: int | None = None):
        """``H_k = int tr(a_1 Q_{-k})`` for ``k = 0..count-1`` using the seed series.

        ``Q`` is the ``(seed, 1)`` series, so ``H_k`` are integrals of the
        ``A``-parts below the top; for the nonlinear Schrodinger hierarchy
        ``H_1`` is a multiple of the mass.
        """
        depth = max(count, self.default_depth) if depth is None else depth
        q = self.compute_Q(P, self.seed_index, 1, depth).Q
        g = self.gauge(P)
        out = []
        for k in range(count):
            C = q.coeff(-k)
            if g is not None:
                C = np.linalg.inv(g) @ C @ g
            dens = np.trace(self.cartan.a1 @ self.cartan.a_part(C), axis1=-2, axis2=-1)
            dens = dens - dens[0]
            out.append(complex(integrate(dens, self.grid, 0)))
        return np.array(out)

    # ------------------------------------------------------------------
    # time evolution
    # ------------------------------------------------------------------
    def rk4_step(self, P: LoopElement, i: int, j: int, dt: float, depth=None) -> LoopElement:
        f = lambda S: self.flow_rhs(S, i, j, depth)
        k1 = f(P)
        k2 = f(P + k1 * (dt / 2))
        k3 = f(P + k2 * (dt / 2))
        k4 = f(P + k3 * dt)
        return P + (k1 + k2 * 2 + k3 * 2 + k4) * (dt / 6)

    def evolve(self, P0: LoopElement, i: int, j: int, T: float, dt: float, depth=None,
               store_every: int = 1, conserved: int = 2) -> Trajectory:
        """Classical RK4 for ``P_t = [d/dx + P, pi_+(Q_{i,j}(P))]``."""
        if not dt > 0:
            raise DomainError("dt must be positive")
        steps = int(np.ceil(T / dt - 1e-9))
        norm0 = max(P0.norm(), 1e-300)
        t0 = time.perf_counter()
        P = P0
        times, states = [0.0], [P0]
        H0 = self.conserved_quantities(P0, conserved) if conserved else None
        for s in range(1, steps + 1):
            Pn = self.rk4_step(P, i, j, dt, depth)
            if not np.isfinite(Pn.norm()) or Pn.norm() > BLOWUP_FACTOR * norm0:
                raise IntegrationError(f"blow-up at step {s} (t = {s * dt:.4g})",
                                       last_state=P, last_time=(s - 1) * dt)
            P = Pn
            if s % store_every == 0 or s == steps:
                times.append(s * dt)
                states.append(P)
        meta = {"dt": dt, "steps": steps, "seconds": time.perf_counter() - t0}
        if conserved:
            H1 = self.conserved_quantities(P, conserved)
            meta["conserved_initial"] = H0
            meta["conserved_final"] = H1
            meta["conserved_drift"] = float(np.max(np.abs(H1 - H0)))
        return Trajectory(np.array(times), states, meta)

    # ------------------------------------------------------------------
    # vacuum frame
    # ------------------------------------------------------------------
    def vacuum_frame(self, i: int, j: int, x, t, lams):
        """``V(x, t) = exp(x J_1(lambda) + t J_{i,j}(lambda))`` for each sample ``lambda``."""
        lams = np.atleast_1d(np.asarray(lams, complex))
        Jj = self.family.vacuum_generator(i, j)
        X = np.multiply.outer(np.asarray(x, float), self.J1.evaluate(lams)) + \
            np.multiply.outer(np.asarray(t, float), Jj.evaluate(lams))
        return scipy.linalg.expm(X)


def compute_Q(h: HierarchyInstance, P, i, j, depth=None) -> QField:
    return h.compute_Q(P, i, j, depth)


def flow_rhs(h: HierarchyInstance, i, j, P, depth=None):
    return h.flow_rhs(P, i, j, depth)


def evolve(h: HierarchyInstance, i, j, P0, T, dt, **kw) -> Trajectory:
    return h.evolve(P0, i, j, T, dt, **kw)


def vacuum_frame(h: HierarchyInstance, i, j, x, t, lams):
    return h.vacuum_frame(i, j, x, t, lams)


# --------------------------------------------------------------------------
# closed-form right-hand sides used as references
# --------------------------------------------------------------------------

def su2_field(q, real=False):
    """``u = [[0, q], [-conj(q), 0]]`` on a grid."""
    q = np.asarray(q, complex)
    u = np.zeros(q.shape + (2, 2), complex)
    u[..., 0, 1] = q
    u[..., 1, 0] = -np.conj(q)
    return u


def first_flow_closed_form(cartan, i, u, u_x):
    """``ad(a_i) ad(a_1)^{-1}(u_x) + [u, ad(a_i) ad(a_1)^{-1}(u)]``."""
    ai = cartan.basis[i - 1]
    T = lambda X: bracket(ai, cartan.ad_inv(cartan.perp_part(X)))
    return T(u_x) + bracket(u, T(u))
