"""Birkhoff factorization, formal inverse scattering and dressing.

Loop-group elements are handled through their values on a circle
``|lambda| = R``.  A factorization ``G = E M`` with ``E`` in the plus group
and ``M`` in the minus group is found by solving the linear (Toeplitz) system
for the Laurent coefficients of ``H = M^{-1} = sum_{l >= 0} h_l lambda^{-l}``
expressing that ``E = G H`` has no negative Fourier modes (untwisted
families) or satisfies the twisted mirror and boundary conditions
(``o(n,n)`` family).  Unknowns are scaled by ``R^{-l}`` so that the system
stays well conditioned.

The group involutions of the supported families act linearly on matrix
entries, so the constraints are linear; the ``sl(n,R)`` twisted family
(``g -> g^{-T}``) is not supported by this solver.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import DomainError, FactorizationError, StructuralError, UnsupportedOperationError
from .grid import Grid
from .lie import signature_matrix
from .loops import Family, LoopElement

DEFAULT_DEPTHS = (8, 16, 24, 32)
RECON_TOL = 1e-8


# --------------------------------------------------------------------------
# rational loops
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ProjectorFactor:
    """``I + ((z - conj z) / (lambda - z)) pi`` with ``pi`` an orthogonal projection.

    Satisfies the unitary reality condition ``f(conj lambda)^* f(lambda) = I``.
    """

    z: complex
    pi: np.ndarray

    def __call__(self, lam):
        lam = np.asarray(lam, complex)[..., None, None]
        N = self.pi.shape[0]
        return np.eye(N) + ((self.z - np.conj(self.z)) / (lam - self.z)) * self.pi

    def inverse(self, lam):
        lam = np.asarray(lam, complex)[..., None, None]
        N = self.pi.shape[0]
        return np.eye(N) + ((np.conj(self.z) - self.z) / (lam - np.conj(self.z))) * self.pi

    @property
    def poles(self):
        return [complex(self.z), complex(np.conj(self.z))]

    def to_dict(self):
        return {"kind": "projector", "z": [self.z.real, self.z.imag],
                "pi_re": self.pi.real.tolist(), "pi_im": self.pi.imag.tolist()}


@dataclass(frozen=True)
class TwistedPairFactor:
    """``pi_0 + ((lambda - z)/(lambda + z)) pi_1 + ((lambda + z)/(lambda - z)) pi_2``.

    ``pi_1 = v v^T / v^T v`` and ``pi_2 = I v v^T I / v^T v`` for a real
    vector ``v`` that is null for the form ``I = I_{n,n}``; ``pi_0`` is the
    complementary projection.  The value is in ``O(n,n)`` and satisfies
    ``I f(-lambda) I = f(lambda)``.
    """

    z: float
    v: np.ndarray
    form: np.ndarray

    def projections(self):
        v = np.asarray(self.v, float)
        vv = v @ v
        p1 = np.outer(v, v) / vv
        p2 = self.form @ np.outer(v, v) @ self.form / vv
        return np.eye(len(v)) - p1 - p2, p1, p2

    def __call__(self, lam):
        lam = np.asarray(lam, complex)[..., None, None]
        p0, p1, p2 = self.projections()
        return p0 + ((lam - self.z) / (lam + self.z)) * p1 + ((lam + self.z) / (lam - self.z)) * p2

    def inverse(self, lam):
        lam = np.asarray(lam, complex)[..., None, None]
        p0, p1, p2 = self.projections()
        return p0 + ((lam + self.z) / (lam - self.z)) * p1 + ((lam - self.z) / (lam + self.z)) * p2

    @property
    def poles(self):
        return [float(self.z), float(-self.z)]

    def to_dict(self):
        return {"kind": "twisted-pair", "z": float(self.z), "v": np.asarray(self.v, float).tolist(),
                "form": np.real(self.form).tolist()}


def _factor_from_dict(d):
    if d["kind"] == "projector":
        pi = np.asarray(d["pi_re"], float) + 1j * np.asarray(d["pi_im"], float)
        return ProjectorFactor(complex(d["z"][0], d["z"][1]), pi)
    if d["kind"] == "twisted-pair":
        return TwistedPairFactor(float(d["z"]), np.asarray(d["v"], float), np.asarray(d["form"], float))
    raise StructuralError(f"unknown factor kind {d['kind']!r}")


class RationalLoop:
    """Ordered product of elementary rational factors, normalized to ``I`` at infinity."""

    def __init__(self, factors: Sequence, family: str, symmetry: Sequence[str] = ()):
        self.factors = list(factors)
        self.family = family
        self.symmetry = tuple(symmetry)
        if not self.factors:
            raise StructuralError("a rational loop needs at least one factor (use identity_loop)")

    @property
    def N(self):
        f = self.factors[0]
        return len(f.v) if isinstance(f, TwistedPairFactor) else f.pi.shape[0]

    def __call__(self, lam):
        lam = np.asarray(lam, complex)
        out = np.broadcast_to(np.eye(self.N, dtype=complex), lam.shape + (self.N, self.N)).copy()
        for f in self.factors:
            out = out @ f(lam)
        return out

    def inverse(self, lam):
        lam = np.asarray(lam, complex)
        out = np.broadcast_to(np.eye(self.N, dtype=complex), lam.shape + (self.N, self.N)).copy()
        for f in reversed(self.factors):
            out = out @ f.inverse(lam)
        return out

    @property
    def poles(self):
        out = []
        for f in self.factors:
            for p in f.poles:
                if not any(abs(p - q) < 1e-14 for q in out):
                    out.append(p)
        return out

    def pole_radius(self):
        """Largest pole modulus (0 for the identity)."""
        return max([abs(p) for p in self.poles] + [0.0])

    def __mul__(self, other: "RationalLoop"):
        return RationalLoop(self.factors + other.factors, self.family,
                            tuple(sorted(set(self.symmetry) | set(other.symmetry))))

    def reality_defect(self, lams):
        """Largest defect of the family's reality/twist conditions at sample ``lams``."""
        lams = np.asarray(lams, complex)
        F = self(lams)
        if self.family in ("tau", "standard", "tau-sigma"):
            G = self(np.conj(lams))
            defect = np.max(np.abs(np.conj(np.swapaxes(G, -1, -2)) @ F - np.eye(self.N)))
            return float(defect)
        n = self.N // 2
        I = signature_matrix(n, n).real
        d1 = np.max(np.abs(np.conj(self(np.conj(lams))) - F))
        d2 = np.max(np.abs(I @ self(-lams) @ I - F))
        d3 = np.max(np.abs(np.swapaxes(F, -1, -2) @ I @ F - I))
        return float(max(d1, d2, d3))

    def to_json(self):
        return json.dumps({"family": self.family, "symmetry": list(self.symmetry),
                           "factors": [f.to_dict() for f in self.factors]})

    @classmethod
    def from_json(cls, s):
        d = json.loads(s)
        return cls([_factor_from_dict(f) for f in d["factors"]], d["family"], d.get("symmetry", ()))


def identity_loop(N, family="tau"):
    return RationalLoop([ProjectorFactor(1j, np.zeros((N, N), complex))], family)


def hermitian_projection(direction):
    v = np.asarray(direction, complex).reshape(-1)
    return np.outer(v, v.conj()) / np.vdot(v, v).real


def simple_element(family: str, z, direction) -> RationalLoop:
    """A simple element of the minus group.

    ``tau`` / ``standard`` families (unitary reality): ``I + ((z - conj z)/(lambda - z)) pi``
    with ``pi`` the orthogonal projection onto ``direction``; requires
    ``Im z != 0``.

    ``twisted-U/K`` (``o(n,n)``): the product
    ``g_{z, v} g_{1/z, I_{n+1,n-1} v}`` with poles ``+-z, +-1/z``; requires
    real ``z`` with ``|z| != 1`` and a null vector ``v`` of ``I_{n,n}``.
    """
    if family in ("tau", "standard"):
        z = complex(z)
        if abs(z.imag) < 1e-12:
            raise DomainError("the pole must be off the real axis")
        return RationalLoop([ProjectorFactor(z, hermitian_projection(direction))], family, ("tau",))
    if family == "twisted-U/K":
        if abs(np.imag(z)) > 0:
            raise UnsupportedOperationError("only real poles (closed quadruples +-z, +-1/z) are supported")
        z = float(np.real(z))
        if abs(abs(z) - 1) < 1e-12 or z == 0:
            raise DomainError("the pole must be off the unit circle and nonzero")
        v = np.asarray(direction, float).reshape(-1)
        N = len(v)
        n = N // 2
        I = signature_matrix(n, n).real
        if abs(v @ I @ v) > 1e-12 * (v @ v):
            raise DomainError("the direction must be a null vector of I_{n,n}")
        D2 = signature_matrix(n + 1, n - 1).real
        return RationalLoop([TwistedPairFactor(z, v, I), TwistedPairFactor(1.0 / z, D2 @ v, I)],
                            family, ("tau", "sigma1", "sigma2"))
    raise UnsupportedOperationError(f"simple elements are not available for the {family} family")


def residue(f: RationalLoop, pole, radius=1e-3, samples=64):
    """Numerical residue of ``f`` at ``pole`` by the trapezoid rule on a small circle."""
    th = 2 * np.pi * np.arange(samples) / samples
    lam = pole + radius * np.exp(1j * th)
    vals = f(lam)
    w = (radius * np.exp(1j * th))[:, None, None] / samples
    return np.sum(vals * w, axis=0)


def simplicity_probe(f: RationalLoop, tol=1e-8):
    """``(is_simple, factors)`` for the unitary family.

    A loop is simple when its poles form a single conjugate pair and the
    residue has rank one.  Otherwise simple factors are peeled off from the
    left using the image of the residue at each pole in the upper half-plane.
    """
    if f.family not in ("tau", "standard"):
        raise UnsupportedOperationError("simplicity probe is implemented for the unitary family")
    upper = [p for p in f.poles if p.imag > 0]
    ranks = []
    factors = []
    rest = f
    for p in upper:
        R = residue(rest, p)
        s = np.linalg.svd(R, compute_uv=False)
        ranks.append(int(np.sum(s > tol * max(1.0, s[0]))))
        u, s, vh = np.linalg.svd(R)
        k = max(1, int(np.sum(s > tol * max(1.0, s[0]))))
        V = u[:, :k]
        pi = V @ V.conj().T
        fac = ProjectorFactor(complex(p), pi)
        factors.append(RationalLoop([fac], f.family, ("tau",)))
        rest = RationalLoop([_Quotient(fac, rest)], f.family)
    is_simple = len(upper) == 1 and ranks[0] == 1
    return is_simple, factors


class _Quotient:
    """``fac^{-1} rest`` as a factor (used while peeling)."""

    def __init__(self, fac, rest):
        self.fac, self.rest = fac, rest
        self.pi = np.zeros((rest.N, rest.N))

    def __call__(self, lam):
        return self.fac.inverse(lam) @ self.rest(lam)

    def inverse(self, lam):
        return self.rest.inverse(lam) @ self.fac(lam)

    @property
    def poles(self):
        return [p for p in self.rest.poles if abs(p - self.fac.z) > 1e-12 and abs(p - np.conj(self.fac.z)) > 1e-12]


# --------------------------------------------------------------------------
# vacuum frames via simultaneous diagonalization of the Cartan subspace
# --------------------------------------------------------------------------

class CartanExponential:
    """Fast ``exp(sum_i c_i(lambda) b_i)`` for commuting diagonalizable ``b_i``."""

    def __init__(self, mats):
        mats = np.asarray(mats, complex)
        rng = np.random.default_rng(12345)
        generic = np.tensordot(rng.standard_normal(len(mats)), mats, axes=(0, 0))
        w, T = np.linalg.eig(generic)
        Tinv = np.linalg.inv(T)
        D = Tinv @ mats @ T
        off = np.max(np.abs(D - np.einsum("kii->ki", D)[:, :, None] * np.eye(mats.shape[-1])))
        if off > 1e-9:
            raise StructuralError("generators are not simultaneously diagonalizable")
        self.T, self.Tinv = T, Tinv
        self.diag = np.einsum("kii->ki", D)

    def __call__(self, coeffs):
        """``coeffs`` has shape ``(..., k)``; returns ``(..., N, N)``."""
        e = np.exp(np.asarray(coeffs) @ self.diag)
        return (self.T * e[..., None, :]) @ self.Tinv


def vacuum_frame_function(family: Family, generators: Sequence[LoopElement], coords):
    """``lambda -> exp(sum_k coords_k J_k(lambda))`` evaluated on a node array.

    ``coords`` has shape ``(*nodes, k)``.  Returns a callable producing
    ``(len(lams), *nodes, N, N)``.
    """
    coords = np.asarray(coords, float)
    mats, plan = [], []
    for J in generators:
        entry = []
        for d in J.degrees:
            C = J.coeff(d)
            if np.any(C != 0):
                mats.append(C)
                entry.append((len(mats) - 1, d))
        plan.append(entry)
    cexp = CartanExponential(np.array(mats))

    def V(lams):
        lams = np.atleast_1d(np.asarray(lams, complex))
        c = np.zeros((len(lams),) + coords.shape[:-1] + (len(mats),), complex)
        for k, entry in enumerate(plan):
            for m, d in entry:
                c[..., m] += np.multiply.outer(lams ** d, coords[..., k])
        return cexp(c)

    return V


# --------------------------------------------------------------------------
# factorization
# --------------------------------------------------------------------------

@dataclass
class FactorizationResult:
    """Factors of ``G = E M`` at every node.

    ``H`` holds the coefficients ``h_0..h_d`` of ``M^{-1}``, ``e`` the
    nonnegative Laurent coefficients ``e_0..e_K`` of ``E`` (the negative
    ones vanish, or mirror the positive ones in the twisted family).
    """

    H: np.ndarray
    e: np.ndarray
    family: str
    radius: float
    depth: int
    residual: np.ndarray
    G: Callable | None = None
    sigma: Callable | None = None
    meta: dict = field(default_factory=dict)

    def minus_inverse(self, lams):
        lams = np.atleast_1d(np.asarray(lams, complex))
        pw = lams[:, None] ** (-np.arange(self.H.shape[0]))[None, :]
        return np.tensordot(pw, self.H, axes=(1, 0))

    def minus(self, lams):
        """``M(lambda)``; accurate for ``|lambda|`` outside the poles of ``M^{-1}``."""
        return np.linalg.inv(self.minus_inverse(lams))

    def minus_coeffs(self, count=2):
        """``m_0, m_1, ...`` of ``M = sum_l m_l lambda^{-l}`` (series inverse of ``H``)."""
        h0inv = np.linalg.inv(self.H[0])
        m = [h0inv]
        for k in range(1, count):
            acc = sum(m[a] @ self.H[k - a] for a in range(k) if k - a < self.H.shape[0])
            m.append(-acc @ h0inv)
        return m

    def plus(self, lams):
        """``E(lambda)``: Laurent series inside the factorization circle, ``G M^{-1}`` outside."""
        lams = np.atleast_1d(np.asarray(lams, complex))
        outside = np.abs(lams) > self.radius * (1 + 1e-12)
        if self.G is not None and np.any(outside):
            out = np.empty((len(lams),) + self.e.shape[1:], complex)
            if np.any(~outside):
                out[~outside] = self.plus_series(lams[~outside])
            out[outside] = self.plus_direct(lams[outside])
            return out
        return self.plus_series(lams)

    def plus_series(self, lams):
        """``E(lambda)`` from its Laurent coefficients (accurate for ``|lambda| <= R``)."""
        lams = np.atleast_1d(np.asarray(lams, complex))
        K = self.e.shape[0]
        pw = lams[:, None] ** np.arange(K)[None, :]
        E = np.tensordot(pw, self.e, axes=(1, 0))
        if self.sigma is not None:
            pw2 = lams[:, None] ** (-np.arange(1, K))[None, :]
            E = E + np.tensordot(pw2, self.sigma(self.e[1:]), axes=(1, 0))
        return E

    def plus_direct(self, lams):
        """``E(lambda) = G(lambda) M(lambda)^{-1}`` (valid where ``M^{-1}`` converges)."""
        return self.G(lams) @ self.minus_inverse(lams)


def _fourier(G_fn, R, M):
    """Samples of ``G`` on ``|lambda| = R`` and their scaled Fourier coefficients."""
    zeta = np.exp(2j * np.pi * np.arange(M) / M)
    vals = G_fn(R * zeta)
    return vals, np.fft.fft(vals, axis=0) / M


CHUNK_BYTES = 32e6


def _chunk(rows, cols):
    """Nodes per batched solve, bounded by a memory budget."""
    return int(max(1, CHUNK_BYTES // (16 * rows * cols)))


def _batched_lstsq(A, b):
    """Least squares for stacked full-column-rank systems via reduced QR."""
    Q, Rr = np.linalg.qr(A)
    x = np.linalg.solve(Rr, np.conj(np.swapaxes(Q, -1, -2)) @ b)
    r = np.linalg.norm((A @ x - b).reshape(A.shape[0], -1), axis=-1)
    return x, r


def _solve_untwisted(Gt, d, K, R):
    """Scaled unknowns ``ht_l = h_l R^{-l}`` (``l = 1..d``, ``h_0 = I``); rows ``et_{-k} = 0``.

    ``et_{-k} = sum_{l=0}^{d} Gt_{l-k} ht_l`` for ``k = 1..K``.
    """
    M = Gt.shape[0]
    N = Gt.shape[-1]
    nodes = Gt.shape[1:-2]
    Gf = Gt.reshape(M, -1, N, N)
    P = Gf.shape[1]
    ks = np.arange(1, K + 1)
    ls = np.arange(1, d + 1)
    idx = (ls[None, :] - ks[:, None]) % M
    H = np.zeros((d + 1, P, N, N), complex)
    H[0] = np.eye(N)
    res = np.zeros(P)
    scale = (R ** ls.astype(float))[:, None, None]
    chunk = _chunk(K * N, d * N)
    for s0 in range(0, P, chunk):
        sl_ = slice(s0, min(P, s0 + chunk))
        blk = Gf[:, sl_]
        B = blk.shape[1]
        A = np.transpose(blk[idx], (2, 0, 3, 1, 4)).reshape(B, K * N, d * N)
        rhs = -np.transpose(blk[(-ks) % M], (1, 0, 2, 3)).reshape(B, K * N, N)
        x, r = _batched_lstsq(A, rhs)
        H[1:, sl_] = np.transpose(x.reshape(B, d, N, N), (1, 0, 2, 3)) * scale[:, None]
        res[sl_] = r
    return H.reshape((d + 1,) + nodes + (N, N)), res.reshape(nodes)


def _twisted_masks(n, d):
    N = 2 * n
    side = (np.arange(N) >= n).astype(int)
    even = (np.add.outer(side, side) % 2) == 0
    idx = []
    for l in range(d + 1):
        m = even if l % 2 == 0 else ~even
        for (p, q) in zip(*np.nonzero(m)):
            idx.append((l, int(p), int(q)))
    return idx


def _solve_twisted_uk(Gt, d, K, R, n):
    """Linear system for the ``o(n,n)`` twisted family (real unknowns, parity mask).

    Constraints: mirror ``et_{-k} = R^{-2k} sigma_2(et_k)`` for ``k = 0..K``;
    ``h_0`` top rows ``[I, 0]``; last ``n - 1`` rows of ``E(1)`` equal
    ``[0, I]``; ``h_0[n, n] = 1``.  Column ``n`` is rescaled afterwards so
    that ``h_0`` is orthogonal for ``I_{n,n}``, with ``det`` of its lower
    block positive.
    """
    M = Gt.shape[0]
    N = 2 * n
    nodes = Gt.shape[1:-2]
    Gf = Gt.reshape(M, -1, N, N)
    P = Gf.shape[1]
    sgn = np.r_[np.ones(n + 1), -np.ones(n - 1)]
    S = np.outer(sgn, sgn)
    idx = _twisted_masks(n, d)
    nu = len(idx)
    L = np.array([t[0] for t in idx])
    Pp = np.array([t[1] for t in idx])
    Qq = np.array([t[2] for t in idx])
    cidx = np.arange(nu)
    ks = np.arange(0, K + 1)
    wk = R ** (-ks.astype(float))
    # fixed rows: h_0 top rows, scale fix
    Bfix = np.zeros((n * N, nu))
    for c, (l, a, b) in enumerate(idx):
        if l == 0 and a < n:
            Bfix[a * N + b, c] = 1.0
    Cfix = np.zeros((1, nu))
    Cfix[0, idx.index((0, n, n))] = 1.0
    # et_k only has entries of parity k (block diagonal for even k, off-diagonal for odd k)
    side = (np.arange(N) >= n).astype(int)
    par = np.add.outer(side, side) % 2
    keep = (par[None] == (ks % 2)[:, None, None]).reshape(-1)
    rhs1 = np.concatenate([np.zeros(int(keep.sum())), np.eye(N)[:n].reshape(-1),
                           np.eye(N)[n + 1:].reshape(-1), np.ones(1)])
    real_data = bool(np.max(np.abs(Gt.imag)) <= 1e-12 * max(1.0, np.max(np.abs(Gt))))
    if not real_data:
        rhs1 = np.concatenate([rhs1, np.zeros_like(rhs1)])
    H = np.zeros((d + 1, P, N, N))
    res = np.zeros(P)
    chunk = _chunk(2 * (K + 1) * N * N, nu)
    for s0 in range(0, P, chunk):
        sl_ = slice(s0, min(P, s0 + chunk))
        blk = Gf[:, sl_]
        B = blk.shape[1]

        def et(kk):
            # coefficient of et_k = sum_l Gt_{k+l} ht_l in each real unknown: (len(kk), B, N, N, nu)
            T = blk[(kk[:, None] + L[None, :]) % M][:, cidx, :, :, Pp]  # (nu, nk, B, N)
            out = np.zeros((len(kk), B, N, N, nu), complex)
            out[:, :, :, Qq, cidx] = np.transpose(T, (1, 2, 3, 0))
            return out

        ep = et(ks)
        em = et(-ks)
        s_ep = ep * S[None, None, :, :, None]
        mirror = em - (wk ** 2)[:, None, None, None, None] * s_ep
        E1 = ep[0] + np.tensordot(wk[1:], ep[1:] + s_ep[1:], axes=(0, 0))
        A = np.concatenate([
            np.transpose(mirror, (1, 0, 2, 3, 4)).reshape(B, -1, nu)[:, keep],
            np.broadcast_to(Bfix, (B,) + Bfix.shape),
            E1[:, n + 1:].reshape(B, -1, nu),
            np.broadcast_to(Cfix, (B, 1, nu)),
        ], axis=1)
        A = A.real if real_data else np.concatenate([A.real, A.imag], axis=1)
        x, r = _batched_lstsq(A, np.broadcast_to(rhs1[:, None], (B, len(rhs1), 1)))
        Hb = np.zeros((B, d + 1, N, N))
        Hb[:, L, Pp, Qq] = x[..., 0] * R ** L.astype(float)
        s = np.linalg.norm(Hb[:, 0, n:, n], axis=-1)
        Hb[:, :, :, n] /= s[:, None, None]
        flip = np.linalg.det(Hb[:, 0, n:, n:]) < 0
        Hb[flip, :, :, n] *= -1
        H[:, sl_] = np.transpose(Hb, (1, 0, 2, 3))
        res[sl_] = r
    return H.reshape((d + 1,) + nodes + (N, N)), res.reshape(nodes)


def _plus_coeffs(Gs, H, R, K):
    """Laurent coefficients ``e_k`` (``k = 0..K``) of ``E = G H`` from circle samples ``Gs``."""
    M = Gs.shape[0]
    zeta = np.exp(2j * np.pi * np.arange(M) / M)
    pw = (R * zeta)[:, None] ** (-np.arange(H.shape[0]))[None, :]
    Es = Gs @ np.tensordot(pw, H, axes=(1, 0))
    Et = np.fft.fft(Es, axis=0)[:K + 1] / M
    return Et * (R ** (-np.arange(K + 1, dtype=float))).reshape((-1,) + (1,) * (Et.ndim - 1))


def depth_schedule(ratio, depths=DEFAULT_DEPTHS, target=1e-10):
    """Depths worth trying when the minus factor's series decays like ``ratio^l``."""
    if ratio is None or not 0 < ratio < 1:
        return tuple(depths)
    d0 = np.log(target) / np.log(ratio)
    keep = tuple(d for d in depths if d >= d0 - 8)
    return keep or (max(depths),)


def birkhoff_factorize(G_fn: Callable, family: Family | str, radius: float, depths=DEFAULT_DEPTHS,
                       samples: int = 256, tol: float = RECON_TOL, extra: int = 8,
                       raise_on_failure=True) -> FactorizationResult:
    """Factor ``G = E M`` at every node.

    ``G_fn(lams)`` returns ``(len(lams), *nodes, N, N)``.  The truncation
    depth is increased through ``depths`` until the reconstruction residual
    (measured on a circle rotated by half a sampling step) stalls below
    ``tol``.  Nodes whose residual stays above ``tol`` raise
    :class:`FactorizationError` (or are reported in ``meta['failed']``).
    """
    name = family if isinstance(family, str) else family.name
    if name == "twisted-U":
        raise UnsupportedOperationError(
            "the twisted sl(n,R) group involution is not linear; the linear solver does not apply")
    R = float(radius)
    Gs, Gt = _fourier(G_fn, R, samples)
    N = Gt.shape[-1]
    nodes = Gt.shape[1:-2]
    sigma = None
    if name == "twisted-U/K":
        n = N // 2
        D2 = np.diag(np.r_[np.ones(n + 1), -np.ones(n - 1)])
        sigma = lambda X: D2 @ X @ D2
    # check circle rotated by half a step
    M = samples
    zc = R * np.exp(2j * np.pi * (np.arange(M // 4) + 0.5) / (M // 4))
    Gc = G_fn(zc)
    scale = np.maximum(1.0, np.max(np.abs(Gc).reshape(len(zc), *nodes, -1), axis=(0, -1)))
    best = None
    for d in depths:
        K = d + extra
        if name == "twisted-U/K":
            H, lsq = _solve_twisted_uk(Gt, d, K, R, N // 2)
        else:
            H, lsq = _solve_untwisted(Gt, d, K, R)
        e = _plus_coeffs(Gs, H, R, K + 2 * extra)
        res = FactorizationResult(H, e, name, R, d, np.zeros(nodes), G_fn, sigma, {"lstsq": lsq})
        recon = res.plus(zc) - Gc @ res.minus_inverse(zc)
        err = np.max(np.abs(recon).reshape(len(zc), *nodes, -1), axis=(0, -1)) / scale
        res.residual = err
        if best is not None and np.all(err < tol) and np.max(err) >= 0.5 * np.max(best.residual):
            break
        best = res
        if np.all(err < tol * 1e-2):
            break
    res = best if best is not None and np.max(best.residual) <= np.max(res.residual) else res
    failed = np.argwhere(res.residual > tol)
    res.meta["failed"] = [tuple(int(i) for i in f) for f in failed]
    if failed.size and raise_on_failure:
        node = tuple(int(i) for i in failed[0])
        raise FactorizationError(f"factorization did not converge at node {node} "
                                 f"(residual {res.residual[node]:.2e})", node, float(res.residual[node]))
    return res


def uniqueness_probe(G_fn, family, radius, result: FactorizationResult, lams, **kw):
    """Largest difference of ``M^{-1}`` at ``lams`` between ``result`` and a second solve
    with a different radius and deeper truncation."""
    other = birkhoff_factorize(G_fn, family, radius * 1.15, depths=(result.depth + 8,), **kw)
    return float(np.max(np.abs(other.minus_inverse(lams) - result.minus_inverse(lams))))


# --------------------------------------------------------------------------
# formal inverse scattering and dressing
# --------------------------------------------------------------------------

@dataclass
class InverseScatteringResult:
    """``P_f``-type connection components on a grid, with the factorization behind them.

    ``components[k]`` is ``pi_+(M J_k M^{-1})`` for the ``k``-th flow, so
    ``components[0]`` is ``P_f`` when the first flow is the ``x``-flow.
    Nodes where the factorization failed carry NaN and are listed in
    ``failed``.
    """

    components: list
    factorization: FactorizationResult
    grid: Grid | None
    flows: list
    failed: list = field(default_factory=list)

    @property
    def P(self) -> LoopElement:
        return self.components[0]

    def frame(self, lams):
        """``E(lambda)`` on the grid, shape ``(len(lams), *grid.shape, N, N)``."""
        return self.factorization.plus(lams)

    def minus(self, lams):
        """The Baker function ``M(lambda)`` (for ``|lambda|`` outside the poles)."""
        return self.factorization.minus(lams)


def _default_radius(f: RationalLoop | None, family_name):
    """A factorization circle enclosing every pole with margin."""
    rho = f.pole_radius() if f is not None else 1.0
    if family_name == "twisted-U/K":
        return max(2.0, 2.0 * rho)
    return 2.0 * rho if rho > 0 else 1.0


def _family_of(h):
    return h.family if hasattr(h, "family") else h


def _default_flows(family: Family, ndim):
    if family.name == "twisted-U/K":
        return [(i + 1, 1) for i in range(ndim)]
    seed = 1 if np.allclose(family.cartan.a1, family.cartan.basis[0]) else 0
    return [(seed, 1)] + [(seed, j) for j in range(2, ndim + 1)]


def formal_inverse_scattering(f: RationalLoop, h, grid: Grid | None = None, flows=None, radius=None,
                              samples=256, **kw) -> InverseScatteringResult:
    """Factor ``f V = E M`` with ``V = exp(sum_k x_k J_k)`` and return ``pi_+(M J_k M^{-1})``.

    ``h`` is a :class:`HierarchyInstance` (its grid is the default) or a
    family.  Grid axis ``k`` is the time of flow ``flows[k] = (i, j)``; by
    default the axes are ``x, t_2, t_3, ...`` of the seed element (untwisted
    families) or ``x_1, ..., x_m`` of the degree-one flows (``o(n,n)``).
    """
    family = _family_of(h)
    grid = grid if grid is not None else h.grid
    flows = list(flows) if flows is not None else _default_flows(family, grid.ndim)
    if len(flows) != grid.ndim:
        raise StructuralError("one flow per grid axis is required")
    gens = [family.vacuum_generator(i, j) for i, j in flows]
    coords = np.stack(grid.mesh(), -1)
    kw.setdefault("raise_on_failure", False)
    res = inverse_scattering(f, family, gens, coords, radius=radius, samples=samples, **kw)
    res.grid, res.flows = grid, flows
    return res


def inverse_scattering(f: RationalLoop, family: Family, generators: Sequence[LoopElement], coords,
                       radius=None, samples=256, **kw) -> InverseScatteringResult:
    """Core of :func:`formal_inverse_scattering` on an explicit coordinate array ``(*nodes, k)``."""
    coords = np.asarray(coords, float)
    V = vacuum_frame_function(family, generators, coords)
    R = radius or _default_radius(f, family.name)

    def G(lams):
        lams = np.atleast_1d(lams)
        return f(lams).reshape((-1,) + (1,) * (coords.ndim - 1) + (f.N, f.N)) @ V(lams)

    kw.setdefault("depths", depth_schedule(f.pole_radius() / R))
    fac = birkhoff_factorize(G, family, R, samples=samples, **kw)
    comps = [_plus_of_conjugate(fac, J, family) for J in generators]
    failed = fac.meta.get("failed", [])
    if failed:
        comps = [_mask_nodes(c, failed) for c in comps]
    return InverseScatteringResult(comps, fac, None, [], failed)


def _mask_nodes(xi: LoopElement, nodes):
    c = np.array(xi.coeffs)
    for nd in nodes:
        c[(slice(None),) + tuple(nd)] = np.nan
    return LoopElement(c, xi.lo, xi.algebra, xi.max_band)


def _plus_of_conjugate(fac: FactorizationResult, J: LoopElement, family: Family) -> LoopElement:
    """``pi_+(M J M^{-1})`` from the leading coefficients of ``M`` and ``M^{-1}``."""
    j = max(J.hi, 1)
    m = fac.minus_coeffs(j + 1)
    h = [fac.H[c] for c in range(min(j + 1, fac.H.shape[0]))]
    A = {}
    for k in range(0, j + 1):
        acc = 0
        for b in J.degrees:
            Jb = J.coeff(b)
            if not np.any(Jb):
                continue
            for a_ in range(0, j + 1):
                c = b - a_ - k
                if 0 <= c < len(h):
                    acc = acc + m[a_] @ Jb @ h[c]
        A[k] = acc if not np.isscalar(acc) else np.zeros_like(m[0])
    if family.name == "twisted-U/K":
        full = LoopElement(np.stack([A[k] for k in range(j + 1)]), 0, family.algebra)
        xi0, _ = family.xi0_eta0(full)
        coeffs = [family.sigma2(A[k]) for k in range(j, 0, -1)] + [xi0] + [A[k] for k in range(1, j + 1)]
        return LoopElement(np.stack(coeffs), -j, family.algebra)
    return LoopElement(np.stack([A[k] for k in range(j + 1)]), 0, family.algebra)


def dress(f: RationalLoop, frame_fn: Callable, components: Sequence[LoopElement], family: Family,
          radius=None, samples=256, **kw):
    """Dressing action ``f * P`` through a Birkhoff factorization.

    ``frame_fn(lams)`` returns the frame ``E`` of the solution at the given
    spectral values with shape ``(len(lams), *nodes, N, N)``;
    ``components`` are the connection components ``theta_k = E^{-1} d_k E``.
    Factoring ``f E = E~ f~`` gives ``theta~_k = pi_+(f~ theta_k f~^{-1})``
    (the ``d f~ f~^{-1}`` term lies in the minus algebra).  Returns
    ``(components~, factorization)``; ``factorization.plus_direct`` is the new frame.
    """
    R = radius or _default_radius(f, family.name)

    def G(lams):
        Fv = f(np.atleast_1d(lams))
        E = frame_fn(lams)
        return Fv.reshape((Fv.shape[0],) + (1,) * (E.ndim - 3) + Fv.shape[1:]) @ E

    kw.setdefault("depths", depth_schedule(f.pole_radius() / R))
    fac = birkhoff_factorize(G, family, R, samples=samples, **kw)
    return [_plus_of_conjugate(fac, th, family) for th in components], fac


# --------------------------------------------------------------------------
# closed-form dressing for the unitary family
# --------------------------------------------------------------------------

def dress_projector_closed_form(f: RationalLoop, E_at_conj_pole, a1, u):
    """Closed-form dressing by a product of projector factors.

    For one factor ``I + ((z - conj z)/(lambda - z)) pi``:
    ``f E = E~ f~`` with ``f~ = I + ((z - conj z)/(lambda - z)) pi~``, where
    ``pi~`` projects orthogonally onto ``E(conj z)^{-1} Im(pi)``, and the new
    potential is ``u~ = u - (z - conj z) [a_1, pi~]``.

    ``E_at_conj_pole(z)`` returns the frame at ``conj z`` on the node grid.
    Factors are applied right to left; the frame is updated between steps.
    """
    u = np.asarray(u, complex)
    updates = []
    # apply factors in order f = f_1 f_2 ... f_k: dressing by f acts as f_1 * (f_2 * (... * P))
    frame_at = E_at_conj_pole
    for fac in reversed(f.factors):
        z = fac.z
        Ez = frame_at(z)
        w, V = np.linalg.eigh(fac.pi)
        cols = V[:, w > 0.5]
        img = np.linalg.solve(Ez, np.broadcast_to(cols, Ez.shape[:-1] + (cols.shape[1],)))
        Qm, _ = np.linalg.qr(img)
        pit = Qm @ np.conj(np.swapaxes(Qm, -1, -2))
        u = u - (z - np.conj(z)) * (a1 @ pit - pit @ a1)
        updates.append((fac, pit))
        frame_at = _dressed_frame_factory(frame_at, fac, pit)
    return u, updates


def _dressed_frame_factory(frame_at, fac: ProjectorFactor, pit):
    """Frame of the dressed solution: ``E~(lambda) = f(lambda) E(lambda) f~(lambda)^{-1}``."""
    def new_frame(zq):
        lam = np.conj(zq)
        E = frame_at(zq)
        ftil_inv = np.eye(pit.shape[-1]) + ((np.conj(fac.z) - fac.z) / (lam - np.conj(fac.z))) * pit
        return fac(lam) @ E @ ftil_inv
    return new_frame


def nls_soliton_closed_form(x, t, z, c=1.0):
    """The one-soliton ``q~ = 4 beta pi~_12`` from dressing the vacuum.

    With ``z = alpha + i beta`` and ``Im(pi) = span (1, c)``, the amplitude is
    ``2 beta`` and the velocity ``-2 alpha`` for the flow
    ``q_t = (i/2)(q_xx + 2|q|^2 q)``.
    """
    z = complex(z)
    zb = np.conj(z)
    ph = 1j * (zb * np.asarray(x) + zb ** 2 * np.asarray(t))
    w1 = np.exp(-ph)
    w2 = c * np.exp(ph)
    return 4 * z.imag * w1 * np.conj(w2) / (np.abs(w1) ** 2 + np.abs(w2) ** 2)


# --------------------------------------------------------------------------
# soliton diagnostics
# --------------------------------------------------------------------------

@dataclass
class SolitonTrack:
    """Center (``int x |q|^2 / int |q|^2``), peak amplitude and velocity per time."""

    times: np.ndarray
    centers: np.ndarray
    amplitudes: np.ndarray

    @property
    def velocities(self):
        return np.diff(self.centers) / np.diff(self.times)

    def drift(self):
        """``(amplitude drift, velocity drift)`` relative to their means."""
        amp = np.max(np.abs(self.amplitudes - self.amplitudes.mean())) / abs(self.amplitudes.mean())
        v = self.velocities
        vel = np.max(np.abs(v - v.mean())) / max(abs(v.mean()), 1e-300)
        return float(amp), float(vel)


def track_soliton(q, x, times) -> SolitonTrack:
    """Track a single-hump profile ``q[x, t]``.

    The peak amplitude is refined by a parabola through the three largest
    samples of ``|q|``.
    """
    q = np.asarray(q)
    x = np.asarray(x, float)
    w = np.abs(q) ** 2
    centers = np.sum(w * x[:, None], axis=0) / np.sum(w, axis=0)
    amps = []
    for k in range(q.shape[1]):
        a = np.abs(q[:, k])
        m = int(np.clip(np.argmax(a), 1, len(a) - 2))
        y0, y1, y2 = a[m - 1], a[m], a[m + 1]
        den = y0 - 2 * y1 + y2
        s = 0.5 * (y0 - y2) / den if den != 0 else 0.0
        amps.append(y1 - 0.25 * (y0 - y2) * s)
    return SolitonTrack(np.asarray(times, float), centers, np.array(amps))
