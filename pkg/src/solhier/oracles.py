"""Dense linear-solve oracles for the five splittings.

The oracle builds real bases of ``L+`` and ``L-`` restricted to a degree
band directly from their defining linear conditions (coded here with
explicit matrix formulas rather than through the projection routines) and
recovers ``xi = xi_+ + xi_-`` by least squares.  It also reports whether
the two subspaces intersect trivially, so the decomposition is direct.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import ConfigurationError
from .loops import LoopElement


def _sgn(n_plus, n_minus):
    return np.r_[np.ones(n_plus), -np.ones(n_minus)]


def _conditions(name: str, n: int):
    """Return ``(N, base, plus, minus)``: callables mapping a coefficient
    stack ``C[deg_index]`` over degrees ``degs`` to lists of residual arrays."""
    if name in ("standard", "tau"):
        N = n
    elif name == "tau-sigma":
        N = 2
    elif name == "twisted-U":
        N = n
    elif name == "twisted-U/K":
        N = 2 * n
    else:
        raise ConfigurationError(f"unknown family {name!r}")

    def coeff(C, degs, j):
        k = j - degs[0]
        return C[k] if 0 <= k < len(degs) else np.zeros((N, N), complex)

    def trace(C, degs):
        return [np.trace(C, axis1=-2, axis2=-1)]

    if name == "standard":
        def base(C, degs):
            return trace(C, degs)
    elif name == "tau":
        def base(C, degs):
            return trace(C, degs) + [C + np.conj(np.swapaxes(C, -1, -2))]
    elif name == "tau-sigma":
        def base(C, degs):
            par = np.array([(-1.0) ** j for j in degs])[:, None, None]
            return trace(C, degs) + [C + np.conj(np.swapaxes(C, -1, -2)), par * np.conj(C) - C]
    elif name == "twisted-U":
        def base(C, degs):
            return trace(C, degs) + [C.imag]
    else:
        I = np.diag(_sgn(n, n))

        def base(C, degs):
            par = np.array([(-1.0) ** j for j in degs])[:, None, None]
            return [C.imag, np.swapaxes(C, -1, -2) @ I + I @ C, par * (I @ C @ I) - C]

    if name in ("standard", "tau", "tau-sigma"):
        def plus(C, degs):
            return [C[np.array(degs) < 0]]

        def minus(C, degs):
            return [C[np.array(degs) >= 0]]
    elif name == "twisted-U":
        def plus(C, degs):
            return [coeff(C, degs, -j) + coeff(C, degs, j).T for j in degs]

        def minus(C, degs):
            low = np.tril(np.ones((N, N)), -1).astype(bool)
            return [C[np.array(degs) > 0], coeff(C, degs, 0)[low]]
    else:
        D2 = np.diag(_sgn(n + 1, n - 1))

        def plus(C, degs):
            at_one = C.sum(axis=0)
            return [coeff(C, degs, -j) - D2 @ coeff(C, degs, j) @ D2 for j in degs] + \
                   [at_one[n + 1:, :], at_one[:, n + 1:]]

        def minus(C, degs):
            c0 = coeff(C, degs, 0)
            return [C[np.array(degs) > 0], c0[:n, :], c0[:, :n]]

    return N, base, plus, minus


def _realify(parts):
    out = []
    for p in parts:
        p = np.asarray(p)
        out.append(p.real.ravel())
        out.append(p.imag.ravel())
    return np.concatenate(out) if out else np.zeros(0)


def _null_basis(fn, shape, tol=1e-11):
    """Real basis (columns) of the kernel of the real-linear map ``fn`` on complex arrays of ``shape``."""
    dim = int(np.prod(shape))
    cols = []
    for k in range(2 * dim):
        v = np.zeros(2 * dim)
        v[k] = 1.0
        X = (v[:dim] + 1j * v[dim:]).reshape(shape)
        cols.append(_realify(fn(X)))
    A = np.array(cols).T
    if A.shape[0] == 0:
        return np.eye(2 * dim)
    return scipy.linalg.null_space(A, rcond=tol)


@dataclass
class SplitOracle:
    """Bases of ``L+`` and ``L-`` on degrees ``degs`` and the least-squares solver."""

    name: str
    n: int
    degs: list
    N: int
    Bplus: np.ndarray
    Bminus: np.ndarray
    Bsum_pinv: np.ndarray
    intersection_dim: int

    def _vec(self, xi: LoopElement):
        C = xi.with_band(self.degs[0], self.degs[-1]).coeffs
        return np.concatenate([C.real.ravel(), C.imag.ravel()])

    def _unvec(self, v, algebra=None):
        dim = len(v) // 2
        C = (v[:dim] + 1j * v[dim:]).reshape(len(self.degs), self.N, self.N)
        return LoopElement(C, self.degs[0], algebra)

    def split(self, xi: LoopElement):
        """``(xi_+, xi_-, residual)`` where ``residual`` measures ``xi`` outside ``L+ + L-``."""
        v = self._vec(xi)
        c = self.Bsum_pinv @ v
        kp = self.Bplus.shape[1]
        vp = self.Bplus @ c[:kp]
        vm = self.Bminus @ c[kp:]
        res = float(np.linalg.norm(vp + vm - v))
        return self._unvec(vp, xi.algebra), self._unvec(vm, xi.algebra), res


def build_split_oracle(name: str, n: int, h: int) -> SplitOracle:
    """Oracle for loops with degrees in ``[-h, h]``."""
    N, base, plus, minus = _conditions(name, n)
    degs = list(range(-h, h + 1))
    shape = (len(degs), N, N)
    Bp = _null_basis(lambda C: base(C, degs) + plus(C, degs), shape)
    Bm = _null_basis(lambda C: base(C, degs) + minus(C, degs), shape)
    B = np.hstack([Bp, Bm])
    s = np.linalg.svd(B, compute_uv=False)
    rank = int(np.sum(s > 1e-10 * s[0]))
    return SplitOracle(name, n, degs, N, Bp, Bm, np.linalg.pinv(B), B.shape[1] - rank)
