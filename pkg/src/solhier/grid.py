"""Uniform grids, high-order derivatives and cumulative quadrature.

Two boundary models are supported.  ``"decaying"`` grids use fourth-order
finite differences (central in the interior, one-sided near the edges) and
a fourth-order cumulative quadrature.  ``"periodic"`` grids use FFT
differentiation and an FFT antiderivative.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import StructuralError

BOUNDARIES = ("decaying", "periodic")


@dataclass(frozen=True)
class Axis:
    """One uniformly sampled coordinate ``start + k * step``, ``k = 0..size-1``."""

    name: str
    start: float
    step: float
    size: int
    boundary: str | None = None

    def __post_init__(self):
        if self.boundary is not None and self.boundary not in BOUNDARIES:
            raise StructuralError(f"unknown boundary model {self.boundary!r}")
        if not self.step > 0:
            raise StructuralError(f"axis {self.name!r} needs a positive spacing")
        if self.size < 5:
            raise StructuralError(f"axis {self.name!r} needs at least 5 nodes")

    @property
    def points(self):
        return self.start + self.step * np.arange(self.size)

    @classmethod
    def periodic(cls, name, a, b, size, boundary=None):
        """``size`` nodes on ``[a, b)``."""
        return cls(name, float(a), (b - a) / size, int(size), boundary)

    @classmethod
    def closed(cls, name, a, b, size, boundary=None):
        """``size`` nodes on ``[a, b]`` including both ends."""
        return cls(name, float(a), (b - a) / (size - 1), int(size), boundary)


@dataclass(frozen=True)
class Grid:
    """Tensor grid of one or more :class:`Axis` objects with a boundary model."""

    axes: tuple
    boundary: str = "decaying"

    def __post_init__(self):
        object.__setattr__(self, "axes", tuple(self.axes))
        if self.boundary not in BOUNDARIES:
            raise StructuralError(f"unknown boundary model {self.boundary!r}")

    @property
    def shape(self):
        return tuple(a.size for a in self.axes)

    @property
    def ndim(self):
        return len(self.axes)

    def axis_index(self, name):
        for k, a in enumerate(self.axes):
            if a.name == name:
                return k
        raise StructuralError(f"no axis named {name!r}")

    def axis_boundary(self, k):
        """Boundary model of axis ``k`` (its own, else the grid default)."""
        return self.axes[k].boundary or self.boundary

    def mesh(self):
        return np.meshgrid(*[a.points for a in self.axes], indexing="ij")

    def d(self, f, axis=0, array_axis=None):
        """First derivative of samples ``f`` along grid axis ``axis``.

        ``array_axis`` is the position of that grid axis in ``f`` when it is
        not the same as ``axis`` (e.g. when a degree axis leads).
        """
        if isinstance(axis, str):
            axis = self.axis_index(axis)
        h = self.axes[axis].step
        periodic = self.axis_boundary(axis) == "periodic"
        axis = axis if array_axis is None else array_axis
        if periodic:
            return spectral_derivative(f, h, axis)
        return fd4_derivative(f, h, axis)

    def antiderivative(self, f, axis=0):
        """Antiderivative vanishing at the first node; returns ``(F, mean)``.

        ``mean`` is the average of ``f`` along the axis for periodic grids (a
        nonzero mean means the integrand is not an exact derivative) and
        ``None`` otherwise.
        """
        if isinstance(axis, str):
            axis = self.axis_index(axis)
        h = self.axes[axis].step
        if self.axis_boundary(axis) == "periodic":
            return spectral_antiderivative(f, h, axis)
        return cumulative_quad4(f, h, axis), None


@dataclass
class GridField:
    """Samples of a scalar, matrix or loop-coefficient field on a :class:`Grid`.

    ``samples`` has the grid axes first; trailing axes hold the value.
    """

    grid: Grid
    samples: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.samples = np.asarray(self.samples)
        if self.samples.shape[:self.grid.ndim] != self.grid.shape:
            raise StructuralError(f"samples {self.samples.shape} do not match grid {self.grid.shape}")

    def edge_norm(self):
        """Largest sample magnitude on the boundary of the grid."""
        s = np.abs(self.samples)
        m = 0.0
        for ax in range(self.grid.ndim):
            m = max(m, float(np.max(np.take(s, [0, -1], axis=ax))))
        return m

    def check_decay(self, tol):
        return self.grid.boundary != "decaying" or self.edge_norm() < tol


# --------------------------------------------------------------------------
# stencils
# --------------------------------------------------------------------------

def fd4_derivative(f, h, axis=0):
    """Fourth-order finite-difference first derivative with one-sided edges."""
    f = np.moveaxis(np.asarray(f), axis, 0)
    if f.shape[0] < 5:
        raise StructuralError("fourth-order differences need at least 5 nodes")
    g = np.empty(f.shape, dtype=np.result_type(f, float))
    g[2:-2] = (-f[4:] + 8 * f[3:-1] - 8 * f[1:-3] + f[:-4]) / (12 * h)
    g[0] = (-25 * f[0] + 48 * f[1] - 36 * f[2] + 16 * f[3] - 3 * f[4]) / (12 * h)
    g[1] = (-3 * f[0] - 10 * f[1] + 18 * f[2] - 6 * f[3] + f[4]) / (12 * h)
    g[-1] = (25 * f[-1] - 48 * f[-2] + 36 * f[-3] - 16 * f[-4] + 3 * f[-5]) / (12 * h)
    g[-2] = (3 * f[-1] + 10 * f[-2] - 18 * f[-3] + 6 * f[-4] - f[-5]) / (12 * h)
    return np.moveaxis(g, 0, axis)


def _wavenumbers(n, h):
    k = 2 * np.pi * np.fft.fftfreq(n, h)
    if n % 2 == 0:
        k[n // 2] = 0.0
    return k


def spectral_derivative(f, h, axis=0):
    """FFT derivative on a periodic grid (Nyquist mode suppressed)."""
    f = np.asarray(f)
    n = f.shape[axis]
    shape = [1] * f.ndim
    shape[axis] = n
    k = _wavenumbers(n, h).reshape(shape)
    out = np.fft.ifft(1j * k * np.fft.fft(f, axis=axis), axis=axis)
    return out if np.iscomplexobj(f) else out.real


def spectral_antiderivative(f, h, axis=0):
    """FFT antiderivative on a periodic grid, zero at the first node.

    The mean of ``f`` is integrated as a linear ramp and returned so callers
    can flag integrands that are not exact derivatives.
    """
    f = np.asarray(f)
    n = f.shape[axis]
    shape = [1] * f.ndim
    shape[axis] = n
    k = _wavenumbers(n, h)
    F = np.fft.fft(f, axis=axis)
    mean = np.take(F, [0], axis=axis) / n
    kk = k.copy()
    kk[kk == 0] = 1.0
    G = F / (1j * kk.reshape(shape))
    zero = (k == 0).reshape(shape)
    G = np.where(zero, 0, G)
    g = np.fft.ifft(G, axis=axis)
    x = (np.arange(n) * h).reshape(shape)
    g = g + mean * x
    g = g - np.take(g, [0], axis=axis)
    if not np.iscomplexobj(f):
        g = g.real
        mean = mean.real
    return g, np.squeeze(mean, axis=axis)


def cumulative_quad4(f, h, axis=0):
    """Fourth-order cumulative integral from the first node (complex-safe).

    Each panel ``[x_i, x_{i+1}]`` is integrated with the cubic through the
    four nearest nodes.
    """
    f = np.moveaxis(np.asarray(f), axis, 0)
    if f.shape[0] < 4:
        raise StructuralError("cumulative quadrature needs at least 4 nodes")
    seg = np.empty((f.shape[0] - 1,) + f.shape[1:], dtype=np.result_type(f, float))
    seg[1:-1] = h * (-f[:-3] + 13 * f[1:-2] + 13 * f[2:-1] - f[3:]) / 24
    seg[0] = h * (9 * f[0] + 19 * f[1] - 5 * f[2] + f[3]) / 24
    seg[-1] = h * (9 * f[-1] + 19 * f[-2] - 5 * f[-3] + f[-4]) / 24
    out = np.zeros(f.shape, dtype=seg.dtype)
    out[1:] = np.cumsum(seg, axis=0)
    return np.moveaxis(out, 0, axis)


def integrate(f, grid: Grid, axis=0):
    """Definite integral over the whole axis."""
    if isinstance(axis, str):
        axis = grid.axis_index(axis)
    h = grid.axes[axis].step
    if grid.axis_boundary(axis) == "periodic":
        return np.sum(f, axis=axis) * h
    return np.take(cumulative_quad4(f, h, axis), -1, axis=axis)


def line_grid(a, b, n, boundary="periodic", name="x") -> Grid:
    """A 1-D grid; periodic grids omit the right endpoint."""
    ax = Axis.periodic(name, a, b, n) if boundary == "periodic" else Axis.closed(name, a, b, n)
    return Grid((ax,), boundary)
