"""Uniform n-dimensional grids and finite measures living on them.

A :class:`GridSpec` with ``N`` points per axis and half-width ``R`` has
nodes ``x_i = (i - N/2) h`` with ``h = 2R/N``, so the origin is always a
node (index ``N/2``) and the grid covers ``[-R, R - h]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.fft as sfft

from .errors import GridCoverage


def _is_pow2(k: int) -> bool:
    return k > 0 and (k & (k - 1)) == 0


@dataclass(frozen=True)
class GridSpec:
    """Axis-aligned uniform grid centred at the origin."""

    dim: int
    extent: tuple
    n_points: tuple

    def __post_init__(self):
        ext = self.extent
        npts = self.n_points
        if np.isscalar(ext):
            ext = (float(ext),) * self.dim
        if np.isscalar(npts):
            npts = (int(npts),) * self.dim
        ext = tuple(float(e) for e in ext)
        npts = tuple(int(k) for k in npts)
        if len(ext) != self.dim or len(npts) != self.dim:
            raise ValueError("extent and n_points must have one entry per axis")
        if any(e <= 0 for e in ext):
            raise ValueError("grid extent must be positive")
        if not all(_is_pow2(k) for k in npts):
            raise ValueError(f"point counts must be powers of two, got {npts}")
        object.__setattr__(self, "extent", ext)
        object.__setattr__(self, "n_points", npts)

    @classmethod
    def cube(cls, dim: int, extent: float, n_points: int) -> "GridSpec":
        return cls(dim, (extent,) * dim, (n_points,) * dim)

    @property
    def spacing(self) -> tuple:
        return tuple(2.0 * e / k for e, k in zip(self.extent, self.n_points))

    @property
    def shape(self) -> tuple:
        return self.n_points

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    @property
    def origin_index(self) -> tuple:
        return tuple(k // 2 for k in self.n_points)

    def nyquist(self) -> float:
        """Largest frequency resolved on every axis, ``pi / h``."""
        return math.pi / max(self.spacing)

    def axes(self) -> list:
        return [(np.arange(k) - k // 2) * h for k, h in zip(self.n_points, self.spacing)]

    def mesh(self) -> list:
        return np.meshgrid(*self.axes(), indexing="ij")

    def norms(self) -> np.ndarray:
        """Euclidean norm of every node, shaped like the grid."""
        sq = np.zeros(self.shape)
        for ax, x in enumerate(self.axes()):
            shp = [1] * self.dim
            shp[ax] = -1
            sq = sq + x.reshape(shp) ** 2
        return np.sqrt(sq)

    def points(self) -> np.ndarray:
        return np.stack([m.ravel() for m in self.mesh()], axis=-1)

    def node(self, index) -> np.ndarray:
        return np.array([(i - k // 2) * h for i, k, h in zip(index, self.n_points, self.spacing)])

    def inner_radius(self) -> float:
        """Radius of the largest centred ball contained in the grid."""
        return min(e - h for e, h in zip(self.extent, self.spacing))

    def refined(self, factor: int = 2) -> "GridSpec":
        """Same extent, ``factor`` times more points per axis."""
        return GridSpec(self.dim, self.extent, tuple(k * factor for k in self.n_points))

    def enlarged(self, factor: int = 2) -> "GridSpec":
        """Same spacing, ``factor`` times the extent."""
        return GridSpec(self.dim, tuple(e * factor for e in self.extent),
                        tuple(k * factor for k in self.n_points))

    def same_spacing(self, other: "GridSpec") -> bool:
        return self.dim == other.dim and np.allclose(self.spacing, other.spacing, rtol=1e-12)


def deposit(grid: GridSpec, points: np.ndarray, weights: np.ndarray):
    """Cloud-in-cell assignment of weighted points to grid nodes.

    Each point's weight is split multilinearly between the ``2**n``
    surrounding nodes, which conserves mass and first moments exactly.
    Returns ``(masses, outside)`` where ``outside`` is the weight of the
    points that fall outside the grid.
    """
    points = np.asarray(points, dtype=float).reshape(-1, grid.dim)
    weights = np.broadcast_to(np.asarray(weights, dtype=float), (points.shape[0],))
    masses = np.zeros(grid.shape)
    if points.shape[0] == 0:
        return masses, 0.0
    frac = np.empty_like(points)
    for ax, (k, h) in enumerate(zip(grid.n_points, grid.spacing)):
        frac[:, ax] = points[:, ax] / h + k // 2
    upper = np.array(grid.n_points) - 1
    inside = np.all((frac >= -1e-9) & (frac <= upper + 1e-9), axis=1)
    outside = float(weights[~inside].sum())
    frac = np.clip(frac[inside], 0, upper)
    w = weights[inside]
    lo = np.minimum(np.floor(frac).astype(np.int64), upper - 1 if grid.dim else 0)
    lo = np.maximum(lo, 0)
    t = frac - lo
    flat = masses.ravel()
    for corner in range(2 ** grid.dim):
        bits = [(corner >> ax) & 1 for ax in range(grid.dim)]
        idx = lo + np.array(bits)
        cw = w.copy()
        for ax, b in enumerate(bits):
            cw *= t[:, ax] if b else 1.0 - t[:, ax]
        lin = np.ravel_multi_index(tuple(idx.T), grid.shape)
        flat += np.bincount(lin, weights=cw, minlength=flat.size)
    return flat.reshape(grid.shape), outside


@dataclass(frozen=True)
class FiniteMeasure:
    """Finite measure discretised as node masses on a :class:`GridSpec`.

    ``total_mass`` is the mass of the measure being represented, which can
    exceed ``masses.sum()`` when part of it lies beyond the grid; the
    difference is ``outside_mass``.
    """

    grid: GridSpec
    masses: np.ndarray = field(repr=False)
    total_mass: float

    @property
    def grid_mass(self) -> float:
        return float(self.masses.sum())

    @property
    def outside_mass(self) -> float:
        return max(self.total_mass - self.grid_mass, 0.0)

    @classmethod
    def zero(cls, grid: GridSpec) -> "FiniteMeasure":
        return cls(grid, np.zeros(grid.shape), 0.0)

    @classmethod
    def delta(cls, grid: GridSpec, weight: float = 1.0) -> "FiniteMeasure":
        m = np.zeros(grid.shape)
        m[grid.origin_index] = weight
        return cls(grid, m, float(weight))

    @classmethod
    def from_points(cls, grid: GridSpec, points, weights, total_mass=None) -> "FiniteMeasure":
        masses, outside = deposit(grid, points, weights)
        if total_mass is None:
            total_mass = float(masses.sum() + outside)
        return cls(grid, masses, float(total_mass))

    def scaled(self, c: float) -> "FiniteMeasure":
        return FiniteMeasure(self.grid, self.masses * c, self.total_mass * c)

    def support_radius(self) -> float:
        """Largest node norm carrying nonzero mass."""
        nz = self.masses != 0
        if not nz.any():
            return 0.0
        return float(self.grid.norms()[nz].max())

    def first_moment(self) -> np.ndarray:
        return np.array([np.sum(self.masses * m) for m in self.grid.mesh()])


class LinearConvolver:
    """Repeated linear convolution against a fixed array on a centred grid.

    The FFT of the fixed factor is computed once. Results are cropped back
    to the grid of the moving factor, so nodes line up with ``GridSpec``
    coordinates.
    """

    def __init__(self, fixed: np.ndarray, grid: GridSpec):
        self.grid = grid
        self.shape = tuple(grid.shape)
        self.fft_shape = tuple(sfft.next_fast_len(2 * k - 1, real=True) for k in self.shape)
        self._fixed_hat = sfft.rfftn(fixed, self.fft_shape)
        self.fixed_sum = float(fixed.sum())

    def full(self, moving: np.ndarray) -> np.ndarray:
        out = sfft.irfftn(sfft.rfftn(moving, self.fft_shape) * self._fixed_hat, self.fft_shape)
        sl = tuple(slice(0, 2 * k - 1) for k in self.shape)
        return out[sl]

    def __call__(self, moving: np.ndarray, renormalize: bool = True) -> np.ndarray:
        full = self.full(moving)
        if renormalize:
            target = float(moving.sum()) * self.fixed_sum
            s = full.sum()
            if s != 0 and target != 0:
                full *= target / s
        crop = tuple(slice(k // 2, k // 2 + k) for k in self.shape)
        return full[crop]


def convolve(a: FiniteMeasure, b: FiniteMeasure) -> FiniteMeasure:
    """Convolution of two grid measures sharing a grid.

    Mass landing beyond the grid is dropped from ``masses`` but kept in
    ``total_mass``.
    """
    if a.grid != b.grid:
        raise ValueError("measures must share a grid")
    masses = LinearConvolver(b.masses, b.grid)(a.masses)
    return FiniteMeasure(a.grid, masses, a.total_mass * b.total_mass)


def require_coverage(measure: FiniteMeasure, eps: float, required_extent=None):
    """Raise :class:`GridCoverage` when more than ``eps`` of the mass is off-grid."""
    if measure.total_mass <= 0:
        return
    frac = measure.outside_mass / measure.total_mass
    if frac > eps:
        raise GridCoverage(
            f"{frac:.3g} of the mass lies outside the grid (allowed {eps:.3g})",
            required_extent=required_extent,
        )


def cic_sharpen(measure: FiniteMeasure) -> FiniteMeasure:
    """Undo the mean smoothing of cloud-in-cell deposition.

    Spreading a point over its cell's corners acts, on average over the
    point's position, like convolution with a tent of width ``2h`` whose
    transform is ``prod sinc^2(xi_j h / 2)``. Dividing the grid spectrum by
    that factor restores second-order accuracy to spectral level for the
    smooth functions the measure is later convolved with. Mass is unchanged;
    individual node masses may become slightly negative.
    """
    grid = measure.grid
    spec = sfft.rfftn(measure.masses)
    for ax, (k, h) in enumerate(zip(grid.n_points, grid.spacing)):
        f = sfft.rfftfreq(k) if ax == grid.dim - 1 else sfft.fftfreq(k)
        tf = np.sinc(f) ** 2  # np.sinc(x) = sin(pi x)/(pi x); f is in cycles per cell
        shp = [1] * grid.dim
        shp[ax] = -1
        spec = spec / tf.reshape(shp)
    masses = sfft.irfftn(spec, grid.shape)
    return FiniteMeasure(grid, masses, measure.total_mass)
