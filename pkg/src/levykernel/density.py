"""Transition densities by Fourier inversion and by the convolution identity.

    p(x) = (2 pi)^{-n} int phi(xi) exp(-i xi . x) d xi

Two inversion paths:

* ``quad`` (default): a tensor-product Gauss-Legendre rule in frequency,
  graded towards ``xi = 0``, contracted one axis at a time. Nothing is
  periodised, so heavy-tailed densities do not alias.
* ``fft``: the trapezoidal rule on a uniform frequency grid, evaluated by
  FFT. By Poisson summation it returns the periodisation of ``p`` with the
  chosen ``period``; the output grid is cropped (and subsampled) from the
  FFT grid. Its Riemann mass over one period is exactly ``phi(0) = 1``.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np
import scipy.fft as sfft

from .decomposition import psi_t
from .errors import InsufficientDecay, ModelRejected
from .exponent import SphereGrid, psi
from .grid import FiniteMeasure, GridSpec, LinearConvolver
from .levy_model import LevyTriplet

KINDS = ("full", "bar")
DEFAULT_EPS_DECAY = 1e-14
MAX_FFT_ELEMENTS = 2**24


@dataclass
class DensityGrid:
    """Density values on a :class:`GridSpec`.

    ``kind`` is ``"full"`` (law of ``Z_t``) or ``"bar"`` (small-jump part).
    ``shift`` records a translation: values are the density of
    ``Z + shift`` (``shift = a_t`` gives the recentred density the kernel
    estimates are stated for). ``orders`` are derivative orders per axis.
    """

    grid: GridSpec
    values: np.ndarray = field(repr=False)
    t: float
    kind: str = "full"
    orders: tuple = None
    shift: tuple = None
    meta: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}")
        if self.orders is None:
            self.orders = (0,) * self.grid.dim
        if self.shift is None:
            self.shift = (0.0,) * self.grid.dim
        self.orders = tuple(int(k) for k in self.orders)
        self.shift = tuple(float(s) for s in self.shift)
        if tuple(self.values.shape) != tuple(self.grid.shape):
            raise ValueError("values do not match the grid shape")

    @property
    def is_derivative(self) -> bool:
        return any(self.orders)

    @property
    def peak(self) -> float:
        return float(np.abs(self.values).max())

    def riemann_mass(self) -> float:
        return float(self.values.sum() * self.grid.cell_volume)

    def value_at_origin(self) -> float:
        return float(self.values[self.grid.origin_index])

    def at(self, x) -> float:
        """Value at the grid node nearest to ``x``."""
        idx = tuple(int(round(xi / h)) + k // 2
                    for xi, h, k in zip(np.atleast_1d(x), self.grid.spacing, self.grid.n_points))
        return float(self.values[idx])

    # -- binary cache ----------------------------------------------------
    # little-endian: b"LKDG", u32 version, u32 dim, u32 kind (0 full, 1 bar),
    # 3 x u32 derivative orders (unused axes 0), f64 t, dim x f64 extents,
    # dim x u32 point counts, dim x f64 shift, then float64 values, row-major.
    MAGIC = b"LKDG"
    VERSION = 1

    def to_bytes(self) -> bytes:
        d = self.grid.dim
        orders = list(self.orders) + [0] * (3 - d)
        head = struct.pack("<4sIII3Id", self.MAGIC, self.VERSION, d, KINDS.index(self.kind),
                           *orders, self.t)
        head += struct.pack(f"<{d}d", *self.grid.extent)
        head += struct.pack(f"<{d}I", *self.grid.n_points)
        head += struct.pack(f"<{d}d", *self.shift)
        return head + np.ascontiguousarray(self.values, dtype="<f8").tobytes()

    @classmethod
    def from_bytes(cls, data: bytes) -> "DensityGrid":
        magic, ver, d, kind, o1, o2, o3, t = struct.unpack_from("<4sIII3Id", data, 0)
        if magic != cls.MAGIC:
            raise ValueError("not a density grid file")
        if ver != cls.VERSION:
            raise ValueError(f"unsupported density grid version {ver}")
        off = struct.calcsize("<4sIII3Id")
        ext = struct.unpack_from(f"<{d}d", data, off)
        off += 8 * d
        cnt = struct.unpack_from(f"<{d}I", data, off)
        off += 4 * d
        shift = struct.unpack_from(f"<{d}d", data, off)
        off += 8 * d
        grid = GridSpec(d, ext, cnt)
        vals = np.frombuffer(data, dtype="<f8", offset=off).reshape(grid.shape).copy()
        return cls(grid, vals, t, KINDS[kind], (o1, o2, o3)[:d], shift)

    def save(self, path) -> None:
        Path(path).write_bytes(self.to_bytes())

    @classmethod
    def load(cls, path) -> "DensityGrid":
        return cls.from_bytes(Path(path).read_bytes())


# ---------------------------------------------------------------------------
# characteristic functions


def _check_density_model(triplet: LevyTriplet):
    if not triplet.measure.infinite_mass:
        raise ModelRejected(
            f"{triplet.measure.variant} has finite total mass, so the law has an atom "
            "and no density")


def exponent_on(triplet: LevyTriplet, t: float, which: str, xi, rho: Optional[float] = None):
    """``t psi(xi)`` for ``full`` or ``psi_t(xi)`` for ``bar`` (complex, shape ``xi.shape[:-1]``)."""
    if which == "full":
        return t * psi(triplet, xi)
    if which == "bar":
        if rho is None:
            raise ValueError("the small-jump exponent needs rho")
        return psi_t(triplet, t, rho, xi)
    raise ValueError(f"which must be one of {KINDS}")


def _decay_cutoff(triplet, t, which, rho, eps_decay, poly=0, sphere=None):
    """Smallest radius ``Xi`` beyond which ``|xi|^poly exp(-Re exponent) < eps_decay``
    along every sphere direction (assuming growth along rays)."""
    dim = triplet.dim
    dirs = (sphere or SphereGrid.default(dim, 64 if dim == 2 else 256)).directions
    if triplet.measure.isotropic:
        dirs = dirs[:1]
    target = -math.log(eps_decay)

    def excess(r):
        re = np.real(exponent_on(triplet, t, which, r * dirs, rho))
        return float(np.min(re - poly * math.log(max(r, 1e-300)))) - target

    hi = 1.0
    while excess(hi) < 0:
        hi *= 2.0
        if hi > 1e15:
            val = math.exp(-(excess(hi) + target))
            raise InsufficientDecay("characteristic function does not decay below the "
                                    "requested level", boundary_magnitude=val)
    lo = hi / 2.0
    if excess(lo) >= 0:
        lo = 0.0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if excess(mid) < 0:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-6 * hi:
            break
    return hi


def _radial_exponent(triplet, t, which, rho, xi):
    """Exponent on a frequency array, through unique norms when the model is isotropic."""
    shape = xi.shape[:-1]
    if triplet.measure.isotropic and not any(triplet.drift):
        norms = np.linalg.norm(xi.reshape(-1, triplet.dim), axis=1)
        uniq, inv = np.unique(norms, return_inverse=True)
        e1 = np.zeros(triplet.dim)
        e1[0] = 1.0
        vals = exponent_on(triplet, t, which, uniq[:, None] * e1, rho)
        return vals[inv].reshape(shape)
    return exponent_on(triplet, t, which, xi.reshape(-1, triplet.dim), rho).reshape(shape)


def _multiplier(xi_axes, orders, shift):
    """Factors ``prod (-i xi_j)^{k_j} exp(i xi . shift)`` per axis (separable)."""
    out = []
    for x, k, s in zip(xi_axes, orders, shift):
        f = np.ones_like(x, dtype=complex)
        if k:
            f = f * (-1j * x) ** k
        if s:
            f = f * np.exp(1j * x * s)
        out.append(f)
    return out


# ---------------------------------------------------------------------------
# inversion


def density_fourier(triplet: LevyTriplet, t: float, grid: GridSpec, which: str = "full",
                    rho: Optional[float] = None, orders=None, shift=None,
                    eps_decay: float = DEFAULT_EPS_DECAY, period: Optional[float] = None,
                    method: str = "auto", freq_cutoff: Optional[float] = None) -> DensityGrid:
    """Density (or derivative) of ``Z_t`` (``full``) or ``Zbar_t`` (``bar``) on ``grid``.

    ``shift`` translates the law: the output is the density of ``Z + shift``.
    ``method="auto"`` uses the FFT path when a ``period`` is given and the
    quadrature path otherwise. ``freq_cutoff`` overrides the automatic
    cutoff, in which case the decay precondition is verified instead of
    enforced.
    """
    _check_density_model(triplet)
    if which not in KINDS:
        raise ValueError(f"which must be one of {KINDS}")
    if grid.dim != triplet.dim:
        raise ValueError("grid and model dimensions differ")
    dim = grid.dim
    orders = tuple(orders) if orders is not None else (0,) * dim
    shift = tuple(np.asarray(shift, dtype=float).ravel()) if shift is not None else (0.0,) * dim
    poly = sum(orders)
    if freq_cutoff is None:
        xi_max = _decay_cutoff(triplet, t, which, rho, eps_decay, poly)
    else:
        xi_max = float(freq_cutoff)
        edge = np.zeros((1, dim))
        edge[0, 0] = xi_max
        mag = float(np.exp(-np.real(exponent_on(triplet, t, which, edge, rho)))[0]) * xi_max**poly
        if mag > eps_decay:
            raise InsufficientDecay(f"|phi| = {mag:.3g} at the frequency cutoff exceeds "
                                    f"{eps_decay:g}", boundary_magnitude=mag)
    width = max(2 * e for e in grid.extent)
    period_given = period is not None
    period = float(period) if period_given else 4.0 * width
    if period < width:
        raise ValueError("period must be at least the grid width")

    if method == "auto":
        method = "fft" if period_given else "quad"
    if method == "fft":
        plan = _fft_plan(grid, xi_max, period)
        values, info = _invert_fft(triplet, t, which, rho, grid, plan, orders, shift)
    elif method == "quad":
        values, info = _invert_quadrature(triplet, t, which, rho, grid, xi_max, orders, shift)
    else:
        raise ValueError("method must be 'auto', 'fft' or 'quad'")
    info.update(xi_max=xi_max, rho=rho, method=method, eps_decay=eps_decay)
    out = DensityGrid(grid, values, t, which, orders, shift, info)
    out.meta["grid_mass"] = out.riemann_mass()
    return out


def density_derivative(triplet: LevyTriplet, t: float, grid: GridSpec, which: str,
                       orders, rho: Optional[float] = None, **kw) -> DensityGrid:
    """Partial derivative ``d^{k_1 + ... + k_n} p / dx_1^{k_1} ... dx_n^{k_n}`` on ``grid``."""
    orders = tuple(int(k) for k in orders)
    if len(orders) != grid.dim or any(k < 0 for k in orders):
        raise ValueError("one nonnegative order per axis required")
    return density_fourier(triplet, t, grid, which, rho, orders=orders, **kw)


def _fft_plan(grid, xi_max, period):
    sub = []
    nfft = []
    for h, k in zip(grid.spacing, grid.n_points):
        s = 1
        while math.pi / (h / s) < xi_max:
            s *= 2
        n = 1
        while n * h / s < period or n < k * s:
            n *= 2
        sub.append(s)
        nfft.append(n)
    if int(np.prod(nfft)) > MAX_FFT_ELEMENTS:
        raise InsufficientDecay(f"FFT of shape {nfft} exceeds the size limit; use the "
                                "quadrature path or a shorter period")
    return sub, nfft


def _invert_fft(triplet, t, which, rho, grid, plan, orders, shift):
    sub, nfft = plan
    hf = [h / s for h, s in zip(grid.spacing, sub)]
    dxi = [2 * math.pi / (n * h) for n, h in zip(nfft, hf)]
    xi_axes = [(np.arange(n) - n // 2) * d for n, d in zip(nfft, dxi)]
    mesh = np.stack(np.meshgrid(*xi_axes, indexing="ij"), axis=-1)
    phi = np.exp(-_radial_exponent(triplet, t, which, rho, mesh))
    del mesh
    for ax, f in enumerate(_multiplier(xi_axes, orders, shift)):
        shp = [1] * grid.dim
        shp[ax] = -1
        phi = phi * f.reshape(shp)
    spec = sfft.fftshift(sfft.fftn(sfft.ifftshift(phi)))
    spec *= float(np.prod(dxi)) / (2 * math.pi) ** grid.dim
    period_mass = float(np.real(spec).sum() * np.prod(hf))
    sl = tuple(slice(n // 2 - (k // 2) * s, n // 2 + (k - k // 2) * s, s)
               for n, k, s in zip(nfft, grid.n_points, sub))
    values = np.real(spec[sl]).copy()
    return values, {"period": [n * h for n, h in zip(nfft, hf)], "period_mass": period_mass,
                    "nfft": nfft, "subsample": sub, "imag_residual": float(np.abs(np.imag(spec[sl])).max())}


_GL16 = np.polynomial.legendre.leggauss(16)


def frequency_rule(xi_max: float, x_max: float, phase_width: float = 8.0,
                   levels: int = 24, ratio: float = 0.2):
    """Gauss-Legendre rule on ``[0, xi_max]`` for ``int phi(xi) cos(xi x) d xi``, ``|x| <= x_max``.

    Panels span at most ``phase_width`` radians of ``xi x_max`` (16 nodes
    each); the first panel is graded geometrically towards 0, where Levy
    exponents are not smooth.
    """
    w0 = min(phase_width / max(x_max, 1e-300), xi_max)
    edges = [0.0] + list(w0 * ratio ** np.arange(levels, 0, -1)) + [w0]
    k = int(math.ceil((xi_max - w0) / (phase_width / max(x_max, 1e-300))))
    if k > 0:
        edges += list(np.linspace(w0, xi_max, k + 1)[1:])
    edges = np.array(edges)
    x, w = _GL16
    mid = 0.5 * (edges[1:] + edges[:-1])[:, None]
    half = 0.5 * (edges[1:] - edges[:-1])[:, None]
    return (mid + half * x).ravel(), (half * w).ravel()


MAX_MATRIX_ELEMENTS = 2**24


def _contract(vals, ax, x, xi, w, k, sh, even):
    """Apply the 1-d inverse transform along axis ``ax``, in blocks of frequencies."""
    out = 0.0
    step = max(1, MAX_MATRIX_ELEMENTS // max(x.size, 1))
    for i in range(0, xi.size, step):
        f, ww = xi[i:i + step], w[i:i + step]
        if even:
            # d^k/dx^k cos(xi x) = xi^k cos(xi x + k pi / 2)
            mat = np.cos(np.outer(x, f) + k * math.pi / 2) * (ww * f**k)
        else:
            mat = np.exp(-1j * np.outer(x, f)) * (ww * (-1j * f) ** k * np.exp(1j * f * sh))
        part = np.take(vals, np.arange(i, i + f.size), axis=ax)
        out = out + np.tensordot(mat, part, axes=([1], [ax]))
    return np.moveaxis(out, 0, ax)


def _phase_slope(triplet, t, which, rho, xi_max, shift):
    """Largest ``|arg(phi(xi) e^{i xi.shift})| / |xi|`` over probes along the axes.

    This is the translation the characteristic function carries; the
    frequency panels must resolve it on top of the grid extent. A shift
    that cancels the drift of ``phi`` costs nothing.
    """
    dim = triplet.dim
    s = np.array([0.1, 0.25, 0.5, 1.0]) * xi_max
    probes = np.concatenate([np.outer(sign * s, e) for e in np.eye(dim) for sign in (1, -1)])
    phase = -np.imag(exponent_on(triplet, t, which, probes, rho)) + probes @ np.asarray(shift, dtype=float)
    return float(np.max(np.abs(phase) / np.linalg.norm(probes, axis=1)))


def _invert_quadrature(triplet, t, which, rho, grid, xi_max, orders, shift):
    """Tensor-product Gauss rule in frequency, contracted one axis at a time.

    Nothing is periodised, so heavy tails do not alias. In one dimension
    only ``xi >= 0`` is needed (the law is real, so ``phi(-xi)`` is the
    conjugate of ``phi(xi)``).
    """
    xs = grid.axes()
    x_max = max(float(np.abs(x).max()) for x in xs) + _phase_slope(triplet, t, which, rho, xi_max, shift)
    nodes, weights = frequency_rule(xi_max, x_max)
    even = triplet.measure.isotropic and not any(triplet.drift) and not any(shift)
    if even or grid.dim == 1:
        axes = [nodes] * grid.dim
        wts = [2.0 * weights] * grid.dim
    else:
        axes = [np.concatenate([-nodes[::-1], nodes])] * grid.dim
        wts = [np.concatenate([weights[::-1], weights])] * grid.dim
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    phi = np.exp(-_radial_exponent(triplet, t, which, rho, mesh))
    del mesh
    vals = np.real(phi) if even else phi
    for ax, (x, xi, w, k, sh) in enumerate(zip(xs, axes, wts, orders, shift)):
        if even or grid.dim > 1:
            vals = _contract(vals, ax, x, xi, w, k, sh, even)
        else:
            # Re of the half-range integral; the factor 2 in the weights restores the full range
            vals = np.real(_contract(vals, ax, x, xi, w, k, sh, False))
    values = np.real(vals) / (2 * math.pi) ** grid.dim
    return np.ascontiguousarray(values), {"period": None, "period_mass": None,
                                          "n_freq": int(axes[0].size)}


# ---------------------------------------------------------------------------
# convolution route


def phase_shift(values: np.ndarray, grid: GridSpec, shift) -> np.ndarray:
    """``f(x - shift)`` by multiplying the DFT with ``exp(i xi . shift)`` (periodic on the grid)."""
    shift = np.asarray(shift, dtype=float).ravel()
    if not np.any(shift):
        return values.copy()
    spec = sfft.fftn(values)
    for ax, (k, h, s) in enumerate(zip(grid.n_points, grid.spacing, shift)):
        f = sfft.fftfreq(k, d=h) * 2 * math.pi
        shp = [1] * grid.dim
        shp[ax] = -1
        spec = spec * np.exp(-1j * f * s).reshape(shp)
    return np.real(sfft.ifftn(spec))


def density_convolution(bar: DensityGrid, plaw: FiniteMeasure, a_t, recentred: bool = False) -> DensityGrid:
    """``p_t(x) = (pbar * P)(x + a_t)`` on the grid shared by ``bar`` and ``plaw``.

    With ``recentred=True`` the translation is skipped and the output is
    ``pbar * P``, the density of ``Z_t + a_t``. The translation by an
    arbitrary (off-grid) ``a_t`` is a DFT phase shift.
    """
    if bar.kind != "bar":
        raise ValueError("first argument must be a small-jump density")
    if bar.grid != plaw.grid:
        raise ValueError("density and Poisson law must share a grid")
    conv = LinearConvolver(plaw.masses, bar.grid)
    g = conv(bar.values, renormalize=False)
    a_t = np.asarray(a_t, dtype=float).ravel()
    if recentred:
        values, shift = g, tuple(a_t)
    else:
        values, shift = phase_shift(g, bar.grid, a_t), (0.0,) * bar.grid.dim
    out = DensityGrid(bar.grid, values, bar.t, "full", bar.orders, shift,
                      {"route": "convolution", "plaw_mass": plaw.grid_mass})
    return out


def recentre(density: DensityGrid, a_t) -> DensityGrid:
    """Translate a density by ``a_t``: output is the density of ``Z + a_t``."""
    a_t = np.asarray(a_t, dtype=float).ravel()
    vals = phase_shift(density.values, density.grid, a_t)
    shift = tuple(np.asarray(density.shift) + a_t)
    return replace(density, values=vals, shift=shift, meta=dict(density.meta))


def argmax_lex(bar: DensityGrid, rtol: float = 0.0) -> np.ndarray:
    """Grid point of maximal value; ties (within ``rtol`` of the max) go to the
    lexicographically smallest coordinates."""
    v = bar.values
    top = v.max()
    cand = np.argwhere(v >= top - rtol * abs(top))
    # argwhere lists indices in lexicographic (row-major) order; coordinates increase with index
    return bar.grid.node(cand[0])


def auto_grid(triplet: LevyTriplet, t: float, rho: float, n_points: int = None,
              extent_factor: float = 20.0, support_radius: float = 0.0) -> GridSpec:
    """Grid of half-width ``max(extent_factor/rho, support_radius + 10/rho)``."""
    dim = triplet.dim
    n_points = n_points or (4096 if dim == 1 else (1024 if dim == 2 else 128))
    R = max(extent_factor / rho, support_radius + 10.0 / rho)
    return GridSpec.cube(dim, R, n_points)
