"""Catalog of Levy measures and triplets, plus integration against them.

Every measure except :class:`TabulatedAtoms` is written in polar form
``mu(du) = nu(dr) sigma(dl)``: a radial measure ``nu`` on ``(0, inf)`` and
an angular probability ``sigma``, either uniform on the sphere
("isotropic") or a finite set of directions. Integrals of kernels of
``xi . u`` then reduce to one-dimensional radial integrals against
closed-form angular averages (see :mod:`levykernel._kernels`).

The characteristic exponent convention is

    psi(xi) = i a.xi + int (1 - exp(i xi.u) + i xi.u 1{|u| < 1}) mu(du),

so that ``E exp(i xi . Z_t) = exp(-t psi(xi))``.
"""

from __future__ import annotations

import functools
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import integrate as sint

from . import _kernels as K
from .errors import ConfigError, InvalidMeasure, QuadratureFailure, SingularIntegrand
from .grid import FiniteMeasure, GridSpec, require_coverage

DEFAULT_TOL = 1e-8
MAX_DIM = 3


def _quad(f, a, b, tol=DEFAULT_TOL, points=None, **kw):
    """``scipy.integrate.quad`` that raises instead of warning."""
    if points is not None:
        pts = sorted(p for p in points if a < p < b)
        if pts and np.isfinite(a) and np.isfinite(b):
            kw["points"] = pts
            kw.setdefault("limit", 200)
        elif pts:
            edges = [a] + pts + [b]
            parts = [_quad(f, lo, hi, tol, **kw) for lo, hi in zip(edges[:-1], edges[1:])]
            return sum(p[0] for p in parts), sum(p[1] for p in parts)
    kw.setdefault("limit", 200)
    with warnings.catch_warnings():
        warnings.simplefilter("error", sint.IntegrationWarning)
        try:
            val, err = sint.quad(f, a, b, epsrel=tol, epsabs=kw.pop("epsabs", 1e-300), **kw)
        except sint.IntegrationWarning:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", sint.IntegrationWarning)
                val, err = sint.quad(f, a, b, epsrel=tol, epsabs=1e-300, **kw)
            if err > 1e3 * tol * max(abs(val), 1e-300) and err > 1e-13:
                raise QuadratureFailure(
                    f"adaptive quadrature did not converge on [{a}, {b}]", achieved_error=err)
    return val, err


def _rquad(g, lo, hi, tol=DEFAULT_TOL, points=()):
    """``int_lo^hi g(r) dr`` in the variable ``log r``.

    Levy-measure integrands behave like powers of ``r`` near 0 and infinity,
    which become smooth exponentials in ``log r``.
    """
    if hi <= lo:
        return 0.0
    head = 0.0
    if lo == 0:
        # algebraic endpoint singularity: QAGS extrapolation handles it in r itself
        lo = min(hi, 1e-3)
        head = _quad(lambda r: float(g(r)), 0.0, lo, tol=tol)[0]
        if lo == hi:
            return head
    a = math.log(lo)
    b = np.inf if np.isinf(hi) else math.log(hi)
    pts = [math.log(p) for p in points if p > 0 and lo < p < hi]

    def h(s):
        if s > 300.0:
            # beyond r = e^300 every Levy integrand here is negligible
            return 0.0
        r = math.exp(s)
        return float(g(r)) * r

    return head + _quad(h, a, b, tol=tol, points=pts)[0]


def angular_rule(dim: int, count: Optional[int] = None):
    """Directions and probability weights approximating the uniform sphere.

    n = 1: the two points +-1. n = 2: ``count`` equally spaced angles
    (default 256). n = 3: Gauss-Legendre in ``cos(theta)`` times equally
    spaced azimuths (about ``count`` points, default 2048).
    """
    if dim == 1:
        return np.array([[1.0], [-1.0]]), np.array([0.5, 0.5])
    if dim == 2:
        m = count or 256
        th = 2 * np.pi * np.arange(m) / m
        return np.stack([np.cos(th), np.sin(th)], axis=-1), np.full(m, 1.0 / m)
    if dim == 3:
        total = count or 2048
        nt = max(4, int(round(math.sqrt(total / 2))))
        nphi = 2 * nt
        x, w = np.polynomial.legendre.leggauss(nt)
        phi = 2 * np.pi * np.arange(nphi) / nphi
        ct = np.repeat(x, nphi)
        st = np.sqrt(1 - ct**2)
        ph = np.tile(phi, nt)
        dirs = np.stack([st * np.cos(ph), st * np.sin(ph), ct], axis=-1)
        wts = np.repeat(w / 2.0, nphi) / nphi
        return dirs, wts
    raise ValueError(f"dimension {dim} not supported (max {MAX_DIM})")


def _as_xi(xi, dim):
    xi = np.asarray(xi, dtype=float)
    if dim == 1 and (xi.ndim == 0 or xi.shape[-1] != 1):
        xi = xi[..., None]
    if xi.shape[-1] != dim:
        raise ValueError(f"frequency has last axis {xi.shape[-1]}, expected {dim}")
    return xi


class LevyMeasureSpec:
    """Common interface of the measure variants.

    Kernel integrals take frequencies of shape ``(..., dim)`` and return
    arrays of shape ``(...)``. Radial regions are ``lo < |u| <= hi``.
    """

    dim: int
    variant: str = ""
    infinite_mass: bool = True
    symmetric: bool = True
    isotropic: bool = True

    # -- to be provided by subclasses -------------------------------------
    def tail_mass(self, r: float) -> float:
        """``mu{|u| > r}``."""
        raise NotImplementedError

    def kernel_integral(self, kernel, xi, lo=0.0, hi=np.inf):
        raise NotImplementedError

    def psi_jump(self, xi):
        """Jump part of the exponent, ``int (1 - e^{i xi.u} + i xi.u 1{|u|<1}) mu(du)``."""
        raise NotImplementedError

    def psi_small(self, xi, r_cut):
        """``int_{|u| <= r_cut} (1 - e^{i xi.u} + i xi.u) mu(du)``."""
        raise NotImplementedError

    def psi_small_imag(self, eta, r_cut):
        """``psi_small`` at the imaginary frequency ``i eta`` (a real number)."""
        raise NotImplementedError

    def first_moment(self, lo, hi, include_boundary=False):
        """``int_{lo < |u| < hi} u mu(du)``."""
        raise NotImplementedError

    def sample(self, lo, hi, spacing):
        """Weighted points discretising ``mu`` restricted to ``lo < |u| <= hi``."""
        raise NotImplementedError

    def integrate(self, f, r_lo=0.0, r_hi=np.inf, tol=DEFAULT_TOL):
        raise NotImplementedError

    def to_config(self) -> dict:
        raise NotImplementedError

    # -- shared ------------------------------------------------------------
    def levy_integral(self) -> float:
        """``int (1 ^ |u|^2) mu(du)``."""
        return self.integrate_radial(lambda r: np.minimum(r * r, 1.0))

    def integrate_radial(self, g, r_lo=0.0, r_hi=np.inf, tol=DEFAULT_TOL):
        """``int_{r_lo <= |u| <= r_hi} g(|u|) mu(du)`` for a radial ``g``."""
        return self.integrate(lambda u: g(np.linalg.norm(u, axis=-1)), r_lo, r_hi, tol)


# ---------------------------------------------------------------------------
# polar measures


class _PolarMeasure(LevyMeasureSpec):
    """``nu(dr) x sigma(dl)``; ``sigma`` uniform or on ``self.directions``."""

    directions: Optional[np.ndarray] = None
    direction_weights: Optional[np.ndarray] = None

    def _components(self, xi):
        """(z, weight, n_eff) triples reducing angular averages to kernels."""
        xi = _as_xi(xi, self.dim)
        if self.isotropic:
            return [(np.linalg.norm(xi, axis=-1), 1.0, self.dim)]
        return [(xi @ d, w, 1) for d, w in zip(self.directions, self.direction_weights)]

    # radial primitives ---------------------------------------------------
    def nu_kernel(self, kernel, z, n_eff, lo, hi):
        raise NotImplementedError

    def kernel_integral(self, kernel, xi, lo=0.0, hi=np.inf):
        out = 0.0
        for z, w, n_eff in self._components(xi):
            out = out + w * self.nu_kernel(kernel, np.abs(z), n_eff, lo, hi)
        return np.asarray(out, dtype=float)

    def psi_small_imag(self, eta, r_cut):
        # E[1 - e^{-x l} - x l] = -E[cosh(x l) - 1] for symmetric angular laws
        if self.symmetric:
            return -self.kernel_integral("H", eta, 0.0, r_cut)
        raise NotImplementedError

    def _angular(self, count=None):
        if self.isotropic:
            return angular_rule(self.dim, count)
        return self.directions, self.direction_weights

    def _check_singular(self, f, r_lo):
        if r_lo > 0:
            return
        dirs, w = self._angular(64 if self.dim > 1 else None)
        probe = []
        for r in (1e-3, 1e-5, 1e-7):
            probe.append(abs(np.sum(w * f(r * dirs))) / (r * r))
        if not np.all(np.isfinite(probe)) or probe[-1] > 100 * max(probe[0], 1e-300) + 1e-12:
            raise SingularIntegrand(
                "integrand is not O(|u|^2) at the origin and the measure has infinite mass there")


class _DensityPolar(_PolarMeasure):
    """Polar measure whose radial part has a density ``nu(r)``."""

    def nu(self, r):
        raise NotImplementedError

    def nu_mass(self, lo, hi):
        return _rquad(self.nu, lo, hi, points=[1.0])

    def nu_r2(self, lo, hi):
        return _rquad(lambda r: r * r * self.nu(r), lo, hi, points=[1.0])

    def tail_mass(self, r):
        if r <= 0:
            return np.inf if self.infinite_mass else self.nu_mass(0.0, np.inf)
        return self.nu_mass(r, np.inf)

    def _full_closed_form(self, kernel, z, n_eff):
        return None

    def nu_kernel(self, kernel, z, n_eff, lo, hi):
        z = np.asarray(z, dtype=float)
        if lo == 0 and np.isinf(hi):
            cf = self._full_closed_form(kernel, z, n_eff)
            if cf is not None:
                return cf
        if kernel in ("C", "H") and lo == 0 and np.isfinite(hi) and z.size > 32:
            return self._nu_kernel_composite(kernel, z, n_eff, hi)
        flat = z.ravel()
        uniq, inv = np.unique(flat, return_inverse=True)
        vals = np.array([self._nu_kernel_scalar(kernel, float(s), n_eff, lo, hi) for s in uniq])
        return vals[inv].reshape(z.shape)

    def _nu_kernel_composite(self, kernel, z, n_eff, hi):
        flat = z.ravel()
        uniq, inv = np.unique(flat, return_inverse=True)
        zmax = float(uniq.max())
        kf = K.KERNELS[kernel]
        nodes, weights, delta = K.composite_rule(hi, self.nu, zmax)
        taylor = K.QUAD_COEF[kernel] / n_eff * self.nu_r2(0.0, delta)

        def direct(zz):
            return K.apply_rule(lambda x: kf(x, n_eff), zz, nodes, weights) + taylor * zz**2

        vals = None
        if uniq.size > 4096:
            vals = _chebyshev_fill(direct, uniq, zmax * hi)
        if vals is None:
            vals = direct(uniq)
        return vals[inv].reshape(z.shape)

    def _nu_kernel_scalar(self, kernel, z, n_eff, lo, hi):
        if z == 0.0:
            return 0.0
        kf = K.KERNELS[kernel]
        if kernel in ("U", "L"):
            # both kernels equal s^2/n for s <= 1
            knee = 1.0 / z
            total = 0.0
            if lo < knee:
                total += z * z / n_eff * self.nu_r2(lo, min(hi, knee))
            a = max(lo, knee)
            if a < hi:
                if kernel == "U" and n_eff == 1:
                    total += self.nu_mass(a, hi)
                elif not (kernel == "L" and n_eff == 1):
                    total += _rquad(lambda r: kf(z * r, n_eff) * self.nu(r), a, hi, points=[1.0])
            return total
        if kernel == "H":
            return _rquad(lambda r: kf(z * r, n_eff) * self.nu(r), lo, hi, points=[1.0 / z, 1.0])
        # kernel C
        if n_eff == 2:
            # l_1 = cos(phi) with phi uniform: average the 1-d transform over phi
            f = lambda phi: self._one_minus_cos(z * math.cos(phi), lo, hi)
            return (2.0 / math.pi) * _quad(f, 0.0, math.pi / 2, tol=1e-9)[0]
        if n_eff == 3:
            # l_1 is uniform on [-1, 1]
            return _quad(lambda v: self._one_minus_cos(z * v, lo, hi), 0.0, 1.0, tol=1e-9)[0]
        return self._one_minus_cos(z, lo, hi)

    def _one_minus_cos(self, w, lo, hi):
        """``int_lo^hi (1 - cos(w r)) nu(r) dr``: smooth part below ``1/w``, Fourier weights above."""
        w = abs(w)
        if w == 0.0:
            return 0.0
        knee = 1.0 / w
        total = 0.0
        if lo < knee:
            total += _rquad(lambda r: 2.0 * math.sin(w * r / 2) ** 2 * float(self.nu(r)),
                            lo, min(hi, knee), points=[1.0])
        a = max(lo, knee)
        if a < hi:
            mass = self.nu_mass(a, hi)
            if np.isinf(hi):
                osc = _quad(self.nu, a, np.inf, weight="cos", wvar=w, epsabs=1e-11 * mass)[0]
            else:
                osc = _quad(self.nu, a, hi, weight="cos", wvar=w, limit=1000)[0]
            total += mass - osc
        return total

    def first_moment(self, lo, hi, include_boundary=False):
        if self.symmetric or hi <= lo:
            return np.zeros(self.dim)
        r1 = _rquad(lambda r: r * self.nu(r), lo, hi, points=[1.0])
        return r1 * np.sum(self.direction_weights[:, None] * self.directions, axis=0)

    def integrate(self, f, r_lo=0.0, r_hi=np.inf, tol=DEFAULT_TOL):
        self._check_singular(f, r_lo)
        dirs, w = self._angular()

        def radial(r):
            return float(np.sum(w * f(r * dirs))) * self.nu(r)

        return _rquad(radial, r_lo, r_hi, tol=tol, points=[1.0])

    def sample(self, lo, hi, spacing):
        """Radial Gauss nodes at most ``spacing`` apart times an angular rule.

        Isotropic angular rules are refined with the radius so neighbouring
        points on a sphere are about ``spacing`` apart.
        """
        if hi <= lo:
            return np.zeros((0, self.dim)), np.zeros(0)
        x, w = np.polynomial.legendre.leggauss(2)
        edges = _panel_edges(lo, hi, spacing)
        mid = 0.5 * (edges[1:] + edges[:-1])[:, None]
        half = 0.5 * (edges[1:] - edges[:-1])[:, None]
        r = (mid + half * x).ravel()
        rw = (half * w).ravel() * self.nu(r)
        return _spread(self, r, rw, spacing)

    def integrate_radial(self, g, r_lo=0.0, r_hi=np.inf, tol=DEFAULT_TOL):
        return _rquad(lambda r: g(r) * self.nu(r), r_lo, r_hi, tol=tol, points=[1.0])


def _chebyshev_fill(fn, z, bandwidth, rtol=1e-13):
    """Evaluate ``fn`` at many sorted ``z >= 0`` through a Chebyshev interpolant.

    Integrals of smooth kernels against a measure supported in ``r <= b`` are
    entire functions of ``z`` of exponential type ``b``; on ``[0, Z]`` a
    degree of about ``b Z`` plus a margin resolves them to rounding level.
    The interpolant is checked against direct evaluation at a few of the
    requested points; ``None`` is returned when the check fails.
    """
    zmax = float(z[-1])
    deg = int(math.ceil(1.2 * bandwidth)) + 96
    if deg * 8 > z.size:
        return None
    x = np.cos(np.pi * (np.arange(deg + 1) + 0.5) / (deg + 1))
    nodes = 0.5 * zmax * (x + 1.0)
    coef = np.polynomial.chebyshev.chebfit(x, fn(nodes), deg)
    out = np.polynomial.chebyshev.chebval(2.0 * z / zmax - 1.0, coef)
    probe = np.unique(np.linspace(0, z.size - 1, 33).astype(int))
    exact = fn(z[probe])
    scale = np.abs(exact).max()
    if scale > 0 and np.abs(out[probe] - exact).max() > rtol * max(scale, 1e-300):
        return None
    out[probe] = exact
    return out


def _panel_edges(lo, hi, spacing):
    k = max(1, int(math.ceil((hi - lo) / spacing)))
    return np.linspace(lo, hi, k + 1)


def _spread(measure, radii, radial_weights, spacing):
    """Attach angular points to radial nodes."""
    dim = measure.dim
    if not measure.isotropic:
        d, w = measure.directions, measure.direction_weights
        pts = (radii[:, None, None] * d[None, :, :]).reshape(-1, dim)
        wts = (radial_weights[:, None] * w[None, :]).ravel()
        return pts, wts
    if dim == 1:
        pts = np.concatenate([radii, -radii])[:, None]
        wts = np.concatenate([radial_weights, radial_weights]) / 2
        return pts, wts
    pts, wts = [], []
    for r, rw in zip(radii, radial_weights):
        if dim == 2:
            m = max(16, 4 * int(math.ceil(2 * math.pi * r / spacing / 4)))
            th = 2 * np.pi * (np.arange(m) + 0.5) / m
            pts.append(r * np.stack([np.cos(th), np.sin(th)], axis=-1))
            wts.append(np.full(m, rw / m))
        else:
            d, w = angular_rule(3, max(32, int(4 * math.pi * (r / spacing) ** 2)))
            pts.append(r * d)
            wts.append(rw * w)
    return np.concatenate(pts), np.concatenate(wts)


@dataclass(frozen=True, eq=False)
class IsotropicStable(_DensityPolar):
    """Rotation invariant alpha-stable measure ``c |u|^{-n-alpha} du``."""

    alpha: float
    c: float
    dim: int = 1
    variant = "IsotropicStable"

    def __post_init__(self):
        if not 0 < self.alpha < 2:
            raise InvalidMeasure(f"alpha must lie in (0, 2), got {self.alpha}")
        if self.c <= 0:
            raise InvalidMeasure("c must be positive")
        if self.dim not in K.SUPPORTED_DIMS:
            raise InvalidMeasure(f"dim must be 1, 2 or 3, got {self.dim}")

    def __eq__(self, other):
        return (type(other) is type(self) and self.alpha == other.alpha
                and self.c == other.c and self.dim == other.dim)

    def __hash__(self):
        return hash((self.variant, self.alpha, self.c, self.dim))

    @property
    def radial_constant(self):
        return self.c * K.sphere_area(self.dim)

    def nu(self, r):
        r = np.asarray(r, dtype=float)
        return self.radial_constant * r ** (-1.0 - self.alpha)

    def nu_mass(self, lo, hi):
        a = self.alpha
        f = (lambda r: 0.0 if np.isinf(r) else (np.inf if r == 0 else r ** -a / a))
        return self.radial_constant * (f(lo) - f(hi))

    def nu_r2(self, lo, hi):
        e = 2.0 - self.alpha
        top = np.inf if np.isinf(hi) else hi**e
        return self.radial_constant * (top - lo**e) / e

    def _full_closed_form(self, kernel, z, n_eff):
        if kernel == "H":
            return None
        return self.radial_constant * K.stable_kernel_constant(kernel, self.alpha, n_eff) \
            * np.abs(z) ** self.alpha

    def psi_jump(self, xi):
        return self.kernel_integral("C", xi).astype(complex)

    def psi_small(self, xi, r_cut):
        return self.kernel_integral("C", xi, 0.0, r_cut).astype(complex)

    def to_config(self):
        return {"variant": self.variant, "alpha": self.alpha, "c": self.c, "dim": self.dim}

    @classmethod
    def normalized(cls, alpha, dim=1):
        """Constant ``c`` chosen so that ``sup_l psi^U(r l) = r^alpha``."""
        a_u = K.stable_kernel_constant("U", alpha, dim) * K.sphere_area(dim)
        return cls(alpha, 1.0 / a_u, dim)

    @classmethod
    def with_unit_exponent(cls, alpha, dim=1):
        """Constant ``c`` chosen so that ``psi(xi) = |xi|^alpha``."""
        a_c = K.stable_kernel_constant("C", alpha, dim) * K.sphere_area(dim)
        return cls(alpha, 1.0 / a_c, dim)


@dataclass(frozen=True, eq=False)
class DirectionalStable(_DensityPolar):
    """Stable-type density ``c r^{-1-alpha} dr`` along each of finitely many rays.

    One ray in n = 1 gives a one-sided (totally skewed) measure; the pair
    ``+-e_1`` in n = 2 gives a measure concentrated on an axis.
    """

    alpha: float
    c: float
    rays: tuple = ((1.0,),)
    variant = "DirectionalStable"

    def __post_init__(self):
        if not 0 < self.alpha < 2:
            raise InvalidMeasure(f"alpha must lie in (0, 2), got {self.alpha}")
        if self.c <= 0:
            raise InvalidMeasure("c must be positive")
        d = np.atleast_2d(np.asarray(self.rays, dtype=float))
        if d.shape[1] > MAX_DIM:
            raise InvalidMeasure("dimension above 3")
        norms = np.linalg.norm(d, axis=1)
        if np.any(norms == 0):
            raise InvalidMeasure("rays must be nonzero vectors")
        d = d / norms[:, None]
        object.__setattr__(self, "rays", tuple(map(tuple, d)))
        object.__setattr__(self, "directions", d)
        object.__setattr__(self, "direction_weights", np.full(d.shape[0], 1.0 / d.shape[0]))
        sym = all(any(np.allclose(-a, b) for b in d) for a in d)
        object.__setattr__(self, "symmetric", sym)
        object.__setattr__(self, "isotropic", False)

    def __eq__(self, other):
        return (type(other) is type(self) and self.alpha == other.alpha
                and self.c == other.c and self.rays == other.rays)

    def __hash__(self):
        return hash((self.variant, self.alpha, self.c, self.rays))

    @property
    def dim(self):
        return self.directions.shape[1]

    @property
    def radial_constant(self):
        return self.c * len(self.rays)

    nu = IsotropicStable.nu
    nu_mass = IsotropicStable.nu_mass
    nu_r2 = IsotropicStable.nu_r2

    def _full_closed_form(self, kernel, z, n_eff):
        if kernel == "H":
            return None
        return self.radial_constant * K.stable_kernel_constant(kernel, self.alpha, 1) \
            * np.abs(z) ** self.alpha

    def _odd_part(self, s):
        """``int_0^inf (r s 1{r<1} - sin(r s)) c r^{-1-alpha} dr`` per ray."""
        a = self.alpha
        b = _sine_constant(a)
        m = np.abs(s)
        with np.errstate(divide="ignore", invalid="ignore"):
            if a == 1.0:
                extra = np.where(m > 0, np.log(np.where(m > 0, m, 1.0)) * m, 0.0)
                val = b * m + extra
            else:
                val = b * m**a + (m - m**a) / (1.0 - a)
        return self.c * np.sign(s) * val

    def psi_jump(self, xi):
        out = self.kernel_integral("C", xi).astype(complex)
        xi = _as_xi(xi, self.dim)
        for d in self.directions:
            out = out + 1j * self._odd_part(xi @ d)
        return out

    def psi_small(self, xi, r_cut):
        xi = _as_xi(xi, self.dim)
        if self.symmetric:
            return self.kernel_integral("C", xi, 0.0, r_cut).astype(complex)
        out = np.zeros(xi.shape[:-1], dtype=complex)
        for d in self.directions:
            s = (xi @ d).ravel()
            uniq, inv = np.unique(s, return_inverse=True)
            nodes, weights, delta = K.composite_rule(r_cut, self.nu, float(np.abs(uniq).max()))
            weights = weights / len(self.rays)

            def kern(x):
                return 2.0 * np.sin(x / 2) ** 2 + 1j * (x - np.sin(x))

            vals = K.apply_rule(kern, uniq, nodes, weights)
            vals += 0.5 * uniq**2 * self.nu_r2(0.0, delta) / len(self.rays)
            out = out + vals[inv].reshape(out.shape)
        return out

    def psi_small_imag(self, eta, r_cut):
        if self.symmetric:
            return super().psi_small_imag(eta, r_cut)
        eta = _as_xi(eta, self.dim)
        out = np.zeros(eta.shape[:-1])
        for d in self.directions:
            s = eta @ d
            vals = np.array([
                _quad(lambda r, s=s_: (-math.expm1(-s * r) - s * r) * float(self.nu(r)) / len(self.rays),
                      0.0, r_cut)[0] if s_ != 0 else 0.0
                for s_ in s.ravel()])
            out = out + vals.reshape(out.shape)
        return out

    def first_moment(self, lo, hi, include_boundary=False):
        if self.symmetric or hi <= lo:
            return np.zeros(self.dim)
        a = self.alpha
        if a == 1.0:
            r1 = self.c * math.log(hi / lo)
        else:
            r1 = self.c * (hi ** (1 - a) - lo ** (1 - a)) / (1 - a)
        return r1 * self.directions.sum(axis=0)

    def to_config(self):
        return {"variant": self.variant, "alpha": self.alpha, "c": self.c,
                "rays": [list(r) for r in self.rays]}


@functools.lru_cache(maxsize=64)
def _sine_constant(a):
    """``int_0^inf (v 1{v<1} - sin v) v^{-1-a} dv``."""
    head = _quad(lambda v: (v - math.sin(v)) * v ** (-1 - a), 0.0, 1.0, tol=1e-12)[0]
    tail = _quad(lambda v: v ** (-1 - a), 1.0, np.inf, weight="sin", wvar=1.0, epsabs=1e-11)[0]
    return head - tail


_PROFILES = {
    "power": lambda p, n: (lambda r: p["c"] * r ** (-n - p["alpha"])),
    "tempered": lambda p, n: (lambda r: p["c"] * r ** (-n - p["alpha"]) * np.exp(-p["lam"] * r)),
}


@dataclass(frozen=True, eq=False)
class RadialDensity(_DensityPolar):
    """Rotation invariant measure ``m(|u|) du`` with a user radial profile.

    ``m`` may be any vectorised callable. For configuration files use
    ``profile={"kind": "power"|"tempered", ...}`` instead, which can be
    serialised.
    """

    m: Optional[Callable] = None
    dim: int = 1
    profile: Optional[dict] = None
    variant = "RadialDensity"

    def __post_init__(self):
        if self.dim not in K.SUPPORTED_DIMS:
            raise InvalidMeasure(f"dim must be 1, 2 or 3, got {self.dim}")
        if self.m is None:
            if self.profile is None or self.profile.get("kind") not in _PROFILES:
                raise InvalidMeasure("RadialDensity needs a callable m or a known profile")
            object.__setattr__(self, "m", _PROFILES[self.profile["kind"]](self.profile, self.dim))
        try:
            near = _rquad(lambda r: r * r * self.nu(r), 0.0, 1.0)
            far = _rquad(self.nu, 1.0, np.inf)
        except QuadratureFailure as exc:
            raise InvalidMeasure(f"Levy integrability check failed: {exc}") from exc
        # extrapolating quadrature can return a finite value for a divergent
        # integral, so also require the decade blocks to shrink
        g = lambda r: np.minimum(r * r, 1.0) * self.nu(r)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            blocks = [[sint.quad(g, a, b, limit=200)[0] for a, b in zip(e[:-1], e[1:])]
                      for e in ((1e-4, 1e-8, 1e-12), (1e4, 1e8, 1e12))]
        blocks = [[abs(x) for x in b] for b in blocks]
        grows = any(b[1] > 0.99 * b[0] + 1e-300 for b in blocks)
        if grows or not (np.isfinite(near) and np.isfinite(far)) or near < 0 or far < 0:
            raise InvalidMeasure("int (1 ^ |u|^2) mu(du) is not finite")
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            m6 = sint.quad(self.nu, 1e-6, 1.0, limit=200)[0]
            m12 = sint.quad(self.nu, 1e-12, 1e-6, limit=200)[0] + m6
        object.__setattr__(self, "infinite_mass", bool(m12 > 1.01 * m6 + 1e-300))

    def __eq__(self, other):
        if type(other) is not type(self) or other.dim != self.dim:
            return False
        if self.profile is not None:
            return self.profile == other.profile
        return self.m is other.m

    def __hash__(self):
        return hash((self.variant, self.dim, repr(self.profile)))

    def nu(self, r):
        r = np.asarray(r, dtype=float)
        return self.m(r) * K.sphere_area(self.dim) * r ** (self.dim - 1)

    def psi_jump(self, xi):
        return self.kernel_integral("C", xi).astype(complex)

    def psi_small(self, xi, r_cut):
        return self.kernel_integral("C", xi, 0.0, r_cut).astype(complex)

    def to_config(self):
        if self.profile is None:
            raise InvalidMeasure("a RadialDensity built from a callable cannot be serialised")
        return {"variant": self.variant, "dim": self.dim, "profile": dict(self.profile)}


@dataclass(frozen=True, eq=False)
class DiscretizedStable(_PolarMeasure):
    """Shells of radius ``2^{-k upsilon}`` and mass ``2^{k gamma}``, uniform on each sphere.

    The sum over all integers ``k`` is truncated to ``[k_min, k_max]``;
    by default the dropped shells change ``psi^U`` by less than ``1e-10``
    for ``|xi|`` in ``[0, 1e8]``.
    """

    gamma: float
    upsilon: float
    dim: int = 2
    k_min: Optional[int] = None
    k_max: Optional[int] = None
    variant = "DiscretizedStable"

    XI_MAX = 1e8
    OMIT_TOL = 1e-10

    def __post_init__(self):
        g, v = self.gamma, self.upsilon
        if not (g > 0 and v > 0 and g < 2 * v):
            raise InvalidMeasure("need 0 < gamma < 2 upsilon (Levy integrability)")
        if self.dim not in K.SUPPORTED_DIMS:
            raise InvalidMeasure(f"dim must be 1, 2 or 3, got {self.dim}")
        if self.k_min is None:
            # sum_{k < k_min} 2^{k gamma} <= tol
            k = math.floor(math.log2(self.OMIT_TOL * (1 - 2.0**-g)) / g) + 1
            object.__setattr__(self, "k_min", int(k))
        if self.k_max is None:
            q = g - 2 * v
            k = math.ceil(math.log2(self.OMIT_TOL * (1 - 2.0**q) / self.XI_MAX**2) / q) - 1
            object.__setattr__(self, "k_max", int(k))
        if self.k_max < self.k_min:
            raise InvalidMeasure("k_max < k_min")
        k = np.arange(self.k_min, self.k_max + 1)
        object.__setattr__(self, "radii", 2.0 ** (-k * v))
        object.__setattr__(self, "masses", 2.0 ** (k * g))

    def __eq__(self, other):
        return (type(other) is type(self)
                and (self.gamma, self.upsilon, self.dim, self.k_min, self.k_max)
                == (other.gamma, other.upsilon, other.dim, other.k_min, other.k_max))

    def __hash__(self):
        return hash((self.variant, self.gamma, self.upsilon, self.dim, self.k_min, self.k_max))

    @property
    def alpha(self):
        return self.gamma / self.upsilon

    def _select(self, lo, hi):
        return (self.radii > lo) & (self.radii <= hi)

    def tail_mass(self, r):
        return float(self.masses[self.radii > r].sum())

    def nu_kernel(self, kernel, z, n_eff, lo, hi):
        sel = self._select(lo, hi)
        r, m = self.radii[sel], self.masses[sel]
        z = np.asarray(z, dtype=float)
        flat = z.ravel()
        uniq, inv = np.unique(flat, return_inverse=True)
        kf = K.KERNELS[kernel]
        vals = K.apply_rule(lambda x: kf(x, n_eff), uniq, r, m)
        return vals[inv].reshape(z.shape)

    def psi_jump(self, xi):
        return self.kernel_integral("C", xi).astype(complex)

    def psi_small(self, xi, r_cut):
        return self.kernel_integral("C", xi, 0.0, r_cut).astype(complex)

    def first_moment(self, lo, hi, include_boundary=False):
        return np.zeros(self.dim)

    def integrate(self, f, r_lo=0.0, r_hi=np.inf, tol=DEFAULT_TOL):
        self._check_singular(f, r_lo)
        dirs, w = angular_rule(self.dim)
        sel = (self.radii >= r_lo) & (self.radii <= r_hi)
        return float(sum(m * np.sum(w * f(r * dirs))
                         for r, m in zip(self.radii[sel], self.masses[sel])))

    def integrate_radial(self, g, r_lo=0.0, r_hi=np.inf, tol=DEFAULT_TOL):
        sel = (self.radii >= r_lo) & (self.radii <= r_hi)
        return float(np.sum(self.masses[sel] * g(self.radii[sel])))

    def sample(self, lo, hi, spacing):
        sel = self._select(lo, hi)
        return _spread(self, self.radii[sel], self.masses[sel], spacing / 2)

    def to_config(self):
        return {"variant": self.variant, "gamma": self.gamma, "upsilon": self.upsilon,
                "dim": self.dim, "k_min": self.k_min, "k_max": self.k_max}


@dataclass(frozen=True, eq=False)
class TabulatedAtoms(LevyMeasureSpec):
    """Finite measure with weighted atoms. Violates ``mu(R^n) = inf``; test use only."""

    atoms: tuple
    weights: tuple
    variant = "TabulatedAtoms"
    infinite_mass = False

    def __post_init__(self):
        a = np.atleast_2d(np.asarray(self.atoms, dtype=float))
        w = np.asarray(self.weights, dtype=float).ravel()
        if a.shape[0] != w.size:
            raise InvalidMeasure("one weight per atom required")
        if np.any(w <= 0):
            raise InvalidMeasure("atom weights must be positive")
        if a.shape[1] > MAX_DIM:
            raise InvalidMeasure("dimension above 3")
        if np.any(np.linalg.norm(a, axis=1) == 0):
            raise InvalidMeasure("an atom at the origin is not allowed")
        object.__setattr__(self, "atoms", tuple(map(tuple, a)))
        object.__setattr__(self, "weights", tuple(w))
        object.__setattr__(self, "_a", a)
        object.__setattr__(self, "_w", w)
        object.__setattr__(self, "_r", np.linalg.norm(a, axis=1))
        sym = all(any(np.allclose(-x, y) and np.isclose(wx, wy) for y, wy in zip(a, w))
                  for x, wx in zip(a, w))
        object.__setattr__(self, "symmetric", sym)
        object.__setattr__(self, "isotropic", False)

    def __eq__(self, other):
        return type(other) is type(self) and self.atoms == other.atoms and self.weights == other.weights

    def __hash__(self):
        return hash((self.variant, self.atoms, self.weights))

    @property
    def dim(self):
        return self._a.shape[1]

    def tail_mass(self, r):
        return float(self._w[self._r > r].sum())

    def _sel(self, lo, hi):
        return (self._r > lo) & (self._r <= hi)

    def kernel_integral(self, kernel, xi, lo=0.0, hi=np.inf):
        xi = _as_xi(xi, self.dim)
        sel = self._sel(lo, hi)
        x = xi @ self._a[sel].T
        return K.KERNELS[kernel](x, 1) @ self._w[sel]

    def psi_jump(self, xi):
        xi = _as_xi(xi, self.dim)
        x = xi @ self._a.T
        comp = (self._r < 1.0)
        return (1 - np.exp(1j * x) + 1j * x * comp) @ self._w

    def psi_small(self, xi, r_cut):
        xi = _as_xi(xi, self.dim)
        sel = self._r <= r_cut
        x = xi @ self._a[sel].T
        return (1 - np.exp(1j * x) + 1j * x) @ self._w[sel]

    def psi_small_imag(self, eta, r_cut):
        eta = _as_xi(eta, self.dim)
        sel = self._r <= r_cut
        x = eta @ self._a[sel].T
        return (-np.expm1(-x) - x) @ self._w[sel]

    def first_moment(self, lo, hi, include_boundary=False):
        if include_boundary:
            sel = (self._r >= lo) & (self._r <= hi)
        else:
            sel = (self._r > lo) & (self._r < hi)
        return self._w[sel] @ self._a[sel] if sel.any() else np.zeros(self.dim)

    def integrate(self, f, r_lo=0.0, r_hi=np.inf, tol=DEFAULT_TOL):
        sel = (self._r >= r_lo) & (self._r <= r_hi)
        if not sel.any():
            return 0.0
        return float(np.sum(self._w[sel] * f(self._a[sel])))

    def sample(self, lo, hi, spacing):
        sel = self._sel(lo, hi)
        return self._a[sel], self._w[sel]

    def to_config(self):
        return {"variant": self.variant, "atoms": [list(a) for a in self.atoms],
                "weights": list(self.weights)}


# ---------------------------------------------------------------------------
# triplet and module-level operations


@dataclass(frozen=True)
class LevyTriplet:
    """Drift and Levy measure of a pure-jump Levy process (no Gaussian part)."""

    measure: LevyMeasureSpec
    drift: tuple = field(default=None)

    def __post_init__(self):
        drift = self.drift
        if drift is None:
            drift = (0.0,) * self.measure.dim
        drift = tuple(float(x) for x in np.atleast_1d(drift))
        if len(drift) != self.measure.dim:
            raise InvalidMeasure(
                f"drift has length {len(drift)} but the measure lives in R^{self.measure.dim}")
        object.__setattr__(self, "drift", drift)

    @property
    def dim(self) -> int:
        return self.measure.dim

    @property
    def a(self) -> np.ndarray:
        return np.array(self.drift)

    @property
    def symmetric(self) -> bool:
        return self.measure.symmetric and not any(self.drift)

    def to_config(self) -> dict:
        return {"dim": self.dim, "drift": list(self.drift), "measure": self.measure.to_config()}


def integrate(spec: LevyMeasureSpec, f, r_lo: float = 0.0, r_hi: float = np.inf,
              tol: float = DEFAULT_TOL) -> float:
    """``int_{r_lo <= |u| <= r_hi} f(u) mu(du)``.

    ``f`` maps an array of points of shape ``(m, n)`` to ``m`` values.
    """
    if r_hi < r_lo:
        raise ValueError("empty region: r_hi < r_lo")
    return spec.integrate(f, r_lo, r_hi, tol)


def tail_mass(spec: LevyMeasureSpec, r: float) -> float:
    """``mu{|u| > r}``."""
    if r <= 0:
        raise ValueError("r must be positive")
    return spec.tail_mass(r)


def truncated_intensity(triplet: LevyTriplet, t: float, rho: float, grid: GridSpec,
                        eps_grid: float = 0.2) -> FiniteMeasure:
    """Big-jump intensity ``t mu(du) 1{rho |u| > 1}`` discretised on ``grid``.

    The returned measure's ``total_mass`` is the exact ``t mu{|u| > 1/rho}``;
    the node masses hold the part that fits on the grid. Raises
    :class:`GridCoverage` when more than ``eps_grid`` of it does not.
    """
    spec = triplet.measure
    lo = 1.0 / rho
    corner = math.sqrt(sum(e * e for e in grid.extent))
    total = t * spec.tail_mass(lo)
    if total == 0:
        return FiniteMeasure.zero(grid)
    pts, w = spec.sample(lo, corner, min(grid.spacing))
    w = t * np.asarray(w, dtype=float)
    # the radial rule is only approximate near the singular edge 1/rho; pin the
    # sampled mass to the exact mass of the annulus it represents
    exact = total - t * spec.tail_mass(corner)
    if w.sum() > 0 and exact > 0:
        w *= exact / w.sum()
    lam = FiniteMeasure.from_points(grid, pts, w, total_mass=total)
    need = _required_radius(spec, t, total, eps_grid)
    require_coverage(lam, eps_grid, required_extent=need)
    return lam


def _required_radius(spec, t, total, eps):
    r = 1.0
    for _ in range(200):
        if t * spec.tail_mass(r) <= eps * total:
            return r
        r *= 2
    return np.inf


# ---------------------------------------------------------------------------
# configuration files
#
# A model file is a key/value tree (JSON, or YAML for *.yml / *.yaml):
#
#   dim: 2
#   drift: [0.0, 0.0]
#   measure:
#     variant: IsotropicStable      # or DiscretizedStable, RadialDensity,
#     alpha: 1.5                    #    DirectionalStable, TabulatedAtoms
#     c: 0.1


def _num(tree, key, path, cast=float, required=True, default=None):
    if key not in tree:
        if required:
            raise ConfigError(f"{path}.{key}" if path else key, "missing required key")
        return default
    try:
        return cast(tree[key])
    except (TypeError, ValueError):
        raise ConfigError(f"{path}.{key}" if path else key,
                          f"expected {cast.__name__}, got {tree[key]!r}") from None


def _vectors(value, key):
    try:
        arr = np.atleast_2d(np.asarray(value, dtype=float))
    except (TypeError, ValueError):
        raise ConfigError(key, "expected a list of numeric vectors") from None
    return arr


def measure_from_config(tree: dict, dim=None, path="measure") -> LevyMeasureSpec:
    if not isinstance(tree, dict):
        raise ConfigError(path, "expected a mapping")
    variant = tree.get("variant")
    try:
        if variant == "IsotropicStable":
            return IsotropicStable(_num(tree, "alpha", path), _num(tree, "c", path),
                                   _num(tree, "dim", path, int, False, dim or 1))
        if variant == "DiscretizedStable":
            return DiscretizedStable(_num(tree, "gamma", path), _num(tree, "upsilon", path),
                                     _num(tree, "dim", path, int, False, dim or 2),
                                     _num(tree, "k_min", path, int, False),
                                     _num(tree, "k_max", path, int, False))
        if variant == "DirectionalStable":
            rays = _vectors(tree.get("rays", [[1.0]]), f"{path}.rays")
            return DirectionalStable(_num(tree, "alpha", path), _num(tree, "c", path),
                                     tuple(map(tuple, rays)))
        if variant == "RadialDensity":
            prof = tree.get("profile")
            if not isinstance(prof, dict):
                raise ConfigError(f"{path}.profile", "expected a mapping with a 'kind' key")
            if prof.get("kind") not in _PROFILES:
                raise ConfigError(f"{path}.profile.kind",
                                  f"unknown profile {prof.get('kind')!r}; known: {sorted(_PROFILES)}")
            for k in ("c", "alpha") + (("lam",) if prof["kind"] == "tempered" else ()):
                _num(prof, k, f"{path}.profile")
            return RadialDensity(dim=_num(tree, "dim", path, int, False, dim or 1),
                                 profile={k: (v if k == "kind" else float(v)) for k, v in prof.items()})
        if variant == "TabulatedAtoms":
            atoms = _vectors(tree.get("atoms"), f"{path}.atoms")
            w = tree.get("weights")
            if w is None:
                raise ConfigError(f"{path}.weights", "missing required key")
            return TabulatedAtoms(tuple(map(tuple, atoms)), tuple(float(x) for x in w))
    except InvalidMeasure as exc:
        raise ConfigError(path, str(exc)) from exc
    raise ConfigError(f"{path}.variant", f"unknown variant {variant!r}")


def triplet_from_config(tree: dict) -> LevyTriplet:
    if not isinstance(tree, dict):
        raise ConfigError("<root>", "expected a mapping")
    dim = _num(tree, "dim", "", int, required=False)
    if "measure" not in tree:
        raise ConfigError("measure", "missing required key")
    measure = measure_from_config(tree["measure"], dim)
    if dim is not None and measure.dim != dim:
        raise ConfigError("dim", f"measure lives in R^{measure.dim} but dim is {dim}")
    drift = tree.get("drift")
    if drift is not None:
        try:
            drift = tuple(float(x) for x in np.atleast_1d(drift))
        except (TypeError, ValueError):
            raise ConfigError("drift", "expected a list of numbers") from None
        if len(drift) != measure.dim:
            raise ConfigError("drift", f"length {len(drift)} does not match dim {measure.dim}")
    return LevyTriplet(measure, drift)


def load_config(path) -> dict:
    """Read a JSON or YAML key/value tree from ``path``."""
    import json
    from pathlib import Path

    path = Path(path)
    text = path.read_text()
    if path.suffix in (".yml", ".yaml"):
        import yaml
        try:
            return yaml.safe_load(text)
        except yaml.YAMLError as exc:
            raise ConfigError("<file>", f"YAML parse error: {exc}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("<file>", f"JSON parse error at line {exc.lineno}: {exc.msg}") from exc


def load_triplet(path) -> LevyTriplet:
    return triplet_from_config(load_config(path))
