"""Characteristic exponent, its auxiliary envelopes, and the time-to-space scale.

    psi_L(xi) = int_{|xi.u| <= 1} (xi.u)^2 mu(du)
    psi_U(xi) = int ((xi.u)^2 ^ 1) mu(du)
    psi*(r)   = sup_{|l| = 1} psi_U(r l)

``rho_t`` solves ``t psi*(rho_t) = 1``.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import integrate as sint
from scipy import optimize

from .errors import ModelRejected, ScaleUnreachable
from .levy_model import LevyMeasureSpec, LevyTriplet, _as_xi


@dataclass(frozen=True)
class ExponentValue:
    re: float
    im: float

    @classmethod
    def of(cls, z):
        return cls(float(np.real(z)), float(np.imag(z)))

    def __complex__(self):
        return complex(self.re, self.im)


def _measure(obj) -> LevyMeasureSpec:
    return obj.measure if isinstance(obj, LevyTriplet) else obj


def psi(triplet: LevyTriplet, xi) -> np.ndarray:
    """``psi(xi)`` as a complex array, shape ``xi.shape[:-1]`` (n = 1 also accepts scalars)."""
    xi = _as_xi(xi, triplet.dim)
    return 1j * (xi @ triplet.a) + triplet.measure.psi_jump(xi)


def psi_value(triplet: LevyTriplet, xi) -> ExponentValue:
    """``psi`` at a single frequency."""
    return ExponentValue.of(np.ravel(psi(triplet, xi))[0])


def psi_L(spec, xi) -> np.ndarray:
    return _measure(spec).kernel_integral("L", xi)


def psi_U(spec, xi) -> np.ndarray:
    return _measure(spec).kernel_integral("U", xi)


# ---------------------------------------------------------------------------
# sphere


@dataclass(frozen=True)
class SphereGrid:
    """Finite set of unit vectors standing in for the unit sphere."""

    directions: np.ndarray = field(repr=False)
    weights: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        d = np.atleast_2d(np.asarray(self.directions, dtype=float))
        if np.any(np.abs(np.linalg.norm(d, axis=1) - 1.0) > 1e-12):
            raise ValueError("sphere directions must be unit vectors")
        object.__setattr__(self, "directions", d)
        w = self.weights
        if w is None:
            w = np.full(d.shape[0], 1.0 / d.shape[0])
        object.__setattr__(self, "weights", np.asarray(w, dtype=float))

    @property
    def dim(self):
        return self.directions.shape[1]

    def __len__(self):
        return self.directions.shape[0]

    @classmethod
    def default(cls, dim: int, count: Optional[int] = None) -> "SphereGrid":
        """+-1 for n = 1; equally spaced angles (256) for n = 2; Fibonacci points (1024) for n = 3."""
        if dim == 1:
            return cls(np.array([[1.0], [-1.0]]))
        if dim == 2:
            m = count or 256
            th = 2 * np.pi * np.arange(m) / m
            d = np.stack([np.cos(th), np.sin(th)], axis=-1)
            # exact zeros on the axes, so axis-aligned degeneracies are not hidden by rounding
            d[np.abs(d) < 1e-15] = 0.0
            return cls(d / np.linalg.norm(d, axis=1, keepdims=True))
        if dim == 3:
            m = count or 1024
            k = np.arange(m) + 0.5
            z = 1 - 2 * k / m
            phi = math.pi * (1 + math.sqrt(5)) * k
            s = np.sqrt(1 - z * z)
            d = np.stack([s * np.cos(phi), s * np.sin(phi), z], axis=-1)
            return cls(d / np.linalg.norm(d, axis=1, keepdims=True))
        raise ValueError(f"dimension {dim} not supported")


def _sphere_for(spec, sphere):
    return sphere if sphere is not None else SphereGrid.default(spec.dim)


def _on_sphere(fn, spec, r, sphere):
    """``fn`` at ``r l`` for every radius and direction: shape ``(len(r), len(sphere))``."""
    r = np.atleast_1d(np.asarray(r, dtype=float))
    if spec.isotropic:
        e1 = np.zeros(spec.dim)
        e1[0] = 1.0
        col = fn(spec, r[:, None] * e1)
        return np.repeat(col[:, None], len(sphere), axis=1)
    xi = r[:, None, None] * sphere.directions[None, :, :]
    return fn(spec, xi)


def psi_star(spec, r, sphere: Optional[SphereGrid] = None):
    """``sup_l psi_U(r l)`` over the sphere grid (exact for isotropic measures)."""
    spec = _measure(spec)
    scalar = np.ndim(r) == 0
    vals = _on_sphere(psi_U, spec, r, _sphere_for(spec, sphere)).max(axis=1)
    return float(vals[0]) if scalar else vals


# ---------------------------------------------------------------------------
# condition A


@dataclass(frozen=True)
class ConditionAReport:
    beta_hat: Optional[float]
    r_range: tuple
    worst_direction_pair: tuple  # (l_sup, l_inf, r) at the worst sampled radius
    passed: bool
    witness_direction: Optional[np.ndarray] = None
    ratios: Optional[np.ndarray] = field(default=None, repr=False)
    radii: Optional[np.ndarray] = field(default=None, repr=False)

    def summary(self) -> str:
        if self.passed:
            return f"condition A holds on [{self.r_range[0]:g}, {self.r_range[1]:g}] with beta_hat={self.beta_hat:.6g}"
        d = np.array2string(self.witness_direction, precision=6, separator=",")
        return f"condition A fails: psi_L(r l) = 0 for l = {d} at r = {self.worst_direction_pair[2]:g}"


def check_condition_A(spec, r_range=(10.0, 1e6), sphere: Optional[SphereGrid] = None,
                      n_r: int = 50) -> ConditionAReport:
    """Estimate ``beta = max_r sup_l psi_U(r l) / inf_l psi_L(r l)`` on log-spaced radii."""
    spec = _measure(spec)
    r0, r1 = map(float, r_range)
    if not (0 < r0 < r1):
        raise ValueError("need 0 < r0 < r1")
    sphere = _sphere_for(spec, sphere)
    radii = np.geomspace(r0, r1, n_r)
    up = _on_sphere(psi_U, spec, radii, sphere)
    lo = _on_sphere(psi_L, spec, radii, sphere)
    i_sup = up.argmax(axis=1)
    i_inf = lo.argmin(axis=1)
    sup = up[np.arange(n_r), i_sup]
    inf = lo[np.arange(n_r), i_inf]
    dirs = sphere.directions
    bad = inf <= 0
    if bad.any():
        k = int(np.argmax(bad))
        return ConditionAReport(None, (r0, r1), (dirs[i_sup[k]], dirs[i_inf[k]], radii[k]),
                                False, dirs[i_inf[k]], None, radii)
    ratios = sup / inf
    k = int(np.argmax(ratios))
    beta = float(ratios[k])
    return ConditionAReport(beta, (r0, r1), (dirs[i_sup[k]], dirs[i_inf[k]], radii[k]),
                            bool(np.isfinite(beta)), None, ratios, radii)


def growth_floor(spec, beta: float, xi_samples, report: Optional[ConditionAReport] = None,
                 r0: float = 0.0) -> float:
    """Largest ``c`` with ``psi_U(xi) >= c |xi|^{2/beta}`` on the samples with ``|xi| >= r0``."""
    spec = _measure(spec)
    if report is not None and not report.passed:
        raise ModelRejected("condition A failed; growth floor is undefined")
    xi = _as_xi(xi_samples, spec.dim).reshape(-1, spec.dim)
    norms = np.linalg.norm(xi, axis=1)
    keep = norms >= max(r0, 1e-300)
    if not keep.any():
        raise ValueError("no frequency samples with |xi| >= r0")
    c = float(np.min(psi_U(spec, xi[keep]) / norms[keep] ** (2.0 / beta)))
    if not c > 0:
        raise ModelRejected("no positive growth constant fits the samples")
    return c


def u_from_l_identity(spec, xi1, xi2, tol=1e-10):
    """Both sides of ``psi_U(xi2) - psi_U(xi1) = int_{|xi1|}^{|xi2|} (2/r) psi_L(r l) dr``.

    ``xi1`` and ``xi2`` must be parallel with ``|xi1| <= |xi2|``.
    Returns ``(direct, integral)``.
    """
    spec = _measure(spec)
    x1 = np.asarray(_as_xi(xi1, spec.dim), dtype=float).ravel()
    x2 = np.asarray(_as_xi(xi2, spec.dim), dtype=float).ravel()
    n1, n2 = np.linalg.norm(x1), np.linalg.norm(x2)
    if n2 <= 0 or n1 > n2:
        raise ValueError("need 0 <= |xi1| <= |xi2|")
    l = x2 / n2
    if n1 > 0 and np.linalg.norm(x1 / n1 - l) > 1e-12:
        raise ValueError("frequencies must be parallel and point the same way")
    direct = float(psi_U(spec, x2) - psi_U(spec, x1)) if n1 > 0 else float(psi_U(spec, x2))
    # integrate in log r: (2/r) psi_L dr = 2 psi_L d(log r)
    lo = math.log(n1) if n1 > 0 else math.log(n2) - 60.0
    f = lambda s: 2.0 * float(psi_L(spec, math.exp(s) * l))
    val = sint.quad(f, lo, math.log(n2), epsabs=0.0, epsrel=tol, limit=500)[0]
    return direct, val


# ---------------------------------------------------------------------------
# scale


class ScaleSolver:
    """Solves ``t psi*(rho) = 1`` by bracketed root finding, memoised per ``t``."""

    def __init__(self, spec, sphere: Optional[SphereGrid] = None, tol: float = 1e-10,
                 bracket=(1e-8, 1e12)):
        self.spec = _measure(spec)
        self.sphere = _sphere_for(self.spec, sphere)
        self.tol = tol
        self.bracket = bracket
        self._memo: dict = {}
        self._lock = threading.Lock()

    def psi_star(self, r):
        return psi_star(self.spec, r, self.sphere)

    def __call__(self, t: float) -> float:
        return self.rho(t)

    def rho(self, t: float) -> float:
        if not t > 0:
            raise ValueError("t must be positive")
        t = float(t)
        with self._lock:
            if t in self._memo:
                return self._memo[t]
        value = self._solve(t)
        with self._lock:
            self._memo.setdefault(t, value)
            return self._memo[t]

    def table(self) -> dict:
        with self._lock:
            return dict(self._memo)

    def _solve(self, t):
        g = lambda s: math.log(t * self.psi_star(math.exp(s)))
        lo, hi = (math.log(b) for b in self.bracket)
        glo = t * self.psi_star(math.exp(lo))
        while glo >= 1.0:
            lo -= 5.0
            if lo < -700:
                raise ScaleUnreachable(f"t psi*(r) >= 1 for every r tried (t={t:g})")
            glo = t * self.psi_star(math.exp(lo))
        while t * self.psi_star(math.exp(hi)) < 1.0:
            hi += 5.0
            if hi > 700:
                raise ScaleUnreachable(f"psi* stays below 1/t = {1 / t:g} on the search range")
        if glo <= 0:
            # psi* vanishes near 0 only through underflow; step up to a positive value
            while t * self.psi_star(math.exp(lo)) <= 0:
                lo += 1.0
        s = optimize.brentq(g, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
        r = math.exp(s)
        if abs(t * self.psi_star(r) - 1.0) > self.tol:
            # bisection polish on the monotone function
            a, b = math.exp(lo), math.exp(hi)
            for _ in range(400):
                m = math.sqrt(a * b) if b / a > 1.0001 else 0.5 * (a + b)
                if t * self.psi_star(m) < 1.0:
                    a = m
                else:
                    b = m
                if abs(t * self.psi_star(b) - 1.0) <= self.tol:
                    break
            r = b
            if abs(t * self.psi_star(r) - 1.0) > self.tol:
                raise ScaleUnreachable(f"could not reach |t psi*(rho) - 1| <= {self.tol:g} at t={t:g}")
        return r


def rho(solver: ScaleSolver, spec, t: float) -> float:
    if _measure(spec) is not solver.spec and _measure(spec) != solver.spec:
        raise ValueError("solver was built for a different measure")
    return solver.rho(t)


# ---------------------------------------------------------------------------
# sampled invariant checks


@dataclass(frozen=True)
class SandwichReport:
    n_points: int
    n_violations: int
    worst_lower_margin: float
    worst_upper_margin: float

    @property
    def passed(self):
        return self.n_violations == 0


def check_sandwich(triplet: LevyTriplet, radii, sphere: Optional[SphereGrid] = None,
                   rtol: float = 1e-9) -> SandwichReport:
    """``(1 - cos 1) psi_L <= Re psi <= 2 psi_U`` at every ``(r, l)`` sample.

    Margins are relative: ``Re psi / ((1-cos 1) psi_L) - 1`` and
    ``1 - Re psi / (2 psi_U)``; negative means violated. A relative slack
    of ``rtol`` absorbs rounding.
    """
    spec = triplet.measure
    sphere = _sphere_for(spec, sphere)
    radii = np.asarray(radii, dtype=float)
    xi = radii[:, None, None] * sphere.directions[None, :, :]
    re = np.real(psi(triplet, xi))
    lo = (1 - math.cos(1.0)) * psi_L(spec, xi)
    up = 2 * psi_U(spec, xi)
    with np.errstate(divide="ignore", invalid="ignore"):
        lm = np.where(lo > 0, re / lo - 1.0, np.inf)
        um = np.where(up > 0, 1.0 - re / up, np.where(re <= 0, np.inf, -np.inf))
    viol = (lm < -rtol) | (um < -rtol)
    return SandwichReport(int(xi.shape[0] * xi.shape[1]), int(viol.sum()),
                          float(lm.min()), float(um.min()))
