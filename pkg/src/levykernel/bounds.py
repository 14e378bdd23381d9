"""Compound kernel estimates, fitted constants and bell-type comparisons.

A compound kernel bound with parameters ``(sigma, h, zeta, Q)`` is

    x -> sum_{m >= 0} (1/m!) int sigma h((x - y) zeta) Q^{*m}(dy).

The fits below look for the constants of ``h`` that make such a bound
dominate (or be dominated by) computed densities over a sweep of times.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import fft as sfft
from scipy import integrate, optimize, stats

from . import _kernels as K
from .decomposition import CompoundSeries, compound_series, decompose
from .density import DensityGrid, argmax_lex, auto_grid, density_fourier
from .errors import ModelRejected
from .exponent import ConditionAReport, ScaleSolver, check_condition_A
from .grid import FiniteMeasure, GridSpec
from .levy_model import LevyTriplet

DEFAULT_FLOOR = 1e-9
DEFAULT_REPORT_TOL = 1e-6


# ---------------------------------------------------------------------------
# kernel shapes


@dataclass(frozen=True)
class KernelShape:
    """Radial function ``x -> constant * profile(|x|)`` with ``sup profile = 1``."""

    name = "shape"

    @property
    def constant(self) -> float:
        raise NotImplementedError

    def profile(self, r):
        raise NotImplementedError

    def with_constant(self, c: float) -> "KernelShape":
        raise NotImplementedError

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        r = np.abs(x) if x.ndim <= 1 else np.linalg.norm(x, axis=-1)
        return self.constant * self.profile(r)

    def radial(self, r):
        return self.constant * self.profile(np.abs(np.asarray(r, dtype=float)))

    @property
    def sup(self) -> float:
        return self.constant

    def profile_l1(self, dim: int) -> float:
        """``int_{R^n} profile(|x|) dx``."""
        area = K.sphere_area(dim)
        val, _ = integrate.quad(lambda r: self.profile(np.array([r]))[0] * r ** (dim - 1), 0, np.inf,
                                limit=200)
        return area * val


def _check_pos(**kw):
    for k, v in kw.items():
        if not (v > 0 and math.isfinite(v)):
            raise ValueError(f"{k} must be positive and finite, got {v}")


@dataclass(frozen=True)
class ExpDecay(KernelShape):
    b1: float
    b2: float
    name = "exp"

    def __post_init__(self):
        _check_pos(b1=self.b1, b2=self.b2)

    @property
    def constant(self):
        return self.b1

    def profile(self, r):
        return np.exp(-self.b2 * np.asarray(r, dtype=float))

    def with_constant(self, c):
        return ExpDecay(c, self.b2)

    def profile_l1(self, dim):
        return K.sphere_area(dim) * math.gamma(dim) / self.b2**dim


@dataclass(frozen=True)
class ExpLogDecay(KernelShape):
    """``b1 exp(-b2 |x| log(1 + |x|))``, lighter tailed than :class:`ExpDecay`."""

    b1: float
    b2: float
    name = "explog"

    def __post_init__(self):
        _check_pos(b1=self.b1, b2=self.b2)

    @property
    def constant(self):
        return self.b1

    def profile(self, r):
        r = np.asarray(r, dtype=float)
        return np.exp(-self.b2 * r * np.log1p(r))

    def with_constant(self, c):
        return ExpLogDecay(c, self.b2)


@dataclass(frozen=True)
class Indicator(KernelShape):
    b3: float
    b4: float
    name = "indicator"

    def __post_init__(self):
        _check_pos(b3=self.b3, b4=self.b4)

    @property
    def constant(self):
        return self.b3

    def profile(self, r):
        return (np.asarray(r, dtype=float) <= self.b4).astype(float)

    def with_constant(self, c):
        return Indicator(c, self.b4)

    def profile_l1(self, dim):
        return K.sphere_area(dim) * self.b4**dim / dim


@dataclass(frozen=True)
class PowerDecay(KernelShape):
    """``c (1 + |x|)^{-exponent}``."""

    c: float
    exponent: float
    name = "power"

    def __post_init__(self):
        _check_pos(c=self.c, exponent=self.exponent)

    @property
    def constant(self):
        return self.c

    def profile(self, r):
        return (1.0 + np.asarray(r, dtype=float)) ** -self.exponent

    def with_constant(self, c):
        return PowerDecay(c, self.exponent)


@dataclass(frozen=True)
class TailFunction(KernelShape):
    """``C min(1, 1 - G(|x|))`` for a radial tail ``1 - G``.

    ``tail`` defaults to the power tail ``r^{-alpha}``.
    """

    C: float
    alpha: Optional[float] = None
    tail: Optional[Callable] = field(default=None, compare=False)
    name = "tail"

    def __post_init__(self):
        _check_pos(C=self.C)
        if self.tail is None and self.alpha is None:
            raise ValueError("give either alpha or a tail function")
        if self.alpha is not None:
            _check_pos(alpha=self.alpha)

    @property
    def constant(self):
        return self.C

    def one_minus_G(self, r):
        r = np.asarray(r, dtype=float)
        if self.tail is not None:
            return np.asarray(self.tail(r), dtype=float)
        with np.errstate(divide="ignore", over="ignore"):
            return np.where(r > 0, r ** -(self.alpha or 1.0), np.inf)

    def profile(self, r):
        return np.minimum(1.0, self.one_minus_G(r))

    def with_constant(self, c):
        return TailFunction(c, self.alpha, self.tail)


SHAPES = {"exp": ExpDecay, "explog": ExpLogDecay, "indicator": Indicator, "power": PowerDecay,
          "tail": TailFunction}


# ---------------------------------------------------------------------------
# compound kernel


@dataclass(frozen=True)
class CompoundKernelParams:
    """``(sigma, h, zeta, Q)`` together with the series of ``Q``."""

    sigma: float
    shape: KernelShape
    zeta: float
    series: CompoundSeries = field(repr=False)

    def __post_init__(self):
        _check_pos(sigma=self.sigma, zeta=self.zeta)

    @classmethod
    def build(cls, sigma, shape, zeta, Q: FiniteMeasure, eps_tail: float = 1e-10):
        return cls(sigma, shape, zeta, compound_series(Q, eps_tail))

    @property
    def M(self) -> int:
        return self.series.M

    @property
    def remainder(self) -> float:
        """``sigma sup h sum_{m > M} lam^m / m!``, the most the dropped terms can add."""
        return self.sigma * self.shape.sup * self.series.tail_bound


def eval_compound_kernel(params: CompoundKernelParams, x, with_remainder: bool = True):
    """The truncated series at the point(s) ``x``, plus the remainder bound.

    ``x`` is a point of R^n or an array of points (last axis = coordinates).
    """
    grid = params.series.grid
    W = params.series.weighted_sum()
    idx = np.nonzero(W)
    ys = np.stack([ax[i] for ax, i in zip(grid.axes(), idx)], axis=-1)
    wts = W[idx]
    x = np.asarray(x, dtype=float)
    pts = x.reshape(-1, grid.dim)
    out = np.empty(len(pts))
    for k, p in enumerate(pts):
        r = np.linalg.norm(p[None, :] - ys, axis=1) * params.zeta
        out[k] = params.sigma * params.shape.radial(r) @ wts
    if with_remainder:
        out += params.remainder
    if x.ndim == 0 or (x.ndim == 1 and x.size == grid.dim):
        return float(out[0])
    return out.reshape(x.shape if grid.dim == 1 and x.shape[-1:] != (1,) else x.shape[:-1])


class KernelConvolver:
    """``x -> sum_j W_j k(|x - y_j|)`` for ``x`` on ``out_grid`` and ``y`` on the grid of ``W``.

    Both grids are centred with equal spacing; the weights' FFT is reused
    for every radial profile ``k``.
    """

    def __init__(self, W: np.ndarray, w_grid: GridSpec, out_grid: GridSpec):
        if not np.allclose(w_grid.spacing, out_grid.spacing, rtol=1e-12):
            raise ValueError("grids must share their spacing")
        self.out_grid = out_grid
        self.nq = w_grid.n_points
        self.n = out_grid.n_points
        self.h = out_grid.spacing
        self.lengths = [q + k - 1 for q, k in zip(self.nq, self.n)]
        self.fshape = [sfft.next_fast_len(q + L - 1, real=True) for q, L in zip(self.nq, self.lengths)]
        self.FW = sfft.rfftn(W, self.fshape)
        offs = [(np.arange(L) - q + 1 - k // 2 + q // 2) * h
                for L, q, k, h in zip(self.lengths, self.nq, self.n, self.h)]
        mesh = np.meshgrid(*offs, indexing="ij", sparse=True)
        self.dist = np.sqrt(sum(m * m for m in mesh))

    def __call__(self, radial_fn) -> np.ndarray:
        H = radial_fn(self.dist)
        full = sfft.irfftn(self.FW * sfft.rfftn(H, self.fshape), self.fshape)
        sl = tuple(slice(q - 1, q - 1 + k) for q, k in zip(self.nq, self.n))
        return full[sl]


# ---------------------------------------------------------------------------
# density sweeps


@dataclass
class SweepPoint:
    """Everything the fits need at one time ``t``.

    ``density`` holds ``p_t(x + a_t)`` (or a derivative of it) on ``grid``.
    ``weights`` is ``sum_{m <= M} Lambda^{*m} / m!`` as node masses on
    ``big_grid``, a grid enlarged around ``grid`` so jumps landing just
    outside it still count; ``tail_bound`` is ``sum_{m > M} lam^m / m!``.
    ``bar`` (optional) is the small-jump density and ``x_t`` its argmax.
    """

    t: float
    rho: float
    a_t: np.ndarray
    grid: GridSpec
    density: DensityGrid = field(repr=False)
    big_grid: GridSpec = field(repr=False)
    weights: np.ndarray = field(repr=False)
    M: int = 0
    lambda_mass: float = 0.0
    tail_bound: float = 0.0
    bar: Optional[DensityGrid] = field(default=None, repr=False)
    x_t: Optional[np.ndarray] = None

    def convolver(self) -> KernelConvolver:
        return KernelConvolver(self.weights, self.big_grid, self.grid)


@dataclass
class Sweep:
    triplet: LevyTriplet
    points: list
    condition: ConditionAReport
    orders: tuple = None

    @property
    def dim(self) -> int:
        return self.triplet.dim

    @property
    def ts(self) -> list:
        return [p.t for p in self.points]

    @property
    def derivative_order(self) -> int:
        return int(sum(self.orders or ()))


def _gate(condition: ConditionAReport, what: str):
    if not condition.passed:
        raise ModelRejected(f"{what} needs condition A: {condition.summary()}")


def sweep_point(triplet: LevyTriplet, t: float, rho: float, n_points: Optional[int] = None,
                extent_factor: float = 20.0, orders=None, with_bar: bool = False,
                enlarge: int = 2, eps_tail: float = 1e-10) -> SweepPoint:
    grid = auto_grid(triplet, t, rho, n_points, extent_factor)
    big = grid.enlarged(enlarge)
    dec = decompose(triplet, t, rho, big)
    series = compound_series(dec.lam, eps_tail)
    W = series.weighted_sum()
    M, tail, a_t, lam = series.M, series.tail_bound, dec.a_t, dec.lambda_mass
    del series, dec
    dens = density_fourier(triplet, t, grid, "full", orders=orders, shift=a_t)
    bar = x_t = None
    if with_bar:
        bar = density_fourier(triplet, t, grid, "bar", rho=rho)
        x_t = argmax_lex(bar)
    return SweepPoint(t, rho, a_t, grid, dens, big, W, M, lam, tail, bar, x_t)


def prepare_sweep(triplet: LevyTriplet, ts: Sequence[float], n_points: Optional[int] = None,
                  extent_factor: float = 20.0, orders=None, with_bar: bool = False,
                  solver: Optional[ScaleSolver] = None, jobs: int = 1,
                  condition: Optional[ConditionAReport] = None, enlarge: int = 2) -> Sweep:
    """Densities, scales and big-jump series for each ``t`` (sorted ascending).

    Refused with :class:`ModelRejected` when condition A fails.
    """
    ts = sorted(float(t) for t in ts)
    if not ts or ts[0] <= 0:
        raise ValueError("times must be positive")
    condition = condition or check_condition_A(triplet.measure)
    _gate(condition, "a density sweep")
    solver = solver or ScaleSolver(triplet.measure)
    rhos = [solver.rho(t) for t in ts]

    def work(args):
        t, rho = args
        return sweep_point(triplet, t, rho, n_points, extent_factor, orders, with_bar, enlarge)

    if jobs > 1:
        with ThreadPoolExecutor(jobs) as ex:
            pts = list(ex.map(work, zip(ts, rhos)))
    else:
        pts = [work(a) for a in zip(ts, rhos)]
    return Sweep(triplet, pts, condition, tuple(orders) if orders is not None else None)


# ---------------------------------------------------------------------------
# reports


@dataclass
class BoundReport:
    """Outcome of a fit: constants, per-``t`` worst ratios and a verdict.

    For upper bounds ``worst_ratio`` is ``max density / bound`` (at most 1
    after fitting); for lower bounds it is ``min density / bound`` (at
    least 1). ``margin`` is the distance of that ratio from 1.
    """

    direction: str
    shape: str
    constants: dict
    rows: list
    verdict: bool
    report_tol: float = DEFAULT_REPORT_TOL
    witness: Optional[dict] = None
    extra: dict = field(default_factory=dict)

    @property
    def worst_ratio(self) -> float:
        vals = [r["worst_ratio"] for r in self.rows]
        return max(vals) if self.direction == "upper" else min(vals)

    def summary(self) -> str:
        c = ", ".join(f"{k}={v:.6g}" for k, v in self.constants.items() if v is not None)
        return f"{self.direction} {self.shape}: {c}; {'pass' if self.verdict else 'FAIL'}"


def _mask(values, floor):
    v = np.abs(values)
    return v >= floor * v.max()


# ---------------------------------------------------------------------------
# upper compound kernel fit


def _upper_shape(name):
    if name not in ("exp", "explog"):
        raise ValueError(f"upper fits use the 'exp' or 'explog' shape, not {name!r}")
    return SHAPES[name]


def upper_ratio(sweep: Sweep, shape: KernelShape, power: Optional[int] = None,
                floor: float = DEFAULT_FLOOR, convolvers=None):
    """Per-``t`` maxima of ``|density| / bound`` for the compound kernel
    bound with parameters ``(rho^power, shape, rho, Lambda_t)``.

    Returns ``[(ratio, point), ...]``.
    """
    power = sweep.dim + sweep.derivative_order if power is None else power
    out = []
    for i, p in enumerate(sweep.points):
        conv = convolvers[i] if convolvers is not None else p.convolver()
        kern = conv(lambda d: shape.profile(d * p.rho))
        bound = p.rho**power * shape.constant * (kern + p.tail_bound)
        m = _mask(p.density.values, floor)
        ratio = np.where(m, np.abs(p.density.values) / bound, 0.0)
        k = np.unravel_index(int(np.argmax(ratio)), ratio.shape)
        out.append((float(ratio[k]), p.grid.node(k)))
    return out


def fit_upper(sweep: Sweep, shape: str = "exp", power: Optional[int] = None,
              b2_range=(1e-2, 1e2), b2: Optional[float] = None, floor: float = DEFAULT_FLOOR,
              report_tol: float = DEFAULT_REPORT_TOL, b1_max: float = 1e8, n_ladder: int = 21) -> BoundReport:
    """Fit ``b1, b2`` so that ``|density| <= sum_m (1/m!) int rho^power b1 h_b2(rho (x - y)) Lambda^{*m}(dy)``.

    ``h_b2`` is ``exp(-b2 r)`` or ``exp(-b2 r log(1 + r))``. For a given
    ``b2`` the least admissible ``b1`` is a maximum of ratios; ``b2`` is
    then chosen to minimise ``b1 / b2^n``, the bound's mass scale (the
    least ``b1`` alone would push ``b2`` to zero). Pass ``b2`` to skip the
    search.
    """
    _gate(sweep.condition, "an upper compound kernel fit")
    cls = _upper_shape(shape)
    n = sweep.dim
    cache = {}
    convs = [p.convolver() for p in sweep.points]

    def b1_of(lb2):
        if lb2 not in cache:
            r = upper_ratio(sweep, cls(1.0, math.exp(lb2)), power, floor, convs)
            cache[lb2] = (max(x for x, _ in r), r)
        return cache[lb2][0]

    def objective(lb2):
        return math.log(b1_of(lb2)) - n * lb2

    if b2 is not None:
        lb2 = math.log(b2)
    else:
        lo, hi = map(math.log, b2_range)
        ladder = np.linspace(lo, hi, n_ladder)
        vals = [objective(x) for x in ladder]
        i = int(np.argmin(vals))
        a, b = ladder[max(i - 1, 0)], ladder[min(i + 1, n_ladder - 1)]
        res = optimize.minimize_scalar(objective, bounds=(a, b), method="bounded",
                                       options={"xatol": 1e-3})
        lb2 = res.x if res.fun <= vals[i] else ladder[i]
    b1 = b1_of(lb2)
    b2v = math.exp(lb2)
    fitted = cls(b1, b2v)
    ratios = upper_ratio(sweep, fitted, power, floor, convs)
    del convs
    rows = [{"t": p.t, "rho": p.rho, "worst_ratio": r, "worst_point": tuple(x),
             "margin": 1.0 - r} for p, (r, x) in zip(sweep.points, ratios)]
    worst = max(rows, key=lambda r: r["worst_ratio"])
    ok = bool(b1 <= b1_max and worst["worst_ratio"] <= 1.0 + report_tol)
    wit = None if ok else {"t": worst["t"], "x": worst["worst_point"], "ratio": worst["worst_ratio"]}
    return BoundReport("upper", shape, {"b1": b1, "b2": b2v}, rows, ok, report_tol, wit,
                       {"power": sweep.dim + sweep.derivative_order if power is None else power,
                        "objective": b1 / b2v**n})


# ---------------------------------------------------------------------------
# lower compound kernel fit


def _lower_profile(p: SweepPoint, power: int):
    """Grid points sorted by ``rho |x - x_t|``: distances, scaled values
    ``density / rho^power``, their running minimum, and the points."""
    if p.x_t is None:
        raise ValueError("lower fits need the small-jump argmax; build the sweep with with_bar=True")
    pts = np.stack([m.ravel() for m in p.grid.mesh()], axis=-1)
    dist = np.linalg.norm(pts - p.x_t[None, :], axis=1) * p.rho
    order = np.argsort(dist, kind="stable")
    v = p.density.values.ravel()[order] / p.rho**power
    return dist[order], v, np.minimum.accumulate(v), pts[order]


def fit_lower(sweep: Sweep, b4_max: float = 20.0, report_tol: float = DEFAULT_REPORT_TOL) -> BoundReport:
    """Fit ``b3, b4`` with ``p_t(x + a_t) >= b3 rho^n`` whenever ``rho |x - x_t| <= b4``.

    ``b3(b4)`` is the least value of ``p_t(x + a_t) / rho^n`` over the ball
    (and over the sweep); ``b4`` maximises ``b3 b4^n``. Candidate radii are
    the distances of grid points from ``x_t``, so the constraint is exact
    on the grid. The ``m = 0`` term of the compound kernel is all that is
    checked; the other terms only add to the bound.
    """
    _gate(sweep.condition, "a lower compound kernel fit")
    n = sweep.dim
    profs = [_lower_profile(p, n) for p in sweep.points]
    b3_zero = float(min(run[0] for _, _, run, _ in profs))
    cand = np.unique(np.concatenate([d[d <= b4_max] for d, _, _, _ in profs]))
    b3 = np.full(cand.shape, np.inf)
    for d, _, run, _ in profs:
        k = np.searchsorted(d, cand, side="right") - 1
        b3 = np.minimum(b3, np.where(k >= 0, run[np.maximum(k, 0)], np.inf))
    score = np.where((b3 > 0) & np.isfinite(b3), b3 * cand**n, -np.inf)
    i = int(np.argmax(score))
    if not (score[i] > 0):
        j = int(np.argmin([run[0] for _, _, run, _ in profs]))
        wit = {"t": sweep.points[j].t, "x": tuple(profs[j][3][0]), "ratio": b3_zero}
        return BoundReport("lower", "indicator", {"b3": None, "b4": None}, [], False, report_tol, wit,
                           {"b3_at_zero_radius": b3_zero})
    B3, B4 = float(b3[i]), float(cand[i])
    rows = []
    for p, (d, v, _, pts) in zip(sweep.points, profs):
        k = int(np.searchsorted(d, B4, side="right"))
        j = int(np.argmin(v[:k]))
        rows.append({"t": p.t, "rho": p.rho, "worst_ratio": float(v[j] / B3), "worst_point": tuple(pts[j]),
                     "margin": float(v[j] / B3) - 1.0, "x_t": tuple(p.x_t),
                     "value_at_x_t": float(v[0] * p.rho**n)})
    worst = min(rows, key=lambda r: r["worst_ratio"])
    ok = bool(worst["worst_ratio"] >= 1.0 - report_tol)
    return BoundReport("lower", "indicator", {"b3": B3, "b4": B4}, rows, ok, report_tol,
                       None if ok else {"t": worst["t"], "x": worst["worst_point"], "ratio": worst["worst_ratio"]},
                       {"b3_at_zero_radius": b3_zero, "score": B3 * B4**n})


# ---------------------------------------------------------------------------
# bell-type bounds


def point_density(measure, u):
    """Lebesgue density ``m(u)`` of an isotropic measure with a radial density."""
    if not (getattr(measure, "isotropic", False) and hasattr(measure, "nu")):
        raise ModelRejected("bell bounds need an isotropic Levy measure with a density")
    r = np.linalg.norm(np.atleast_2d(np.asarray(u, dtype=float)), axis=-1) if measure.dim > 1 \
        else np.abs(np.asarray(u, dtype=float)).ravel()
    return measure.nu(r) / (K.sphere_area(measure.dim) * r ** (measure.dim - 1))


@dataclass
class PreconditionCheck:
    """Sampled ratio ``lhs / rhs`` of a bell-bound precondition.

    ``upper`` (``lower``) is the sup (inf) of the ratio: the constant for
    which the inequality (its reverse) holds on the samples. A direction
    fails when widening the sampled range from ``inner`` to all samples
    moves its constant by more than a factor ``growth`` (the ratio is then
    not bounded).
    """

    upper: float
    lower: float
    upper_ok: bool
    lower_ok: bool
    upper_witness: tuple
    lower_witness: tuple

    def holds(self, direction: str) -> bool:
        return {"upper": self.upper_ok, "lower": self.lower_ok,
                "both": self.upper_ok and self.lower_ok}[direction]


def _precondition(ratio, ts, us, inner, growth=2.0) -> PreconditionCheck:
    """``ratio[i, j]`` at ``(ts[i], us[j])``; ``inner`` masks the core of ``us``."""
    iu = np.unravel_index(int(np.argmax(ratio)), ratio.shape)
    il = np.unravel_index(int(np.argmin(ratio)), ratio.shape)
    up, lo = float(ratio[iu]), float(ratio[il])
    up_in, lo_in = float(ratio[:, inner].max()), float(ratio[:, inner].min())
    return PreconditionCheck(up, lo, bool(np.isfinite(up) and up <= growth * up_in),
                             bool(lo > 0 and lo >= lo_in / growth),
                             (ts[iu[0]], us[iu[1]]), (ts[il[0]], us[il[1]]))


def _refuse(check: PreconditionCheck, direction: str, what: str):
    for d in (("upper", "lower") if direction == "both" else (direction,)):
        if not check.holds(d):
            t, u = check.upper_witness if d == "upper" else check.lower_witness
            raise ModelRejected(f"{what}: the {d} precondition is not bounded on the samples "
                                f"(witness t={t:g}, |u|={u:g})")


def _ratio_rows(sweep, bound_fn, floor):
    rows, hi, lo = [], 0.0, np.inf
    for p in sweep.points:
        phi = bound_fn(p)
        q = p.density.values
        m = _mask(q, floor)
        ratio = np.where(m, q / phi, np.nan)
        kh = np.unravel_index(int(np.nanargmax(ratio)), ratio.shape)
        kl = np.unravel_index(int(np.nanargmin(ratio)), ratio.shape)
        o = p.grid.origin_index
        rows.append({"t": p.t, "rho": p.rho, "max_ratio": float(ratio[kh]), "min_ratio": float(ratio[kl]),
                     "max_point": tuple(p.grid.node(kh)), "min_point": tuple(p.grid.node(kl)),
                     "ratio_at_zero": float(q[o] / phi[o])})
        hi, lo = max(hi, float(ratio[kh])), min(lo, float(ratio[kl]))
    return rows, hi, lo


def bell_power_bound(sweep: Sweep, b: float, direction: str = "both", max_ratio: float = 50.0,
                     floor: float = DEFAULT_FLOOR, u_range=(1e-3, 1e3), check_precondition: bool = True,
                     report_tol: float = DEFAULT_REPORT_TOL) -> BoundReport:
    """Fit ``c1, c2`` in ``c2 phi_t <= p_t(x + a_t) <= c1 phi_t``, ``phi_t(x) = rho^n (1 + rho |x|)^{-n-b}``.

    The precondition ``t rho^{-n} m(u / rho) <= kappa |u|^{-n-b}`` (and its
    reverse for the lower side) is sampled over the sweep times and
    ``|u|`` in ``u_range``; a direction whose constant is not bounded is
    refused. ``ratio_at_zero`` in each row is ``p_t(a_t) / rho^n``. The
    two-sided verdict asks for ``c1 / c2 <= max_ratio``.
    """
    _gate(sweep.condition, "a bell bound")
    if not b > 0:
        raise ValueError("b must be positive")
    n = sweep.dim
    meas = sweep.triplet.measure
    us = np.geomspace(*u_range, 61)
    inner = (us >= u_range[0] * 10) & (us <= u_range[1] / 10)
    ratio = np.array([[p.t * p.rho**-n * point_density(meas, np.eye(n)[0] * u / p.rho)[0] * u ** (n + b)
                       for u in us] for p in sweep.points])
    pre = _precondition(ratio, sweep.ts, us, inner)
    if check_precondition:
        _refuse(pre, direction, "power bell bound")
    rows, c1, c2 = _ratio_rows(sweep, lambda p: p.rho**n * (1 + p.rho * p.grid.norms()) ** (-n - b), floor)
    up_ok = pre.upper_ok and np.isfinite(c1)
    lo_ok = pre.lower_ok and c2 > 0
    spread = c1 / c2 if c2 > 0 else np.inf
    ok = {"upper": up_ok, "lower": lo_ok, "both": up_ok and lo_ok and spread <= max_ratio}[direction]
    for r in rows:
        r["worst_ratio"] = r["max_ratio"] / c1 if direction != "lower" else r["min_ratio"] / c2
    wit = None
    if not ok:
        k = int(np.argmax([r["max_ratio"] / max(r["min_ratio"], 1e-300) for r in rows]))
        wit = {"t": rows[k]["t"], "x": rows[k]["max_point"], "ratio": spread}
    return BoundReport(direction if direction != "both" else "two-sided", "power",
                       {"c1": c1, "c2": c2, "b": b}, rows, bool(ok), report_tol, wit,
                       {"kappa_upper": pre.upper, "kappa_lower": pre.lower, "spread": spread,
                        "precondition": pre})


def bell_subexp_bound(sweep: Sweep, tail: TailFunction, f_shape: Optional[KernelShape] = None,
                      direction: str = "upper", floor: float = DEFAULT_FLOOR, v_range=(1.0, 1e4),
                      check_precondition: bool = True, report_tol: float = DEFAULT_REPORT_TOL) -> BoundReport:
    """Fit ``C1`` in ``p_t(x + a_t) <= C1 rho^n (f(rho x) + 1 - G(rho x))``.

    ``f`` defaults to ``exp(-|z|)``; for ``direction="lower"`` it should
    be an :class:`Indicator` and ``C2`` is fitted the other way round.
    The precondition ``t mu{|rho u| > |v|} <= C (1 - G(v))`` is sampled for
    ``|v|`` in ``v_range`` through :meth:`tail_mass`.
    """
    _gate(sweep.condition, "a bell bound")
    if direction not in ("upper", "lower"):
        raise ValueError("direction must be 'upper' or 'lower'")
    f_shape = f_shape or (ExpDecay(1.0, 1.0) if direction == "upper" else Indicator(1.0, 1.0))
    vs = np.geomspace(*v_range, 81)
    g = tail.one_minus_G(vs)
    if np.any(g <= 0) or np.any(g > 1 + 1e-12) or np.any(np.diff(g) > 0):
        raise ValueError("1 - G must be nonincreasing with values in (0, 1] for |v| >= 1")
    meas = sweep.triplet.measure
    ratio = np.array([[p.t * meas.tail_mass(v / p.rho) for v in vs] / g for p in sweep.points])
    inner = vs <= v_range[0] * 100
    pre = _precondition(ratio, sweep.ts, vs, inner)
    if check_precondition:
        _refuse(pre, direction, "sub-exponential bell bound")
    n = sweep.dim

    def bound(p):
        z = p.rho * p.grid.norms()
        return p.rho**n * (f_shape.radial(z) / f_shape.constant + tail.profile(z))

    rows, hi, lo = _ratio_rows(sweep, bound, floor)
    C = hi if direction == "upper" else lo
    for r in rows:
        r["worst_ratio"] = (r["max_ratio"] if direction == "upper" else r["min_ratio"]) / C
    ok = bool(np.isfinite(C) and C > 0 and pre.holds(direction))
    return BoundReport(direction, "tail", {"C1" if direction == "upper" else "C2": C,
                                           "C_pre": pre.upper if direction == "upper" else pre.lower},
                       rows, ok, report_tol, None, {"precondition": pre, "f_shape": f_shape, "tail": tail})


# ---------------------------------------------------------------------------
# masses of bounds over balls


def radial_mass(fn, radii, dim: int, n_nodes: int = 20000, r_min_factor: float = 1e-8):
    """``int_{|x| <= R} fn(|x|) dx`` for each ``R`` by a midpoint sum in ``log r``."""
    radii = np.atleast_1d(np.asarray(radii, dtype=float))
    top = radii.max()
    lo = top * r_min_factor
    edges = np.geomspace(lo, top, n_nodes + 1)
    mid = np.sqrt(edges[1:] * edges[:-1])
    dlog = np.log(edges[1:] / edges[:-1])
    terms = fn(mid) * K.sphere_area(dim) * mid**dim * dlog
    cum = np.concatenate([[0.0], np.cumsum(terms)])
    # ball of radius lo: fn is bounded near 0, so its mass there is below fn(lo) lo^n
    head = fn(np.array([lo]))[0] * K.sphere_area(dim) * lo**dim / dim
    return head + np.interp(np.log(radii), np.log(edges), cum)


def subexp_bound_mass(report: BoundReport, rho: float, radii, dim: int) -> np.ndarray:
    """Mass over balls of the fitted bound ``C1 rho^n (f(rho x) + 1 - G(rho x))``."""
    f, tail = report.extra["f_shape"], report.extra["tail"]
    C = report.constants.get("C1", report.constants.get("C2"))
    fn = lambda r: C * rho**dim * (f.radial(rho * r) / f.constant + tail.profile(rho * r))
    return radial_mass(fn, radii, dim)


def _radial_inverse(cdf_r, cdf):
    def draw(u):
        return np.interp(u, cdf, cdf_r)
    return draw


def sample_big_jumps(measure, t: float, rho: float, n_samples: int, rng, r_top_factor: float = 1e8):
    """Samples of the compound Poisson variable with intensity ``t mu`` on ``|u| > 1/rho``.

    Radii are drawn by inverting a log-spaced table of ``tail_mass``;
    directions are uniform (isotropic measures) or drawn from the rays.
    """
    dim = measure.dim
    lo = 1.0 / rho
    lam = t * measure.tail_mass(lo)
    counts = rng.poisson(lam, n_samples)
    total = int(counts.sum())
    out = np.zeros((n_samples, dim))
    if total == 0:
        return out, lam
    r = np.geomspace(lo, lo * r_top_factor, 4001)
    tail = np.array([measure.tail_mass(x) for x in r]) / measure.tail_mass(lo)
    # tail decreases from 1; invert 1 - tail, which increases
    draw = _radial_inverse(np.log(r), 1.0 - tail)
    radii = np.exp(draw(rng.uniform(0.0, 1.0 - tail[-1], total)))
    if getattr(measure, "isotropic", False):
        d = rng.standard_normal((total, dim)) if dim > 1 else rng.choice([-1.0, 1.0], (total, 1))
        d /= np.linalg.norm(d, axis=1, keepdims=True)
    else:
        w = np.asarray(measure.direction_weights, dtype=float)
        d = np.asarray(measure.directions)[rng.choice(len(w), total, p=w / w.sum())]
    owner = np.repeat(np.arange(n_samples), counts)
    np.add.at(out, owner, radii[:, None] * d)
    return out, lam


def sample_radial_shape(shape: KernelShape, dim: int, n: int, rng, r_max: Optional[float] = None):
    """Points with density proportional to ``shape.profile(|v|)`` on R^n."""
    if r_max is None:
        r_max = 1.0
        while shape.profile(np.array([r_max]))[0] * r_max ** (dim - 1) > 1e-18 and r_max < 1e12:
            r_max *= 2
    r = np.linspace(0.0, r_max, 200001)
    dens = shape.profile(r) * r ** (dim - 1)
    cdf = np.concatenate([[0.0], np.cumsum(0.5 * (dens[1:] + dens[:-1]) * np.diff(r))])
    radii = np.interp(rng.uniform(0, cdf[-1], n), cdf, r)
    d = rng.standard_normal((n, dim)) if dim > 1 else rng.choice([-1.0, 1.0], (n, 1))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    return radii[:, None] * d


def compound_bound_mass(shape: KernelShape, triplet: LevyTriplet, t: float, rho: float, radii,
                        n_samples: int = 400000, seed: int = 0) -> np.ndarray:
    """Mass over balls of the full compound kernel bound with parameters
    ``(rho^n, shape, rho, Lambda_t)``.

    The bound equals ``b1 ||h||_1 e^{lam}`` times the law of ``Zhat_t + V / rho``
    with ``V`` drawn from the normalised profile, so its ball masses are
    that constant times Monte Carlo probabilities (fixed seed).
    """
    dim = triplet.dim
    rng = np.random.default_rng(seed)
    jumps, lam = sample_big_jumps(triplet.measure, t, rho, n_samples, rng)
    v = sample_radial_shape(shape, dim, n_samples, rng) / rho
    dist = np.linalg.norm(jumps + v, axis=1)
    total = shape.constant * shape.profile_l1(dim) * math.exp(lam)
    radii = np.atleast_1d(np.asarray(radii, dtype=float))
    return total * np.array([np.mean(dist <= R) for R in radii])


# ---------------------------------------------------------------------------
# convolution domination for power kernels


@dataclass
class DominationReport:
    dim: int
    b: float
    C: float
    C_refined: float
    argmax: float
    q2_zero_conv: float
    q2_zero_quad: float
    extent: float
    spacings: tuple

    @property
    def relative_change(self) -> float:
        return abs(self.C_refined - self.C) / self.C

    def verdict(self, tol: float = 0.02) -> bool:
        return bool(np.isfinite(self.C) and np.isfinite(self.C_refined) and self.relative_change < tol)


def _q(r, n, b):
    return (1.0 + r) ** (-n - b)


def _self_convolution(n, b, extent, n_points):
    """``q*q`` on a centred grid of half-width ``extent`` (integration over the same box).

    In one dimension the trapezoid sum is corrected for the kinks of the
    integrand at ``w = 0`` and ``w = v``, where the one-sided derivatives
    of ``q`` jump by ``2 (n + b)``.
    """
    g = GridSpec.cube(n, extent, n_points)
    q = _q(g.norms(), n, b)
    shape = [sfft.next_fast_len(2 * k, real=True) for k in g.n_points]
    full = sfft.irfftn(sfft.rfftn(q, shape) ** 2, shape)
    sl = tuple(slice(k // 2, k // 2 + k) for k in g.n_points)
    conv = full[sl] * g.cell_volume
    if n == 1:
        conv = conv - g.spacing[0] ** 2 / 12 * 4 * (n + b) * q
    return g, q, conv


def convolution_domination_check(n: int, b: float, extent: Optional[float] = None,
                                 n_points: Optional[int] = None) -> DominationReport:
    """``C = sup q*q / q`` for ``q(v) = (1 + |v|)^{-n-b}``, on a grid and on its 2x refinement.

    The supremum is taken over ``|v| <= extent / 2`` so every convolution
    value integrates over a box reaching at least ``extent / 2`` beyond
    ``v``; both grids share that truncation.
    """
    if not b > 0:
        raise ValueError("b must be positive")
    if n not in (1, 2):
        raise ValueError("only n = 1, 2 are supported")
    extent = extent or (2000.0 if n == 1 else 50.0)
    n_points = n_points or (2**16 if n == 1 else 1024)
    res = []
    for k in (n_points, 2 * n_points):
        g, q, conv = _self_convolution(n, b, extent, k)
        keep = g.norms() <= extent / 2
        ratio = np.where(keep, conv / q, -np.inf)
        i = np.unravel_index(int(np.argmax(ratio)), ratio.shape)
        res.append((float(ratio[i]), float(g.norms()[i]), float(conv[g.origin_index]), g.spacing[0]))
    if n == 1:
        direct, _ = integrate.quad(lambda w: _q(abs(w), n, b) ** 2, -extent, extent, points=[0.0], limit=400,
                                   epsabs=0, epsrel=1e-12)
    else:
        # q^2 over the box [-L, L]^2: the disc of radius L in polar form plus the corners
        L = extent
        disc, _ = integrate.quad(lambda r: 2 * np.pi * r * _q(r, n, b) ** 2, 0, L, epsabs=0, epsrel=1e-12)
        corner, _ = integrate.dblquad(lambda y, x: _q(math.hypot(x, y), n, b) ** 2, 0, L,
                                      lambda x: 0.0, lambda x: L, epsabs=0, epsrel=1e-10)
        quarter_disc, _ = integrate.quad(lambda r: 0.5 * np.pi * r * _q(r, n, b) ** 2, 0, L,
                                         epsabs=0, epsrel=1e-12)
        direct = disc + 4 * (corner - quarter_disc)
    (c0, a0, z0, h0), (c1, a1, z1, h1) = res
    return DominationReport(n, b, c0, c1, a1, z1, float(direct), extent, (h0, h1))


# ---------------------------------------------------------------------------
# sub-exponential diagnostic


@dataclass
class SubexpReport:
    """Rows ``(t, raw, normalised)`` with ``raw = (1 - G*G(t)) / (1 - G(t))``.

    For a sub-exponential law ``raw -> 2``; ``normalised = raw / 2`` then
    tends to 1.
    """

    rows: list
    limit: float
    consistent: bool
    trend_tol: float


def _two_fold_tail(dist, s, lo):
    """``P(X1 + X2 > s)`` for i.i.d. ``X ~ dist`` supported on ``[lo, inf)``."""
    if s <= 2 * lo:
        return 1.0
    sf = dist.sf
    a, b = lo, s - lo
    # y > s - lo forces X1 + X2 > s; on [lo, s - lo] weigh the density by the other tail
    pts = np.unique(np.concatenate([lo + (s / 2 - lo) * np.geomspace(1e-6, 1, 25), [s / 2],
                                    s - lo - (s / 2 - lo) * np.geomspace(1e-6, 1, 25)]))
    pts = pts[(pts > a) & (pts < b)]
    edges = np.concatenate([[a], pts, [b]])
    inner = 0.0
    for u, v in zip(edges[:-1], edges[1:]):
        val, _ = integrate.quad(lambda y: dist.pdf(y) * sf(s - y), u, v, epsabs=0, epsrel=1e-12, limit=200)
        inner += val
    return float(sf(s - lo)) + inner


def subexp_diagnostic(dist, t_sequence, trend_tol: float = 0.02) -> SubexpReport:
    """Tail ratios of ``G*G`` against ``G`` along increasing ``t``.

    ``dist`` is a frozen continuous ``scipy.stats`` law on ``[lo, inf)``.
    The verdict is positive when the last normalised ratio is within
    ``trend_tol`` of 1 and the distances to 1 shrink along the sequence.
    """
    ts = np.asarray(list(t_sequence), dtype=float)
    if ts.size < 2 or np.any(np.diff(ts) <= 0):
        raise ValueError("t_sequence must be strictly increasing with at least two entries")
    lo = float(dist.support()[0])
    if not np.isfinite(lo):
        raise ValueError("the law must be bounded below")
    tails = dist.sf(ts)
    if np.any(tails <= 0) or np.any(tails > 1):
        raise ValueError("1 - G must lie in (0, 1] along the sequence")
    rows = []
    for t, g in zip(ts, tails):
        raw = _two_fold_tail(dist, t, lo) / g
        rows.append((float(t), float(raw), float(raw / 2)))
    dev = np.abs(np.array([r[2] for r in rows]) - 1)
    consistent = bool(dev[-1] <= trend_tol and np.all(np.diff(dev[-3:]) <= 1e-12))
    return SubexpReport(rows, rows[-1][2], consistent, trend_tol)
