"""Small-jump / big-jump split of a Levy process at the scale ``rho_t``.

    Z_t = Zbar_t + Zhat_t - a_t

``Zbar_t`` keeps the jumps with ``|u| <= 1/rho_t`` (compensated),
``Zhat_t`` is compound Poisson with intensity ``Lambda_t = t mu 1{|u| > 1/rho_t}``
and ``a_t = t (a + int_{1/rho_t < |u| < 1} u mu(du))``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import stats

from .errors import GridCoverage
from .grid import FiniteMeasure, GridSpec, LinearConvolver, cic_sharpen
from .levy_model import LevyTriplet, _as_xi, truncated_intensity

DEFAULT_EPS_TAIL = 1e-10


def shift_vector(triplet: LevyTriplet, t: float, rho: float,
                 include_boundary: bool = False) -> np.ndarray:
    """The centring vector ``a_t``.

    For ``rho <= 1`` the annulus ``1/rho < |u| < 1`` is empty and
    ``a_t = t a``. ``include_boundary`` decides whether atoms lying exactly
    on ``|u| = 1/rho`` or ``|u| = 1`` count as inside the annulus.
    """
    a = t * triplet.a
    if rho <= 1.0:
        return a
    return a + t * np.asarray(triplet.measure.first_moment(1.0 / rho, 1.0, include_boundary))


def psi_t(triplet: LevyTriplet, t: float, rho: float, xi) -> np.ndarray:
    """``t int_{rho |u| <= 1} (1 - e^{i xi.u} + i xi.u) mu(du)`` (complex)."""
    return t * triplet.measure.psi_small(_as_xi(xi, triplet.dim), 1.0 / rho)


def psi_t_imag(triplet: LevyTriplet, t: float, rho: float, eta) -> np.ndarray:
    """``psi_t`` at the purely imaginary frequency ``i eta``, which is real:

        t int_{rho |u| <= 1} (1 - e^{-eta.u} - eta.u) mu(du).
    """
    return t * np.asarray(triplet.measure.psi_small_imag(_as_xi(eta, triplet.dim), 1.0 / rho))


@dataclass(frozen=True)
class DecompositionAt:
    t: float
    rho: float
    a_t: np.ndarray
    lam: FiniteMeasure = field(repr=False)
    lambda_mass: float
    inner_radius: float = math.inf

    @property
    def support_ok(self) -> bool:
        """The deposited masses sit at ``|u| > 1/rho`` up to one cell of CIC spreading.

        ``inner_radius`` is measured before sharpening, whose ringing is not
        part of the support.
        """
        return self.inner_radius > 1.0 / self.rho - math.sqrt(self.lam.grid.dim) * max(self.lam.grid.spacing)


def decompose(triplet: LevyTriplet, t: float, rho: float, grid: GridSpec,
              eps_grid: float = 0.2, include_boundary: bool = False,
              sharpen: bool = True) -> DecompositionAt:
    """``a_t`` and the big-jump intensity on ``grid`` (see :func:`cic_sharpen`)."""
    lam = truncated_intensity(triplet, t, rho, grid, eps_grid)
    nz = lam.masses > 0
    inner = float(grid.norms()[nz].min()) if nz.any() else math.inf
    if sharpen and lam.total_mass > 0:
        lam = cic_sharpen(lam)
    return DecompositionAt(t, rho, shift_vector(triplet, t, rho, include_boundary), lam,
                           lam.total_mass, inner)


def poisson_tail(lam: float, M: int) -> float:
    """``sum_{m > M} lam^m / m!``."""
    if lam == 0:
        return 0.0
    return float(stats.poisson.sf(M, lam) * math.exp(lam))


def truncation_order(lam: float, eps_tail: float = DEFAULT_EPS_TAIL, max_order: int = 1000) -> int:
    """Smallest ``M`` with ``sum_{m > M} lam^m / m! < eps_tail``."""
    if lam < 0 or eps_tail <= 0:
        raise ValueError("need lam >= 0 and eps_tail > 0")
    M = 0
    while poisson_tail(lam, M) >= eps_tail:
        M += 1
        if M > max_order:
            raise ValueError(f"no truncation order below {max_order} for lam={lam}")
    return M


@dataclass(frozen=True)
class CompoundSeries:
    """Convolution powers ``Lambda^{*m}``, ``m = 0..M``, on a common grid.

    ``lambda_mass`` is the exact mass of ``Lambda`` (including any part off
    the grid); ``terms[m].total_mass = lambda_mass^m`` while
    ``terms[m].masses`` hold what lands on the grid.
    """

    terms: list = field(repr=False)
    M: int
    lambda_mass: float
    tail_bound: float

    @property
    def weights(self) -> np.ndarray:
        return np.array([1.0 / math.factorial(m) for m in range(self.M + 1)])

    @property
    def grid(self) -> GridSpec:
        return self.terms[0].grid

    @property
    def deficit(self) -> float:
        """``1 - e^{-lam} sum_{m <= M} lam^m / m!``: probability mass dropped by truncation."""
        return float(stats.poisson.sf(self.M, self.lambda_mass)) if self.lambda_mass > 0 else 0.0

    @property
    def coverage_loss(self) -> float:
        """Probability mass of the truncated law that falls outside the grid."""
        lam = self.lambda_mass
        lost = sum((t.total_mass - t.grid_mass) / math.factorial(m) for m, t in enumerate(self.terms))
        return math.exp(-lam) * lost

    def weighted_sum(self, upto: Optional[int] = None) -> np.ndarray:
        """``sum_{m <= upto} Lambda^{*m} / m!`` as node masses."""
        upto = self.M if upto is None else upto
        out = np.zeros(self.grid.shape)
        for m in range(upto + 1):
            out += self.terms[m].masses / math.factorial(m)
        return out


def compound_series(lam: FiniteMeasure, eps_tail: float = DEFAULT_EPS_TAIL,
                    max_coverage_loss: Optional[float] = None) -> CompoundSeries:
    """Iterated grid convolutions of ``lam`` up to the order fixed by ``eps_tail``.

    Each product is rescaled so its on-grid mass equals the product of the
    factors' on-grid masses before cropping, so FFT rounding does not
    accumulate over ``m``; mass carried beyond the grid by the convolution is
    lost and shows up in :attr:`CompoundSeries.coverage_loss`. When
    ``max_coverage_loss`` is given and exceeded, :class:`GridCoverage` is
    raised with the extent the grid would need.
    """
    grid = lam.grid
    lmass = lam.total_mass
    M = truncation_order(lmass, eps_tail) if lmass > 0 else 0
    terms = [FiniteMeasure.delta(grid, 1.0)]
    if M > 0:
        conv = LinearConvolver(lam.masses, grid)
        cur = terms[0]
        for m in range(1, M + 1):
            masses = conv(cur.masses)
            cur = FiniteMeasure(grid, masses, lmass**m)
            terms.append(cur)
    series = CompoundSeries(terms, M, lmass, poisson_tail(lmass, M))
    if max_coverage_loss is not None and series.coverage_loss > max_coverage_loss:
        raise GridCoverage(
            f"compound series loses {series.coverage_loss:.3g} of its mass off the grid",
            required_extent=M * max(lam.support_radius(), max(grid.spacing)))
    return series


def poisson_law(series: CompoundSeries) -> FiniteMeasure:
    """``P = e^{-lam} sum_{m <= M} Lambda^{*m} / m!`` on the series grid.

    ``total_mass`` is the truncated probability ``1 - series.deficit``.
    """
    lmass = series.lambda_mass
    masses = math.exp(-lmass) * series.weighted_sum()
    total = 1.0 - series.deficit
    return FiniteMeasure(series.grid, masses, total)
