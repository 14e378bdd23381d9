import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, stats

from levykernel.decomposition import (compound_series, decompose, poisson_law, poisson_tail, shift_vector,
                                      truncation_order)
from levykernel.errors import GridCoverage
from levykernel.exponent import ScaleSolver
from levykernel.grid import GridSpec
from levykernel.levy_model import DirectionalStable, IsotropicStable, LevyTriplet, TabulatedAtoms, truncated_intensity
from levykernel.models import preset


@settings(max_examples=40, deadline=None)
@given(st.floats(1e-3, 5.0), st.integers(0, 30))
def test_poisson_tail_direct_sum(lam, M):
    direct = math.fsum(lam**m / math.factorial(m) for m in range(M + 1, M + 120))
    assert poisson_tail(lam, M) == pytest.approx(direct, rel=1e-9, abs=1e-300)


@settings(max_examples=40, deadline=None)
@given(st.floats(1e-3, 4.0), st.sampled_from([1e-4, 1e-8, 1e-12]))
def test_truncation_order_is_minimal(lam, eps):
    M = truncation_order(lam, eps)
    assert poisson_tail(lam, M) < eps
    if M > 0:
        assert poisson_tail(lam, M - 1) >= eps


def test_truncation_order_validation():
    with pytest.raises(ValueError):
        truncation_order(-1.0)
    assert truncation_order(0.0) == 0


def test_atom_series_is_poisson():
    # unit atoms at +1 with intensity t: the truncated law puts pmf(m) at x = m
    t = 0.8
    tr = LevyTriplet(TabulatedAtoms(((1.0,),), (1.0,)))
    g = GridSpec.cube(1, 16.0, 64)  # spacing 0.5, so every integer is a node
    dec = decompose(tr, t, 2.0, g, sharpen=False)
    assert dec.lambda_mass == pytest.approx(t)
    series = compound_series(dec.lam, 1e-12)
    law = poisson_law(series)
    x = g.axes()[0]
    for m in range(series.M + 1):
        assert law.masses[np.argmin(np.abs(x - m))] == pytest.approx(stats.poisson.pmf(m, t), rel=1e-9)
    assert law.total_mass == pytest.approx(1 - series.deficit)
    assert series.deficit < 1e-12 and series.coverage_loss < 1e-15


def test_series_terms_have_power_mass():
    tr = preset("stable-1d").triplet
    t = 0.01
    rho = ScaleSolver(tr.measure).rho(t)
    g = GridSpec.cube(1, 2000 / rho, 4096)
    dec = decompose(tr, t, rho, g)
    series = compound_series(dec.lam)
    for m, term in enumerate(series.terms):
        assert term.total_mass == pytest.approx(dec.lambda_mass**m)
        assert term.grid_mass <= term.total_mass * (1 + 1e-9)


@pytest.mark.parametrize("name", ["stable-1d", "stable-2d", "discretized-stable-2d"])
def test_symmetric_shift_is_zero(name):
    tr = preset(name).triplet
    assert not np.any(shift_vector(tr, 0.01, 50.0))


def test_one_sided_shift_matches_quadrature():
    m = DirectionalStable(0.8, 1.0, ((1.0,),))
    tr = LevyTriplet(m, (0.3,))
    t, rho = 0.05, 20.0
    want = t * 0.3 + t * integrate.quad(lambda r: r * float(m.nu(r)), 1 / rho, 1.0)[0]
    assert shift_vector(tr, t, rho)[0] == pytest.approx(want, rel=1e-9)
    # rho <= 1: the annulus is empty
    assert shift_vector(tr, t, 0.5)[0] == pytest.approx(t * 0.3)


@pytest.mark.parametrize("alpha", [0.7, 1.5])
def test_big_jump_mass_is_scale_free(alpha):
    # with t rho^alpha = 1, t mu{|u| > 1/rho} does not depend on t
    m = IsotropicStable.normalized(alpha, 1)
    s = ScaleSolver(m)
    vals = [t * m.tail_mass(1 / s.rho(t)) for t in (1e-4, 1e-2, 1.0)]
    assert np.allclose(vals, vals[0], rtol=1e-8)
    assert vals[0] <= 2


def test_support_and_coverage():
    tr = preset("stable-2d").triplet
    t = 0.01
    rho = ScaleSolver(tr.measure).rho(t)
    dec = decompose(tr, t, rho, GridSpec.cube(2, 40 / rho, 128))
    assert dec.support_ok
    assert dec.inner_radius >= 1 / rho - math.sqrt(2) * max(dec.lam.grid.spacing)
    with pytest.raises(GridCoverage) as exc:
        truncated_intensity(tr, t, rho, GridSpec.cube(2, 1.5 / rho, 32), eps_grid=0.01)
    assert exc.value.required_extent > 1.5 / rho


def test_coverage_loss_flagged():
    tr = LevyTriplet(TabulatedAtoms(((3.0,),), (1.0,)))
    g = GridSpec.cube(1, 8.0, 32)
    dec = decompose(tr, 3.0, 2.0, g, sharpen=False)
    with pytest.raises(GridCoverage):
        compound_series(dec.lam, 1e-10, max_coverage_loss=1e-6)
