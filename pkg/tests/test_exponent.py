import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, special

from levykernel.errors import ModelRejected, ScaleUnreachable
from levykernel.exponent import (ScaleSolver, SphereGrid, check_condition_A, check_sandwich, growth_floor, psi,
                                 psi_L, psi_star, psi_U, psi_value, rho, u_from_l_identity)
from levykernel.levy_model import DirectionalStable, DiscretizedStable, IsotropicStable, LevyTriplet, TabulatedAtoms
from levykernel.models import preset


def _radial_1d(k, xi, c, alpha):
    # 2c int_0^inf k(xi u) u^{-1-alpha} du by adaptive quadrature
    f = lambda u: k(xi * u) * u ** (-1 - alpha)
    edge = 1.0 / xi
    return 2 * c * (integrate.quad(f, 0, edge, limit=200)[0] + integrate.quad(f, edge, np.inf, limit=200)[0])


@pytest.mark.parametrize("alpha", [0.5, 1.2, 1.8])
@pytest.mark.parametrize("xi", [0.3, 4.0])
def test_psi_U_and_L_by_quadrature(alpha, xi):
    m = IsotropicStable(alpha, 0.7, 1)
    u = _radial_1d(lambda s: min(s * s, 1.0), xi, 0.7, alpha)
    l = _radial_1d(lambda s: s * s if s <= 1 else 0.0, xi, 0.7, alpha)
    assert float(psi_U(m, [xi])) == pytest.approx(u, rel=1e-8)
    assert float(psi_L(m, [xi])) == pytest.approx(l, rel=1e-8)


def test_discretized_psi_direct_sum():
    m = DiscretizedStable(1.0, 1.0, 2)
    xi = np.array([7.0, -2.0])
    s = np.linalg.norm(xi) * m.radii
    # 1 - J0 by its series where the subtraction would cancel
    c = np.where(s < 1e-3, s**2 / 4 - s**4 / 64, 1 - special.j0(s))
    direct = np.sum(m.masses * c)
    assert psi_value(LevyTriplet(m), xi).re == pytest.approx(direct, rel=1e-9)


def test_drift_enters_imaginary_part():
    tr = LevyTriplet(IsotropicStable(1.0, 1 / math.pi, 1), (0.5,))
    v = psi_value(tr, 2.0)
    assert v.re == pytest.approx(2.0, rel=1e-8)
    assert v.im == pytest.approx(1.0, rel=1e-12)


@pytest.mark.parametrize("name", ["stable-1d", "stable-2d", "discretized-stable-2d", "one-sided-stable-1d"])
def test_sandwich_holds(name):
    tr = preset(name).triplet
    rep = check_sandwich(tr, np.geomspace(1e-2, 1e4, 25))
    assert rep.passed, rep


@settings(max_examples=25, deadline=None)
@given(st.floats(0.1, 1.9), st.floats(1e-2, 1e4))
def test_L_below_U_property(alpha, r):
    m = IsotropicStable(alpha, 1.0, 1)
    assert float(psi_L(m, [r])) <= float(psi_U(m, [r])) * (1 + 1e-12)


@settings(max_examples=25, deadline=None)
@given(st.floats(1e-3, 1e3), st.floats(1.0, 100.0))
def test_psi_star_nondecreasing(r, k):
    m = preset("discretized-stable-2d").triplet.measure
    assert psi_star(m, r * k) >= psi_star(m, r) * (1 - 1e-12)


def test_condition_A_verdicts():
    ok = check_condition_A(preset("stable-2d").triplet.measure)
    assert ok.passed and ok.beta_hat >= 1
    # isotropic stable: psi_U / psi_L is the ratio of the stable constants
    a = 1.5
    assert ok.beta_hat == pytest.approx(2 / a, rel=1e-6)
    bad = check_condition_A(preset("axis-degenerate-2d").triplet.measure)
    assert not bad.passed
    assert abs(bad.witness_direction[0]) < 1e-12
    assert "fails" in bad.summary()


def test_growth_floor():
    m = IsotropicStable.normalized(1.5, 1)
    rep = check_condition_A(m)
    c = growth_floor(m, rep.beta_hat, np.geomspace(1, 1e3, 30)[:, None], rep)
    # psi_U(r) = r^1.5 and 2/beta = 1.5
    assert c == pytest.approx(1.0, rel=1e-6)
    bad = check_condition_A(preset("axis-degenerate-2d").triplet.measure)
    with pytest.raises(ModelRejected):
        growth_floor(m, 1.0, [[1.0]], bad)


@pytest.mark.parametrize("m", [IsotropicStable(1.3, 0.5, 1), DiscretizedStable(1.0, 1.0, 2)])
def test_U_from_L_identity(m):
    xi1 = np.zeros(m.dim)
    xi2 = np.zeros(m.dim)
    xi1[0], xi2[0] = 0.5, 40.0
    direct, integral = u_from_l_identity(m, xi1, xi2)
    assert integral == pytest.approx(direct, rel=1e-7)


def test_u_from_l_rejects_non_parallel():
    with pytest.raises(ValueError):
        u_from_l_identity(IsotropicStable(1.0, 1.0, 2), [1.0, 0.0], [0.0, 2.0])


@pytest.mark.parametrize("alpha", [0.7, 1.0, 1.5])
def test_rho_closed_form(alpha):
    s = ScaleSolver(IsotropicStable.normalized(alpha, 1))
    for t in (1e-4, 1e-2, 0.5):
        assert s.rho(t) == pytest.approx(t ** (-1 / alpha), rel=1e-9)
    assert set(s.table()) == {1e-4, 1e-2, 0.5}


@settings(max_examples=20, deadline=None)
@given(st.floats(1e-5, 1.0), st.floats(1.01, 10.0))
def test_rho_decreasing_in_t(t, k):
    s = ScaleSolver(preset("discretized-stable-2d").triplet.measure)
    assert s.rho(t * k) < s.rho(t)
    assert t * s.psi_star(s.rho(t)) == pytest.approx(1.0, abs=1e-9)


def test_rho_checks_measure_and_time():
    s = ScaleSolver(IsotropicStable(1.0, 1.0))
    with pytest.raises(ValueError):
        rho(s, IsotropicStable(1.5, 1.0), 0.1)
    with pytest.raises(ValueError):
        s.rho(0.0)


def test_finite_measure_scale_unreachable():
    # psi* of a finite measure is bounded by 2 mu(R^n)
    s = ScaleSolver(TabulatedAtoms(((1.0,), (-1.0,)), (0.5, 0.5)))
    with pytest.raises(ScaleUnreachable):
        s.rho(0.01)


def test_sphere_grid_validation():
    assert len(SphereGrid.default(3)) == 1024
    with pytest.raises(ValueError):
        SphereGrid(np.array([[2.0, 0.0]]))


def test_psi_vectorised_shape():
    tr = preset("stable-2d").triplet
    out = psi(tr, np.ones((4, 3, 2)))
    assert out.shape == (4, 3)
