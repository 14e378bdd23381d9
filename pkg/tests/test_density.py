import math

import numpy as np
import pytest
from scipy import stats

from levykernel.decomposition import compound_series, decompose, poisson_law
from levykernel.density import (DensityGrid, argmax_lex, auto_grid, density_convolution, density_derivative,
                                density_fourier, recentre)
from levykernel.errors import InsufficientDecay, ModelRejected
from levykernel.exponent import ScaleSolver
from levykernel.grid import GridSpec
from levykernel.levy_model import IsotropicStable, LevyTriplet, TabulatedAtoms
from levykernel.models import preset

CAUCHY = LevyTriplet(IsotropicStable(1.0, 1 / math.pi, 1))


def cauchy(x, t):
    return t / (math.pi * (t * t + x * x))


def test_cauchy_1d():
    g = GridSpec.cube(1, 20.0, 1024)
    d = density_fourier(CAUCHY, 0.5, g)
    x = g.axes()[0]
    assert np.allclose(d.values, cauchy(x, 0.5), rtol=1e-7, atol=1e-12)
    assert d.value_at_origin() == pytest.approx(1 / (0.5 * math.pi), rel=1e-9)


def test_drift_translates_by_minus_t_a():
    # psi contains i a.xi and E e^{i xi Z_t} = e^{-t psi}, so Z_t = -t a + (jump part)
    tr = LevyTriplet(CAUCHY.measure, (2.0,))
    g = GridSpec.cube(1, 20.0, 1024)
    x = g.axes()[0]
    d = density_fourier(tr, 0.5, g)
    assert np.allclose(d.values, cauchy(x + 1.0, 0.5), rtol=1e-7, atol=1e-12)


def test_shift_argument():
    g = GridSpec.cube(1, 20.0, 1024)
    x = g.axes()[0]
    d = density_fourier(CAUCHY, 0.5, g, shift=[0.3])
    assert np.allclose(d.values, cauchy(x - 0.3, 0.5), rtol=1e-7, atol=1e-12)
    # recentre is a periodic phase shift, so compare away from the wrap-around
    r = recentre(density_fourier(CAUCHY, 0.5, g), [0.3])
    mid = np.abs(x) < 10
    assert np.allclose(r.values[mid], d.values[mid], rtol=1e-4)
    assert r.shift == (0.3,)


def test_cauchy_derivative():
    g = GridSpec.cube(1, 20.0, 1024)
    x = g.axes()[0]
    t = 0.5
    d = density_derivative(CAUCHY, t, g, "full", (1,))
    want = -2 * t * x / (math.pi * (t * t + x * x) ** 2)
    assert np.abs(d.values - want).max() < 1e-7 * np.abs(want).max()
    assert d.is_derivative


@pytest.mark.parametrize("alpha", [0.7, 1.5])
def test_stable_against_scipy(alpha):
    t = 0.1
    tr = LevyTriplet(IsotropicStable.with_unit_exponent(alpha, 1))
    g = GridSpec.cube(1, 10.0, 512)
    d = density_fourier(tr, t, g)
    x = g.axes()[0][[256, 262, 281, 333]]
    want = stats.levy_stable.pdf(x, alpha, 0.0, scale=t ** (1 / alpha))
    got = np.array([d.at(v) for v in x])
    assert np.allclose(got, want, rtol=1e-5)


def test_cauchy_2d_small_grid():
    tr = preset("stable-2d-cauchy").triplet
    g = GridSpec.cube(2, 8.0, 128)
    t = 0.5
    d = density_fourier(tr, t, g)
    want = t / (2 * math.pi) * (t * t + g.norms() ** 2) ** -1.5
    assert np.abs(d.values - want).max() < 1e-6 * want.max()


def test_fft_and_quad_agree():
    tr = preset("stable-1d").triplet
    g = GridSpec.cube(1, 20.0, 1024)
    a = density_fourier(tr, 0.1, g, method="quad")
    b = density_fourier(tr, 0.1, g, method="fft", period=4 * 40.0)
    assert np.abs(a.values - b.values).max() < 1e-6 * a.peak


@pytest.mark.parametrize("name", ["stable-1d", "one-sided-stable-1d"])
def test_unit_mass_and_positivity(name):
    tr = preset(name).triplet
    t = 0.1
    rho = ScaleSolver(tr.measure).rho(t)
    g = auto_grid(tr, t, rho, 4096, extent_factor=400)
    d = density_fourier(tr, t, g)
    # the part beyond the grid is about t mu{|u| > R} for heavy tails
    outside = t * tr.measure.tail_mass(g.extent[0])
    assert d.riemann_mass() + outside == pytest.approx(1.0, abs=5e-4)
    assert d.values.min() > -1e-6 * d.peak


def test_bar_is_narrower_than_full_and_convolution_route():
    tr = preset("stable-1d").triplet
    t = 0.01
    rho = ScaleSolver(tr.measure).rho(t)
    g = auto_grid(tr, t, rho, 2048)
    big = g.enlarged(2)
    bar = density_fourier(tr, t, big, "bar", rho=rho, period=4 * big.extent[0])
    assert bar.kind == "bar"
    dec = decompose(tr, t, rho, big)
    conv = density_convolution(bar, poisson_law(compound_series(dec.lam)), dec.a_t)
    full = density_fourier(tr, t, big)
    assert np.abs(conv.values - full.values).max() < 1e-3 * full.peak
    with pytest.raises(ValueError):
        density_convolution(full, poisson_law(compound_series(dec.lam)), dec.a_t)


def test_cache_round_trip(tmp_path):
    g = GridSpec(2, (3.0, 5.0), (16, 32))
    vals = np.random.default_rng(0).random((16, 32))
    d = DensityGrid(g, vals, 0.25, "bar", (1, 0), (0.5, -0.25))
    blob = d.to_bytes()
    assert blob[:4] == b"LKDG"
    e = DensityGrid.from_bytes(blob)
    assert e.grid == g and e.kind == "bar" and e.orders == (1, 0) and e.shift == (0.5, -0.25)
    assert np.array_equal(e.values, vals) and e.t == 0.25
    d.save(tmp_path / "a.lkdg")
    assert DensityGrid.load(tmp_path / "a.lkdg").to_bytes() == blob
    with pytest.raises(ValueError):
        DensityGrid.from_bytes(b"XXXX" + blob[4:])


def test_finite_measure_rejected():
    atoms = LevyTriplet(TabulatedAtoms(((1.0,), (-1.0,)), (0.5, 0.5)))
    with pytest.raises(ModelRejected):
        density_fourier(atoms, 0.1, GridSpec.cube(1, 5.0, 64))


def test_insufficient_decay():
    with pytest.raises(InsufficientDecay) as exc:
        density_fourier(CAUCHY, 0.5, GridSpec.cube(1, 5.0, 64), freq_cutoff=5.0)
    assert exc.value.boundary_magnitude == pytest.approx(math.exp(-2.5), rel=1e-6)


def test_argument_checks():
    g = GridSpec.cube(1, 5.0, 64)
    with pytest.raises(ValueError):
        density_fourier(CAUCHY, 0.5, g, which="half")
    with pytest.raises(ValueError):
        density_fourier(CAUCHY, 0.5, GridSpec.cube(2, 5.0, 16))
    with pytest.raises(ValueError):
        density_fourier(CAUCHY, 0.5, g, period=1.0)
    with pytest.raises(ValueError):
        density_derivative(CAUCHY, 0.5, g, "full", (-1,))


def test_argmax_lex_ties():
    g = GridSpec.cube(1, 2.0, 8)
    v = np.zeros(8)
    v[[3, 5]] = 1.0
    assert argmax_lex(DensityGrid(g, v, 1.0))[0] == g.axes()[0][3]
