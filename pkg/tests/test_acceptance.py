"""Acceptance criteria, one test each; every test logs a PASS/FAIL line.

Run ``pytest tests/test_acceptance.py -v`` (the lines are repeated in the
terminal summary) or ``python3 tests/test_acceptance.py``.
"""

import math
import time

import numpy as np
import pytest
from scipy import stats

from _support import SWEEP_T, base_points, condition_a_presets, record, sweep, symmetric_presets
from levykernel.bounds import (ExpDecay, TailFunction, bell_power_bound, bell_subexp_bound,
                               compound_bound_mass, convolution_domination_check, fit_lower, fit_upper,
                               subexp_bound_mass, subexp_diagnostic)
from levykernel.decomposition import compound_series, decompose, poisson_law
from levykernel.density import auto_grid, density_convolution, density_fourier
from levykernel.errors import ModelRejected
from levykernel.exponent import ScaleSolver, SphereGrid, check_condition_A, check_sandwich
from levykernel.grid import GridSpec
from levykernel.levy_model import LevyTriplet, TabulatedAtoms
from levykernel.models import preset


def _masked_rel_error(values, exact, floor=1e-6):
    m = exact > floor * exact.max()
    return float(np.max(np.abs(values[m] / exact[m] - 1)))


def test_criterion_01_cauchy_1d():
    tr = preset("stable-1d-cauchy").triplet
    worst, slowest = 0.0, 0.0
    for t in (0.01, 0.1, 1.0):
        grid = GridSpec.cube(1, 200 * t, 4096)
        t0 = time.perf_counter()
        d = density_fourier(tr, t, grid)
        slowest = max(slowest, time.perf_counter() - t0)
        x = grid.axes()[0]
        worst = max(worst, _masked_rel_error(d.values, t / (math.pi * (t * t + x * x))))
    ok = worst <= 1e-5 and slowest <= 10.0
    record(1, ok, f"1-d Cauchy max rel err {worst:.2e} (tol 1e-5), slowest {slowest:.2f}s")
    assert ok


def test_criterion_02_cauchy_2d():
    tr = preset("stable-2d-cauchy").triplet
    worst, slowest = 0.0, 0.0
    for t in (0.01, 0.1, 1.0):
        grid = GridSpec.cube(2, 20 * t, 1024)
        t0 = time.perf_counter()
        d = density_fourier(tr, t, grid)
        slowest = max(slowest, time.perf_counter() - t0)
        r2 = grid.norms() ** 2
        worst = max(worst, _masked_rel_error(d.values, t / (2 * math.pi) * (t * t + r2) ** -1.5))
    ok = worst <= 1e-4 and slowest <= 60.0
    record(2, ok, f"2-d Cauchy at 1024^2 max rel err {worst:.2e} (tol 1e-4), slowest {slowest:.1f}s")
    assert ok


def test_criterion_03_scale_law():
    ts = np.geomspace(1e-4, 1e-1, 13)
    out = []
    for name, alpha in (("stable-1d-alpha0.7", 0.7), ("stable-1d-alpha1.0", 1.0), ("stable-1d", 1.5)):
        s = ScaleSolver(preset(name).triplet.measure)
        slope = np.polyfit(np.log(ts), np.log([s.rho(t) for t in ts]), 1)[0]
        out.append((alpha, slope, abs(slope + 1 / alpha)))
    ok = all(d <= 0.01 for _, _, d in out)
    record(3, ok, "slopes " + ", ".join(f"a={a}: {s:.6f} (want {-1 / a:.6f})" for a, s, _ in out))
    assert ok


def test_criterion_04_sandwich_and_mass():
    ts = np.geomspace(1e-4, 1e-1, 10)
    msgs, ok = [], True
    for name in condition_a_presets():
        p = preset(name)
        n = p.dim
        sphere = SphereGrid.default(n)
        n_r = int(math.ceil(5000 / len(sphere)))
        rep = check_sandwich(p.triplet, np.geomspace(1e-2, 1e4, n_r), sphere)
        solver = ScaleSolver(p.triplet.measure)
        lam = max(t * p.triplet.measure.tail_mass(1 / solver.rho(t)) for t in ts)
        good = rep.passed and rep.n_points >= 5000 and lam <= n + 1
        ok &= good
        msgs.append(f"{name}: {rep.n_points} pts, {rep.n_violations} viol, max Lambda {lam:.3f} <= {n + 1}")
    record(4, ok, "; ".join(msgs))
    assert ok


def _route_error(name, n_points, t):
    tr = preset(name).triplet
    rho = ScaleSolver(tr.measure).rho(t)
    g = auto_grid(tr, t, rho, n_points)
    big = g.enlarged(2)
    full = density_fourier(tr, t, g)
    dec = decompose(tr, t, rho, big)
    plaw = poisson_law(compound_series(dec.lam))
    bar = density_fourier(tr, t, big, "bar", rho=rho, period=4 * big.extent[0])
    conv = density_convolution(bar, plaw, dec.a_t)
    sl = tuple(slice(k // 2 - m // 2, k // 2 - m // 2 + m) for k, m in zip(big.n_points, g.n_points))
    return float(np.abs(conv.values[sl] - full.values).max() / full.peak)


def test_criterion_05_route_equivalence():
    errs = {}
    for name, n_points in (("stable-1d", 4096), ("discretized-stable-2d", 512)):
        errs[name] = max(_route_error(name, n_points, t) for t in SWEEP_T)
    ok = all(e <= 1e-4 for e in errs.values())
    record(5, ok, ", ".join(f"{k}: sup err / peak {v:.2e}" for k, v in errs.items()) + " (tol 1e-4)")
    assert ok


def test_criterion_06_upper_fit():
    msgs, ok = [], True
    for name in condition_a_presets():
        r1 = fit_upper(sweep(name, 1, True), "exp")
        r2 = fit_upper(sweep(name, 2), "exp")
        move = max(abs(r2.constants[k] / r1.constants[k] - 1) for k in ("b1", "b2"))
        good = r1.verdict and r2.verdict and move < 0.05
        extra = ""
        if name in symmetric_presets():
            r3 = fit_upper(sweep(name, 1, True), "explog")
            good &= r3.verdict
            extra = f", explog {'ok' if r3.verdict else 'FAIL'}"
        ok &= good
        msgs.append(f"{name}: b1={r1.constants['b1']:.4g} b2={r1.constants['b2']:.4g} refit move {move:.2%}{extra}")
    record(6, ok, "; ".join(msgs))
    assert ok


def test_criterion_07_lower_fit():
    msgs, ok = [], True
    for name in condition_a_presets():
        sw = sweep(name, 1, True)
        rep = fit_lower(sw)
        good = rep.verdict and all(r["worst_ratio"] >= 1 - 1e-12 for r in rep.rows)
        if name in symmetric_presets():
            good &= all(not np.any(p.x_t) for p in sw.points)
        ok &= good
        msgs.append(f"{name}: b3={rep.constants['b3']:.4g} b4={rep.constants['b4']:.4g}")
    record(7, ok, "; ".join(msgs) + "; x_t = 0 for symmetric presets")
    assert ok


def test_criterion_08_power_bell():
    msgs, ok = [], True
    for name, alpha in (("stable-1d", 1.5), ("stable-2d", 1.5)):
        rep = bell_power_bound(sweep(name, 1, True), alpha)
        spread = rep.extra["spread"]
        ok &= rep.verdict and spread <= 50
        msgs.append(f"{name}: c1={rep.constants['c1']:.4g} c2={rep.constants['c2']:.4g} c1/c2={spread:.3g}")
    record(8, ok, "; ".join(msgs) + " (need c1/c2 <= 50)")
    assert ok


def test_criterion_09_integrability_contrast():
    name = "discretized-stable-2d"
    sw = sweep(name, 1, True)
    tr = preset(name).triplet
    bell = bell_subexp_bound(sw, TailFunction(1.0, alpha=1.0))
    up = fit_upper(sw, "exp")
    shape = ExpDecay(up.constants["b1"], up.constants["b2"])
    bell_growth, comp_growth = [], []
    for p in sw.points:
        radii = np.array([10.0, 1000.0]) / p.rho
        mb = subexp_bound_mass(bell, p.rho, radii, 2)
        mc = compound_bound_mass(shape, tr, p.t, p.rho, radii)
        bell_growth.append(mb[1] / mb[0])
        comp_growth.append(mc[1] / mc[0] - 1)
    ok_bell = min(bell_growth) > 10
    ok_comp = max(comp_growth) < 0.01
    record(9, ok_bell and ok_comp,
           f"bell mass growth x{min(bell_growth):.1f} (need > 10: {'ok' if ok_bell else 'FAIL'}); "
           f"compound mass increase {max(comp_growth):.2%} (need < 1%: {'ok' if ok_comp else 'FAIL'})")
    assert ok_bell
    assert ok_comp


def test_criterion_10_convolution_domination():
    msgs, ok = [], True
    for n, b in ((1, 1.0), (2, 1.0), (1, 0.5)):
        rep = convolution_domination_check(n, b)
        good = rep.verdict(0.02)
        ok &= good
        msgs.append(f"(n={n}, b={b}): C={rep.C:.6g} refined {rep.C_refined:.6g} change {rep.relative_change:.1e}")
    record(10, ok, "; ".join(msgs) + " (tol 2%)")
    assert ok


def test_criterion_11_subexponential():
    par = subexp_diagnostic(stats.pareto(1.5), [10.0, 100.0, 1e3, 1e4, 1e5])
    exp = subexp_diagnostic(stats.expon(), [1.0, 5.0, 10.0, 20.0, 40.0])
    ok = abs(par.limit - 1) <= 0.02 and par.consistent and exp.limit > 10 and not exp.consistent
    record(11, ok, f"Pareto normalised ratio {par.limit:.5f} at t=1e5; exponential {exp.limit:.2f} at t=40, "
                   f"verdict {'consistent' if exp.consistent else 'negative'}")
    assert ok


def test_criterion_12_negative_gates():
    rep = check_condition_A(preset("axis-degenerate-2d").triplet.measure)
    atoms = LevyTriplet(TabulatedAtoms(((1.0,), (-1.0,)), (0.5, 0.5)))
    rejected = False
    try:
        density_fourier(atoms, 0.1, GridSpec.cube(1, 5.0, 64))
    except ModelRejected:
        rejected = True
    ok = (not rep.passed) and rep.witness_direction is not None and rejected
    record(12, ok, f"axis-degenerate-2d: {rep.summary()}; TabulatedAtoms density "
                   f"{'rejected' if rejected else 'ACCEPTED'}")
    assert ok


if __name__ == "__main__":
    for name, fn in sorted(globals().items()):
        if name.startswith("test_criterion_"):
            try:
                fn()
            except AssertionError:
                pass
