"""Closed-form angular kernels against direct averages over the sphere."""

import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, special

from levykernel import _kernels as K


def _sphere_average(g, n, cut=None):
    # E g(l_1) for l uniform on S^{n-1}; ``cut`` is a jump location in l_1
    if n == 1:
        return 0.5 * (g(1.0) + g(-1.0))
    pts = [c for c in (cut, -cut) if c is not None and -1 < c < 1] if cut else []
    if n == 2:
        th = sorted(math.acos(c) for c in pts)
        return integrate.quad(lambda a: g(math.cos(a)), 0, math.pi, points=th or None, limit=200)[0] / math.pi
    return 0.5 * integrate.quad(g, -1, 1, points=pts or None, limit=200)[0]


DEFS = {
    "U": lambda s: (lambda c: min((s * c) ** 2, 1.0)),
    "L": lambda s: (lambda c: (s * c) ** 2 if abs(s * c) <= 1 else 0.0),
    "C": lambda s: (lambda c: 1 - math.cos(s * c)),
    "H": lambda s: (lambda c: math.cosh(s * c) - 1),
}


@pytest.mark.parametrize("kernel", list(DEFS))
@pytest.mark.parametrize("n", [1, 2, 3])
@pytest.mark.parametrize("s", [1e-3, 0.05, 0.5, 1.0, 1.7, 8.0, 150.0])
def test_kernel_matches_sphere_average(kernel, n, s):
    want = _sphere_average(DEFS[kernel](s), n, cut=1 / s)
    got = float(K.KERNELS[kernel](np.array([s]), n)[0])
    assert got == pytest.approx(want, rel=1e-8, abs=1e-300)


@pytest.mark.parametrize("kernel", list(DEFS))
@pytest.mark.parametrize("n", [1, 2, 3])
def test_quadratic_coefficient_near_zero(kernel, n):
    s = 1e-4
    got = float(K.KERNELS[kernel](np.array([s]), n)[0])
    assert got == pytest.approx(K.QUAD_COEF[kernel] * s * s / n, rel=1e-6)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.0, 50.0), st.integers(1, 3))
def test_sandwich_between_L_and_U(s, n):
    v = np.array([s])
    assert K.kernel_L(v, n)[0] <= K.kernel_U(v, n)[0] + 1e-15
    assert 0.0 <= K.kernel_U(v, n)[0] <= 1.0 + 1e-15


@pytest.mark.parametrize("n", [1, 2, 3])
def test_sphere_area(n):
    assert K.sphere_area(n) == pytest.approx({1: 2.0, 2: 2 * math.pi, 3: 4 * math.pi}[n])


@pytest.mark.parametrize("n", [1, 2, 3])
@pytest.mark.parametrize("alpha", [0.5, 1.0, 1.5])
def test_abs_moment(n, alpha):
    assert K.abs_moment(alpha, n) == pytest.approx(_sphere_average(lambda c: abs(c) ** alpha, n), rel=1e-8)


@pytest.mark.parametrize("kernel", ["U", "L", "C"])
@pytest.mark.parametrize("n", [1, 2])
@pytest.mark.parametrize("alpha", [0.7, 1.0, 1.5])
def test_stable_constant_by_quadrature(kernel, n, alpha):
    k = K.KERNELS[kernel]
    f = lambda s: float(k(np.array([s]), n)[0]) * s ** (-1 - alpha)
    val = sum(integrate.quad(f, a, b, limit=500)[0] for a, b in ((0, 1), (1, 100)))
    # far tail: U -> const, L -> O(1/s), C averages to 1 on the oscillation scale
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        far = integrate.quad(f, 100, np.inf, limit=2000)[0]
    assert val + far == pytest.approx(K.stable_kernel_constant(kernel, alpha, n), rel=1e-5)


def test_unknown_dimension_rejected():
    with pytest.raises(ValueError):
        K.kernel_U(np.array([1.0]), 4)


def test_kernel_H_has_no_stable_constant():
    with pytest.raises(ValueError):
        K.stable_kernel_constant("H", 1.0, 1)


def test_bessel_branch_consistency():
    # the series branch and the special-function branch meet at s = 0.1
    for n, ref in ((2, lambda s: 1 - special.j0(s)), (3, lambda s: 1 - math.sin(s) / s)):
        for s in (0.0999999, 0.1):
            assert K.kernel_C(np.array([s]), n)[0] == pytest.approx(ref(s), rel=1e-10)
