"""Angular averages of the scalar kernels used by the exponents.

For a direction ``l`` uniform on the unit sphere of R^n (n = 1, 2, 3) and
``s >= 0`` these return ``E k(s * l_1)`` in closed form, for

    U(x) = x^2 ^ 1            L(x) = x^2 1{|x| <= 1}
    C(x) = 1 - cos x          H(x) = cosh x - 1

The 1-d versions double as the kernels of a measure concentrated on a
finite set of directions (evaluated at ``|xi . d|``).
"""

from __future__ import annotations

import math

import numpy as np
from scipy import special

SUPPORTED_DIMS = (1, 2, 3)


def _check_dim(n):
    if n not in SUPPORTED_DIMS:
        raise ValueError(f"closed-form angular kernels exist for n in {SUPPORTED_DIMS}, got {n}")


def _x_minus_sin(x):
    x = np.asarray(x, dtype=float)
    out = x - np.sin(x)
    small = np.abs(x) < 0.5
    y = x[small]
    y2 = y * y
    # x^3/3! - x^5/5! + ... ; six terms reach double precision for |x| < 0.5
    out[small] = y * y2 / 6 * (1 - y2 / 20 * (1 - y2 / 42 * (1 - y2 / 72 * (1 - y2 / 110 * (1 - y2 / 156)))))
    return out


def _disc_cap(sb):
    """``s^2 (2b - sin 2b) / 4`` with ``b = arcsin(1/s)``, free of cancellation for large ``s``."""
    b = np.arcsin(1.0 / sb)
    return sb**2 * _x_minus_sin(2 * b) / 4


def kernel_U(s, n):
    _check_dim(n)
    s = np.abs(np.asarray(s, dtype=float))
    small = s <= 1.0
    out = np.empty_like(s)
    out[small] = s[small] ** 2 / n
    big = ~small
    sb = s[big]
    if n == 1:
        out[big] = 1.0
    elif n == 2:
        out[big] = (2 / np.pi) * (np.arccos(1.0 / sb) + _disc_cap(sb))
    else:
        out[big] = 1.0 - 2.0 / (3.0 * sb)
    return out


def kernel_L(s, n):
    _check_dim(n)
    s = np.abs(np.asarray(s, dtype=float))
    small = s <= 1.0
    out = np.empty_like(s)
    out[small] = s[small] ** 2 / n
    big = ~small
    sb = s[big]
    if n == 1:
        out[big] = 0.0
    elif n == 2:
        out[big] = (2 / np.pi) * _disc_cap(sb)
    else:
        out[big] = 1.0 / (3.0 * sb)
    return out


def kernel_C(s, n):
    """``E[1 - cos(s l_1)]`` without cancellation at small ``s``."""
    _check_dim(n)
    s = np.abs(np.asarray(s, dtype=float))
    if n == 1:
        return 2.0 * np.sin(s / 2) ** 2
    out = np.empty_like(s)
    small = s < 0.1
    x = s[small] ** 2
    if n == 2:
        out[small] = x / 4 - x**2 / 64 + x**3 / 2304 - x**4 / 147456 + x**5 / 14745600
        out[~small] = 1.0 - special.j0(s[~small])
    else:
        out[small] = x / 6 - x**2 / 120 + x**3 / 5040 - x**4 / 362880 + x**5 / 39916800
        sb = s[~small]
        out[~small] = 1.0 - np.sin(sb) / sb
    return out


def kernel_H(s, n):
    """``E[cosh(s l_1) - 1]``."""
    _check_dim(n)
    s = np.abs(np.asarray(s, dtype=float))
    if n == 1:
        return 2.0 * np.sinh(s / 2) ** 2
    out = np.empty_like(s)
    small = s < 0.1
    x = s[small] ** 2
    if n == 2:
        out[small] = x / 4 + x**2 / 64 + x**3 / 2304 + x**4 / 147456 + x**5 / 14745600
        out[~small] = special.i0(s[~small]) - 1.0
    else:
        out[small] = x / 6 + x**2 / 120 + x**3 / 5040 + x**4 / 362880 + x**5 / 39916800
        sb = s[~small]
        out[~small] = np.sinh(sb) / sb - 1.0
    return out


KERNELS = {"U": kernel_U, "L": kernel_L, "C": kernel_C, "H": kernel_H}

# Leading Taylor coefficient k(s) ~ QUAD_COEF * s^2 / n near s = 0.
QUAD_COEF = {"U": 1.0, "L": 1.0, "C": 0.5, "H": 0.5}


def abs_moment(alpha, n):
    """``E|l_1|^alpha`` for ``l`` uniform on the sphere in R^n."""
    return math.gamma(n / 2) * math.gamma((alpha + 1) / 2) / (
        math.sqrt(math.pi) * math.gamma((n + alpha) / 2))


def sphere_area(n):
    """Surface area of the unit sphere in R^n (2 for n = 1)."""
    return 2 * math.pi ** (n / 2) / math.gamma(n / 2)


def stable_kernel_constant(kernel, alpha, n):
    """``int_0^inf E k(s l_1) s^{-1-alpha} ds`` for the kernels above."""
    m = abs_moment(alpha, n)
    if kernel == "U":
        return m * 2.0 / (alpha * (2.0 - alpha))
    if kernel == "L":
        return m / (2.0 - alpha)
    if kernel == "C":
        return m * math.pi / (2.0 * math.gamma(1.0 + alpha) * math.sin(math.pi * alpha / 2))
    raise ValueError(f"no scale-free constant for kernel {kernel!r}")


# ---------------------------------------------------------------------------
# composite radial rule


_GL_X, _GL_W = np.polynomial.legendre.leggauss(16)


def composite_rule(upper, density, zmax, n_dyadic=60, osc_width=2.0):
    """Nodes and weights for ``int_0^upper g(z r) density(r) dr``.

    Dyadic panels ``[upper 2^-(k+1), upper 2^-k]`` grade towards the origin;
    each is split so that ``zmax * panel`` stays below ``osc_width`` radians.
    Returns ``(nodes, weights, delta)``: the rule covers ``[delta, upper]``
    and the caller adds the Taylor term for ``[0, delta]``.
    """
    edges = upper * 2.0 ** -np.arange(n_dyadic + 1)[::-1]
    nodes, weights = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        pieces = max(1, int(math.ceil(zmax * (b - a) / osc_width)))
        sub = np.linspace(a, b, pieces + 1)
        mid = 0.5 * (sub[1:] + sub[:-1])[:, None]
        half = 0.5 * (sub[1:] - sub[:-1])[:, None]
        nodes.append((mid + half * _GL_X).ravel())
        weights.append((half * _GL_W).ravel())
    nodes = np.concatenate(nodes)
    weights = np.concatenate(weights) * density(nodes)
    return nodes, weights, float(edges[0])


def apply_rule(kernel_fn, z, nodes, weights, chunk=2**22):
    """``sum_j kernel_fn(z_i * r_j) w_j`` for every ``z_i``, in memory-bounded chunks."""
    z = np.asarray(z, dtype=float).ravel()
    out = np.empty(z.shape, dtype=np.result_type(float, kernel_fn(np.zeros(1))))
    step = max(1, chunk // max(nodes.size, 1))
    for i in range(0, z.size, step):
        zz = z[i:i + step, None]
        out[i:i + step] = kernel_fn(zz * nodes[None, :]) @ weights
    return out
