"""Quadrature rules shared by the kernel, boundary and curvature code.

All rules are returned as ``(nodes, weights)`` on the requested interval and
are cached, since the same handful of orders is requested over and over.
"""

from functools import lru_cache

import numpy as np
from scipy import special


@lru_cache(maxsize=64)
def _gl_ref(n):
    x, w = np.polynomial.legendre.leggauss(n)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def gauss_legendre(n, a=0.0, b=1.0):
    """Gauss-Legendre rule with ``n`` nodes on ``[a, b]``."""
    x, w = _gl_ref(n)
    half = 0.5 * (b - a)
    return a + half * (x + 1.0), half * w


@lru_cache(maxsize=256)
def _gj_ref(n, beta):
    # weight (1 + x)^beta on [-1, 1]
    x, w = special.roots_jacobi(n, 0.0, beta)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def gauss_jacobi_left(n, beta, a=0.0, b=1.0):
    """Nodes/weights for ``int_a^b (x - a)^beta f(x) dx`` (``beta > -1``).

    The returned weights already contain the singular factor, so the caller
    multiplies them by the smooth part ``f`` only.
    """
    x, w = _gj_ref(n, float(beta))
    half = 0.5 * (b - a)
    nodes = a + half * (x + 1.0)
    return nodes, w * half ** (1.0 + beta)


@lru_cache(maxsize=32)
def _tanh_sinh_ref(level):
    # double-exponential rule on [0, 1]; returns x, 1 - x and weights
    step = 2.0 ** (-level)
    t = np.arange(-int(6.0 / step), int(6.0 / step) + 1) * step
    u = 0.5 * np.pi * np.sinh(t)
    x = special.expit(2.0 * u)
    xc = special.expit(-2.0 * u)
    with np.errstate(over="ignore"):
        w = 0.25 * np.pi * step * np.cosh(t) / np.cosh(u) ** 2
    keep = (x > 0.0) & (xc > 0.0) & (w > 1e-300)
    out = x[keep], xc[keep], w[keep]
    for arr in out:
        arr.setflags(write=False)
    return out


def tanh_sinh(level=5):
    """Tanh-sinh rule on ``[0, 1]`` as ``(x, 1 - x, w)``.

    The complement ``1 - x`` is returned separately so that integrands with an
    endpoint singularity at 1 can be evaluated without cancellation.
    """
    return _tanh_sinh_ref(int(level))


def cos_power_integral(phi, s):
    """Closed form of ``int_0^phi cos(t)^(2 s) dt`` for ``|phi| <= pi/2``.

    Uses ``u = sin(t)^2``, which turns the integral into an incomplete beta
    function with parameters ``(1/2, s + 1/2)``.
    """
    phi = np.asarray(phi, dtype=float)
    a, b = 0.5, s + 0.5
    full = 0.5 * special.beta(a, b)
    sn2 = np.sin(phi) ** 2
    val = full * special.betainc(a, b, sn2)
    return np.sign(phi) * val


def cos_power_from_tan(t, d, s):
    """``int_0^{atan(t/d)} cos^(2s)`` evaluated from the legs ``t`` and ``d``.

    Written in terms of ``t^2/(t^2+d^2)`` and its complement so that it stays
    accurate when ``d`` is tiny (points very close to an edge).
    """
    t = np.asarray(t, dtype=float)
    d = np.asarray(d, dtype=float)
    a, b = 0.5, s + 0.5
    full = 0.5 * special.beta(a, b)
    r2 = t * t + d * d
    with np.errstate(invalid="ignore", divide="ignore"):
        x = np.where(r2 > 0, t * t / r2, 0.0)
        xc = np.where(r2 > 0, d * d / r2, 1.0)
    # betainc(a, b, x) = 1 - betainc(b, a, 1 - x); pick the accurate branch
    val = np.where(
        x < 0.5,
        special.betainc(a, b, x),
        1.0 - special.betainc(b, a, xc),
    )
    return np.sign(t) * full * val
