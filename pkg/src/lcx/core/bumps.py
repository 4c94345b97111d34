"""Closed-form plateau and bump builders (no quadrature anywhere)."""

from __future__ import annotations

from .expr import (
    SmoothExpr,
    add,
    affine,
    compose,
    coord,
    dilate,
    gexp,
    identity,
    mul,
    power,
    quotient,
    scale,
    translate,
)


def smooth_step() -> SmoothExpr:
    """S(u) = g(u) / (g(u) + g(1 - u)): 0 for u <= 0, 1 for u >= 1, monotone."""
    g = gexp()
    g_reflected = affine(gexp(), -1.0, 1.0)
    return quotient(g, add(g, g_reflected))


def _plateau_1d(a_inner: float, a_outer: float) -> SmoothExpr:
    width = a_outer - a_inner
    step = smooth_step()
    right = affine(step, -1.0 / width, a_outer / width)
    left = affine(step, 1.0 / width, a_outer / width)
    return mul(right, left)


def plateau(a_inner: float, a_outer: float, d: int = 1) -> SmoothExpr:
    """1 on [-a_inner, a_inner]^d, 0 outside (-a_outer, a_outer)^d, values in [0, 1]."""
    a_inner, a_outer = float(a_inner), float(a_outer)
    if not 0.0 < a_inner < a_outer:
        raise ValueError("plateau needs 0 < a_inner < a_outer")
    if d < 1:
        raise ValueError("dimension must be positive")
    one_d = _plateau_1d(a_inner, a_outer)
    if d == 1:
        return one_d
    return mul(*(compose(one_d, coord(i, d)) for i in range(d)))


def monomial_bump(k0: int) -> SmoothExpr:
    """h(x) = x**(k0+1) on [-1/4, 1/4], supported in [-1/2, 1/2]."""
    if k0 < 0:
        raise ValueError("k0 must be non-negative")
    return mul(power(identity(), k0 + 1), plateau(0.25, 0.5, 1))


def dilate_scale(h: SmoothExpr, m: int, r_coef: float, k0: int) -> SmoothExpr:
    """h_m(x) = r_coef / m**k0 * h(m x)."""
    if h.dim_in != 1:
        raise ValueError("dilate_scale needs a one-dimensional h")
    if m < 1:
        raise ValueError("m must be >= 1")
    return dilate(h, m, r_coef, k0, axis=0)


def unit_linear_bump() -> SmoothExpr:
    """u * plateau(1/4, 1/2)(u); |values| <= 1/2."""
    return mul(identity(), plateau(0.25, 0.5, 1))


def linear_bump(n: int, s: float) -> SmoothExpr:
    """phi(x) = s (x - n) near n, supported in [n - 1/2, n + 1/2]."""
    if s <= 0:
        raise ValueError("s must be positive")
    return translate(scale(s, unit_linear_bump()), n)
