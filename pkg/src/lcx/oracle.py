"""High-precision point evaluation of expressions, independent of the jet engine.

Values are computed node by node in mpmath at ``dps`` digits; derivatives
come from central differences extrapolated in h^2 (Richardson).  Nothing
here touches the truncated Taylor arithmetic, so agreement with
:func:`lcx.core.jets_1d` is a genuine cross-check.
"""

from __future__ import annotations

import math

import mpmath

from .core import SmoothExpr

DEFAULT_DPS = 60


def _eval(node: SmoothExpr, x: tuple):
    kind = node.kind
    p = node.params
    if kind == "const":
        return mpmath.mpf(p[0])
    if kind == "coord":
        return x[p[0]]
    if kind == "add":
        return mpmath.fsum(_eval(c, x) for c in node.children)
    if kind == "mul":
        out = mpmath.mpf(1)
        for c in node.children:
            out *= _eval(c, x)
        return out
    if kind == "scale":
        return mpmath.mpf(p[0]) * _eval(node.children[0], x)
    if kind == "pow":
        return _eval(node.children[0], x) ** p[0]
    if kind == "quot":
        return _eval(node.children[0], x) / _eval(node.children[1], x)
    if kind == "stack":
        return tuple(_eval(c, x) for c in node.children)
    if kind == "compose":
        outer, inner = node.children
        y = _eval(inner, x)
        return _eval(outer, y if isinstance(y, tuple) else (y,))
    if kind == "affine":
        a, b = p
        return _eval(node.children[0], tuple(mpmath.mpf(ai) * xi + mpmath.mpf(bi) for xi, ai, bi in zip(x, a, b)))
    if kind == "support":
        (box,) = p
        if any(xi < lo or xi > hi for xi, (lo, hi) in zip(x, box)):
            return mpmath.mpf(0)
        return _eval(node.children[0], x)
    if kind == "g":
        u = x[0]
        return mpmath.exp(-1 / u) if u > 0 else mpmath.mpf(0)
    if kind == "tan":
        return mpmath.tan(mpmath.pi * x[0] / 2)
    if kind == "atan":
        return 2 * mpmath.atan(x[0]) / mpmath.pi
    if kind == "dilate":
        m, coef, k0, axis = p
        y = list(x)
        y[axis] = y[axis] * m
        return mpmath.mpf(coef) * mpmath.mpf(m) ** (-k0) * _eval(node.children[0], tuple(y))
    if kind == "deriv":
        (axis,) = p

        def along(t):
            y = list(x)
            y[axis] = t
            return _eval(node.children[0], tuple(y))

        return mpmath.diff(along, x[axis])
    raise ValueError(f"unknown node kind {kind!r}")


def mp_value(f: SmoothExpr, x, dps: int = DEFAULT_DPS):
    """f(x) as an mpmath number (or tuple for vector-valued f)."""
    with mpmath.workdps(dps):
        pt = tuple(mpmath.mpf(v) for v in (x if isinstance(x, (tuple, list)) else (x,)))
        return _eval(f, pt)


def central_difference(f: SmoothExpr, x: float, j: int, h, dps: int = DEFAULT_DPS):
    """h^-j * sum_i (-1)^i C(j, i) f(x + (j/2 - i) h); error is a series in h^2."""
    with mpmath.workdps(dps):
        h = mpmath.mpf(h)
        x = mpmath.mpf(x)
        total = mpmath.mpf(0)
        for i in range(j + 1):
            total += (-1) ** i * math.comb(j, i) * _eval(f, (x + (mpmath.mpf(j) / 2 - i) * h,))
        return total / h**j


def richardson_derivative(f: SmoothExpr, x: float, j: int, h: float = 1e-3, levels: int = 4,
                          dps: int = DEFAULT_DPS) -> float:
    """f^(j)(x) from central differences at h, h/2, ..., extrapolated in h^2."""
    if j == 0:
        return float(mp_value(f, x, dps))
    with mpmath.workdps(dps):
        row = [central_difference(f, x, j, mpmath.mpf(h) / 2**i, dps) for i in range(levels)]
        for k in range(1, levels):
            factor = mpmath.mpf(4) ** k
            row = [(factor * row[i + 1] - row[i]) / (factor - 1) for i in range(len(row) - 1)]
        return float(row[0])
