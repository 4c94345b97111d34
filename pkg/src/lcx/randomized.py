"""Seeded generators of random smooth test inputs."""

from __future__ import annotations

import numpy as np

from .core import (
    SmoothExpr,
    add,
    compose,
    const,
    gexp,
    identity,
    mul,
    plateau,
    power,
    scale,
    smooth_step,
    tan_stretch,
    translate,
    affine,
    atan_stretch,
    quotient,
)


def random_poly(rng: np.random.Generator, degree: int | None = None, dim: int = 1) -> SmoothExpr:
    if degree is None:
        degree = int(rng.integers(0, 4))
    x = identity()
    terms = [const(float(rng.uniform(-1, 1)))]
    for k in range(1, degree + 1):
        terms.append(scale(float(rng.uniform(-1, 1)), power(x, k)))
    return add(*terms)


def random_bump(
    rng: np.random.Generator,
    center: float | None = None,
    amplitude: float = 1.0,
    min_transition: float = 0.2,
) -> SmoothExpr:
    """amplitude * poly(x - c) * plateau(a, b)(x - c) with random radii and coefficients."""
    c = float(rng.uniform(-1.0, 1.0)) if center is None else float(center)
    a_in = float(rng.uniform(0.1, 0.5))
    a_out = a_in + float(rng.uniform(min_transition, max(0.8, min_transition + 0.2)))
    poly = random_poly(rng, int(rng.integers(0, 3)))
    return scale(amplitude, translate(mul(poly, plateau(a_in, a_out)), c))


def random_expr(rng: np.random.Generator, depth: int = 2) -> SmoothExpr:
    """Random composite built from every primitive (values stay moderate on [-1, 1])."""
    leaves = [
        lambda: random_poly(rng),
        lambda: random_bump(rng),
        lambda: affine(smooth_step(), float(rng.uniform(0.5, 2.0)), float(rng.uniform(-0.5, 0.5))),
        lambda: affine(gexp(), float(rng.uniform(0.5, 2.0)), float(rng.uniform(0.2, 1.0))),
        lambda: affine(tan_stretch(), float(rng.uniform(0.1, 0.4)), float(rng.uniform(-0.3, 0.3))),
        lambda: compose(atan_stretch(), random_poly(rng)),
    ]
    if depth <= 0:
        return leaves[int(rng.integers(len(leaves)))]()
    choice = int(rng.integers(5))
    a = random_expr(rng, depth - 1)
    if choice == 0:
        return add(a, random_expr(rng, depth - 1))
    if choice == 1:
        return mul(a, random_expr(rng, depth - 1))
    if choice == 2:
        # squash the inner function into (-1, 1) before composing
        return compose(a, compose(atan_stretch(), random_expr(rng, depth - 1)))
    if choice == 3:
        return quotient(a, add(const(2.0), compose(atan_stretch(), random_expr(rng, depth - 1))))
    return scale(float(rng.uniform(-2, 2)), a)


def random_support_bump(rng: np.random.Generator) -> SmoothExpr:
    """Compactly supported bump, sometimes a sum of two with separate supports."""
    f = random_bump(rng, amplitude=float(rng.uniform(0.2, 2.0)))
    if rng.random() < 0.5:
        f = add(f, random_bump(rng, center=float(rng.uniform(2.0, 4.0))))
    return f


def random_quadruple(rng: np.random.Generator):
    """(gamma, eta, gamma1, eta1) with gentle transitions, for derivative checks.

    eta and eta1 share a centre and gamma, gamma1 sit around 0 (where eta
    takes its values), so the derivative gamma'(eta) eta1 + gamma1(eta) is
    not identically zero.
    """
    c = float(rng.uniform(-1.0, 1.0))
    gamma = random_bump(rng, center=float(rng.uniform(-0.3, 0.3)), min_transition=0.5)
    eta = random_bump(rng, center=c, amplitude=0.8, min_transition=0.5)
    gamma1 = random_bump(rng, center=float(rng.uniform(-0.3, 0.3)), min_transition=0.5)
    eta1 = random_bump(rng, center=c + float(rng.uniform(-0.3, 0.3)), amplitude=0.25, min_transition=0.5)
    return gamma, eta, gamma1, eta1
