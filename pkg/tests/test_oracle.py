import math

import mpmath
import pytest

from lcx.core import (
    atan_stretch,
    compose,
    derivative,
    gexp,
    identity,
    monomial_bump,
    plateau,
    power,
    quotient,
    const,
    add,
    tan_stretch,
)
from lcx.oracle import central_difference, mp_value, richardson_derivative

x = identity()


def test_mp_value_closed_forms():
    assert mp_value(power(x, 3), 0.5) == mpmath.mpf("0.125")
    assert mp_value(gexp(), 0.5) == pytest.approx(math.exp(-2.0), rel=1e-15)
    assert mp_value(gexp(), -0.5) == 0
    assert float(mp_value(tan_stretch(), 0.5)) == pytest.approx(math.tan(math.pi / 4), rel=1e-15)
    assert float(mp_value(atan_stretch(), 1.0)) == pytest.approx(0.5, rel=1e-15)
    assert float(mp_value(quotient(const(1.0), add(const(1.0), x)), 1.0)) == 0.5


def test_mp_value_plateau():
    P = plateau(0.25, 0.5)
    assert mp_value(P, 0.1) == 1
    assert mp_value(P, 0.7) == 0
    assert 0 < mp_value(P, 0.375) < 1


@pytest.mark.parametrize("j", range(7))
def test_richardson_polynomial(j):
    f = power(x, 6)
    want = math.factorial(6) / math.factorial(6 - j) * 0.7 ** (6 - j)
    assert richardson_derivative(f, 0.7, j) == pytest.approx(want, rel=1e-8)


def test_richardson_transcendental():
    # d/dx tan(pi x / 2) = pi/2 sec^2(pi x / 2)
    got = richardson_derivative(tan_stretch(), 0.3, 1)
    want = math.pi / 2 / math.cos(math.pi * 0.3 / 2) ** 2
    assert got == pytest.approx(want, rel=1e-10)


def test_central_difference_converges():
    f = monomial_bump(1)
    exact = float(richardson_derivative(f, 0.1, 2))
    e1 = abs(float(central_difference(f, 0.1, 2, 1e-2)) - exact)
    e2 = abs(float(central_difference(f, 0.1, 2, 5e-3)) - exact)
    assert e2 <= e1 / 3 or e1 < 1e-12


def test_derivative_node_in_oracle():
    f = compose(plateau(0.2, 0.6), power(x, 2))
    assert float(mp_value(derivative(f), 0.7)) == pytest.approx(float(richardson_derivative(f, 0.7, 1)), rel=1e-8)
