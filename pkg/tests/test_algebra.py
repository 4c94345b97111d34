import json
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lcx import certio
from lcx.algebra import (
    U_PROBE_T,
    ActionVector,
    AlgebraElem,
    GridError,
    GridFun,
    algebra_inverse,
    algebra_mult,
    algebra_suite,
    elem_rel_error,
    action_rel_error,
    leibniz_bound_check,
    matrix_action,
    mult,
    mult_discontinuity_witness,
    pairing,
    random_elem,
    random_vector,
    verify_mult,
)
from lcx.core import add, const, eval_jet, identity, jets_1d, monomial_bump, plateau, scale, support_bound, value, zero
from lcx.randomized import random_bump, random_support_bump
from lcx.topology import BasicNbhdCinf, SeqSpec, SpecError, seminorm_qKk

x = identity()
N1 = 2 * 512  # [-1, 1] with step 1/512


def indicator01(n=1, N=N1):
    return lambda u: ((u >= 0) & (u <= 1)).astype(float)


# ---------------------------------------------------------------------------
# mu


def test_mult_by_one():
    eta = random_support_bump(np.random.default_rng(0))
    xs = np.linspace(-2, 2, 41)
    assert np.array_equal(value(mult(const(1.0), eta), xs), value(eta, xs))
    assert support_bound(mult(x, eta)) == support_bound(eta)


def test_mult_product_rule():
    h = monomial_bump(0)
    got = eval_jet(mult(x, h), 0.1, 3).values
    jh = eval_jet(h, 0.1, 3).values
    want = [0.1 * jh[0], jh[0] + 0.1 * jh[1], 2 * jh[1] + 0.1 * jh[2], 3 * jh[2] + 0.1 * jh[3]]
    assert np.allclose(got, want, rtol=1e-14, atol=1e-15)


def test_mult_bilinear():
    rng = np.random.default_rng(1)
    g1, g2, e = random_support_bump(rng), random_support_bump(rng), random_support_bump(rng)
    xs = np.linspace(-1.5, 1.5, 61)
    lhs = jets_1d(mult(add(g1, g2), e), xs, 3)
    rhs = jets_1d(mult(g1, e), xs, 3) + jets_1d(mult(g2, e), xs, 3)
    assert np.allclose(lhs, rhs, rtol=0, atol=1e-13 * max(1.0, np.max(np.abs(lhs))))


def test_sequence_spot_check():
    """gamma_j -> gamma and eta_j -> eta with fixed supports give products converging."""
    rng = np.random.default_rng(2)
    g, e, dg, de = (random_support_bump(rng) for _ in range(4))
    K = (-1.5, 1.5)
    dists = []
    for j in (1, 2, 4, 8, 16):
        gj = add(g, scale(1.0 / j, dg))
        ej = add(e, scale(1.0 / j, de))
        diff = add(mult(gj, ej), scale(-1.0, mult(g, e)))
        dists.append(seminorm_qKk(diff, K, 2, 1e-2, max_depth=6).hi)
    assert all(b < a for a, b in zip(dists, dists[1:]))
    assert dists[-1] < dists[0] / 8


# ---------------------------------------------------------------------------
# Leibniz bound


def test_leibniz_zero():
    rep = leibniz_bound_check(random_support_bump(np.random.default_rng(3)), zero(), (-1, 1), 2)
    assert rep.product.hi == 0.0 and rep.passed and rep.certified


def test_leibniz_boundary_case():
    rep = leibniz_bound_check(x, x, (0.0, 1.0), 1)
    assert rep.product.lo == pytest.approx(2.0, abs=1e-12)
    assert rep.bound_hi >= 2.0 and rep.passed
    assert rep.margin == pytest.approx(0.0, abs=1e-2)


def test_leibniz_random_pairs():
    rng = np.random.default_rng(4)
    for _ in range(25):
        g = random_bump(rng, amplitude=float(rng.uniform(0.2, 3)))
        e = random_bump(rng, amplitude=float(rng.uniform(0.2, 3)))
        lo = float(rng.uniform(-1.5, 1.0))
        rep = leibniz_bound_check(g, e, (lo, lo + float(rng.uniform(0.2, 1.5))), int(rng.integers(0, 5)))
        assert rep.passed
        assert rep.product.lo <= rep.product.hi


def test_leibniz_rejects_bad_input():
    with pytest.raises(SpecError):
        leibniz_bound_check(x, x, (1.0, 0.0), 1)
    with pytest.raises(SpecError):
        leibniz_bound_check(x, x, (0.0, 1.0), -1)


# ---------------------------------------------------------------------------
# multiplication witness


@pytest.fixture(scope="module")
def witness():
    return mult_discontinuity_witness(BasicNbhdCinf(((-2.0, 2.0),), 3, 0.5), SeqSpec.parse("abs:1"))


def test_witness_example(witness):
    w = witness
    assert w.x0 == 3.0
    assert value(w.phi, 3.0) == 1.0
    esc = float(w.escape["value"])
    assert esc == w.t * w.r and esc >= 1.0
    assert Fraction(w.t) * Fraction(w.r) >= 1 and Fraction(w.t - 1) * Fraction(w.r) < 1
    assert w.membership.decision == "inside"
    # dense re-check: r phi stays below eps = 1 in value and first derivative
    xs = np.linspace(2.5, 3.5, 100_001)
    jets = jets_1d(scale(w.r, w.phi), xs, 3)
    assert np.max(np.abs(jets[:4])) < 1.0


def test_witness_u_checks(witness):
    ts = sorted(float(row["t"]) for row in witness.u_checks)
    assert set(U_PROBE_T) <= set(ts) and float(witness.t) in ts
    for row in witness.u_checks:
        assert row["inside"] and float(row["q_hi"]) == 0.0


def test_witness_support_separated(witness):
    (lo, hi), = support_bound(witness.phi)
    assert lo >= 2.0 + 0.5


def test_witness_verifies_from_json(witness):
    doc = json.loads(certio.dumps(witness.to_json()))
    assert verify_mult(doc).ok
    bad = dict(doc, t=str(int(doc["t"]) - 1))
    assert not verify_mult(bad).ok
    bad = dict(doc, r=certio.dec(2 * float(doc["r"])))
    assert not verify_mult(bad).ok


def test_witness_eps_scaling(witness):
    w10 = mult_discontinuity_witness(BasicNbhdCinf(((-2.0, 2.0),), 3, 0.5), SeqSpec.parse("abs:0.1"))
    ratio = w10.r / witness.r
    assert 1 / 16 <= ratio <= 1 / 8
    assert 8 <= w10.t / witness.t <= 16
    assert float(w10.escape["value"]) >= 1.0


def test_witness_needs_one_dimension():
    with pytest.raises(SpecError):
        mult_discontinuity_witness(BasicNbhdCinf(((-1.0, 1.0), (-1.0, 1.0)), 1, 1.0), SeqSpec())


# ---------------------------------------------------------------------------
# grid functions and pairing


def test_pairing_constant():
    lam = GridFun.sample(lambda u: np.ones_like(u), 1, N1, "F")
    xx = GridFun.sample(lambda u: np.ones_like(u), 1, N1, "E", (0.0, 1.0))
    assert pairing(lam, xx) == pytest.approx(1.0, abs=1e-14)


def test_pairing_linear():
    lam = GridFun.sample(lambda u: u, 1, N1, "F")
    xx = GridFun.sample(lambda u: u, 1, N1, "E", (0.0, 1.0))
    step = 1 / 512
    assert abs(pairing(lam, xx) - 1 / 3) <= step**2


def test_pairing_second_order():
    errs = []
    for per_unit in (64, 128, 256):
        lam = GridFun.sample(np.cos, 1, 2 * per_unit, "F")
        xx = GridFun.sample(lambda u: np.ones_like(u), 1, 2 * per_unit, "E")
        errs.append(abs(pairing(lam, xx) - 2 * math.sin(1.0)))
    assert errs[1] == pytest.approx(errs[0] / 4, rel=0.01)
    assert errs[2] == pytest.approx(errs[1] / 4, rel=0.01)


def test_pairing_zero_and_errors():
    lam = GridFun.sample(np.cos, 1, 64, "F")
    assert pairing(lam, GridFun.zeros(1, 64)) == 0.0
    wide = GridFun.sample(np.ones_like, 2, 128, "E", (-1.5, 1.5))
    with pytest.raises(GridError):
        pairing(lam, wide)
    with pytest.raises(GridError):
        pairing(lam, GridFun.zeros(1, 32))
    with pytest.raises(GridError):
        pairing(GridFun.zeros(1, 64), GridFun.zeros(1, 64))


def test_gridfun_invariants():
    with pytest.raises(GridError):
        GridFun(1, 1, np.zeros(2))
    with pytest.raises(GridError):
        GridFun(1, 4, np.ones(5), "E", (0.0, 0.5))
    with pytest.raises(GridError):
        GridFun(1, 4, np.zeros(4))


def test_gridfun_padding_and_json():
    e = GridFun.sample(np.ones_like, 1, 8, "E", (-0.5, 0.5))
    big = e.to_n(3)
    assert big.N == 24 and big.step == e.step
    assert pairing(GridFun.sample(np.ones_like, 3, 24, "F"), e) == pairing(GridFun.sample(np.ones_like, 1, 8, "F"), e)
    assert np.array_equal(GridFun.from_json(json.loads(json.dumps(e.to_json()))).values, e.values)
    with pytest.raises(GridError):
        GridFun.sample(np.ones_like, 1, 8, "F").to_n(2)


# ---------------------------------------------------------------------------
# the algebra


def elem(rng, n=1, c=None):
    a = random_elem(rng, n)
    return a if c is None else AlgebraElem(a.lam, a.x, a.z, c)


def test_unit_law():
    rng = np.random.default_rng(5)
    a = elem(rng)
    one = AlgebraElem.unit(1, a.lam.N)
    assert elem_rel_error(a * one, a) == 0.0
    assert elem_rel_error(one * a, a) == 0.0


def test_nilpotent_part():
    rng = np.random.default_rng(6)
    a, b, d = elem(rng, c=0.0), elem(rng, c=0.0), elem(rng, c=0.0)
    p = a * b
    assert np.all(p.lam.values == 0) and np.all(p.x.values == 0) and p.c == 0
    assert p.z == pytest.approx(pairing(a.lam, b.x))
    cube = a * a * a
    assert cube.z == 0.0 and cube.c == 0.0 and not np.any(cube.lam.values) and not np.any(cube.x.values)
    assert (a * b * d).z == 0.0


def test_inverse_examples():
    one = AlgebraElem.unit(1, 64)
    inv = algebra_inverse(one)
    assert inv.c == 1.0 and inv.z == 0.0 and not np.any(inv.lam.values)
    z = AlgebraElem(GridFun.zeros(1, 64, "F"), GridFun.zeros(1, 64), 2.5, 1.0)
    assert algebra_inverse(z).z == -2.5
    with pytest.raises(ZeroDivisionError):
        algebra_inverse(AlgebraElem(GridFun.zeros(1, 64, "F"), GridFun.zeros(1, 64), 1.0, 0.0))


def test_random_inverse_both_sides():
    rng = np.random.default_rng(7)
    for _ in range(20):
        u = random_elem(rng, 2, unit=True)
        one = AlgebraElem.unit(2, u.lam.N)
        inv = algebra_inverse(u)
        assert elem_rel_error(u * inv, one) <= 1e-12
        assert elem_rel_error(inv * u, one) <= 1e-12


def test_mult_components():
    rng = np.random.default_rng(8)
    a, b = elem(rng), elem(rng)
    p = algebra_mult(a, b)
    assert p.c == a.c * b.c
    assert p.z == pytest.approx(a.c * b.z + pairing(a.lam, b.x) + a.z * b.c, rel=1e-15)
    assert np.allclose(p.lam.values, a.c * b.lam.values + b.c * a.lam.values)


def test_grid_mismatch():
    a = AlgebraElem.unit(1, 64)
    b = AlgebraElem.unit(1, 128)
    with pytest.raises(GridError):
        a * b


def test_matrix_action_examples():
    rng = np.random.default_rng(9)
    v = random_vector(rng, 1)
    one = AlgebraElem.unit(1, v.y.N)
    assert action_rel_error(matrix_action(one, v), v) == 0.0
    a = elem(rng)
    out = matrix_action(a, ActionVector(2.0, GridFun.zeros(1, a.lam.N), 0.0))
    assert out.u == a.c * 2.0 and out.w == 0.0 and not np.any(out.y.values)


def test_matrix_representation_faithful():
    rng = np.random.default_rng(10)
    a = elem(rng)
    N = a.lam.N
    zero_y = GridFun.zeros(1, N)
    e1 = matrix_action(a, ActionVector(1.0, zero_y, 0.0))
    e3 = matrix_action(a, ActionVector(0.0, zero_y, 1.0))
    assert e1.u == a.c
    assert e3.u == a.z and e3.w == a.c and np.array_equal(e3.y.to_n(1).values, a.x.to_n(1).values)
    for _ in range(5):
        probe = random_vector(rng, 1).y
        e2 = matrix_action(a, ActionVector(0.0, probe, 0.0))
        assert e2.u == pytest.approx(pairing(a.lam, probe), rel=1e-15)


def test_homomorphism_random():
    rng = np.random.default_rng(11)
    for _ in range(20):
        n = int(rng.integers(1, 4))
        a, b, v = random_elem(rng, n), random_elem(rng, n), random_vector(rng, n)
        assert action_rel_error(matrix_action(a * b, v), matrix_action(a, matrix_action(b, v))) <= 1e-12


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_associativity_property(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 4))
    a, b, d = (random_elem(rng, n) for _ in range(3))
    assert elem_rel_error((a * b) * d, a * (b * d)) <= 1e-12


def test_algebra_suite_small():
    rep = algebra_suite(50, seed=3)
    assert rep.passed
    doc = rep.to_json()
    assert doc["kind"] == "algebra-report" and doc["pass"] is True


def test_element_json_round_trip():
    a = random_elem(np.random.default_rng(12), 1)
    b = AlgebraElem.from_json(json.loads(json.dumps(a.to_json())))
    assert elem_rel_error(a, b) == 0.0
