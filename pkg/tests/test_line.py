import copy
import json
import math
from fractions import Fraction

import numpy as np
import pytest

from lcx import certio
from lcx.core import (
    add,
    identity,
    jets_1d,
    linear_bump,
    monomial_bump,
    scale,
    support_bound,
    translate,
    value,
    zero,
)
from lcx.line import (
    DEFAULT_TARGET,
    TargetError,
    build_line_exprs,
    choose_n,
    df_line,
    escape_value,
    expected_escape,
    f_line,
    m_rule,
    support_preservation_check,
    verify_line,
    witness_line,
)
from lcx.randomized import random_support_bump
from lcx.topology import SeqSpec, UndecidedError, member_V


@pytest.fixture(scope="module")
def cert_abs():
    return witness_line(SeqSpec.parse("abs:1"))


@pytest.fixture(scope="module")
def cert_override():
    return witness_line(SeqSpec.parse("abs:1", ["0:3:0.1"]))


# ---------------------------------------------------------------------------
# f and its derivative formula


def test_f_of_zero():
    assert np.all(jets_1d(f_line(zero()), np.linspace(-2, 2, 9), 2) == 0.0)


def test_f_of_linear_bump_fixed_point():
    assert value(f_line(linear_bump(0, 1.0)), 0.1) == pytest.approx(0.1, rel=1e-15)


def test_f_support_within_gamma():
    g = translate(monomial_bump(1), 2.0)
    assert support_bound(f_line(g)) == support_bound(g)


def test_f_requires_compact_support():
    with pytest.raises(ValueError):
        f_line(identity())
    with pytest.raises(ValueError):
        df_line(monomial_bump(0), identity())


def test_df_zero_direction_and_zero_base():
    g = random_support_bump(np.random.default_rng(0))
    xs = np.linspace(-2, 2, 41)
    assert np.all(value(df_line(g, zero()), xs) == 0.0)
    g1 = random_support_bump(np.random.default_rng(1))
    assert np.allclose(value(df_line(zero(), g1), xs), 0.0, atol=1e-15)


def test_df_matches_difference_quotients():
    rng = np.random.default_rng(2)
    for _ in range(5):
        g, g1 = random_support_bump(rng), random_support_bump(rng)
        xs = np.linspace(-1.5, 1.5, 20)
        d = value(df_line(g, g1), xs)
        fg = value(f_line(g), xs)
        errs = []
        for t in (1e-2, 1e-3, 1e-4, 1e-5):
            q = (value(f_line(add(g, scale(t, g1))), xs) - fg) / t
            errs.append(np.max(np.abs(q - d)))
        # first order convergence, until roundoff (~eps/t) takes over
        assert errs[1] <= 0.2 * errs[0] + 1e-9
        assert errs[2] <= 0.2 * errs[1] + 1e-9
        assert errs[3] <= 1e-4 * (1 + np.max(np.abs(d)))


# ---------------------------------------------------------------------------
# support preservation


def test_support_preservation_examples():
    rep = support_preservation_check(monomial_bump(0))
    assert rep["passed"] and rep["max_abs"] == 0.0
    assert support_preservation_check(zero())["passed"]
    xs = np.linspace(0.6, 5.0, 200)
    assert np.all(value(f_line(monomial_bump(0)), xs) == 0.0)


def test_support_preservation_random():
    rng = np.random.default_rng(3)
    for i in range(10):
        assert support_preservation_check(random_support_bump(rng), 100, seed=i)["passed"]


def test_support_preservation_witness(cert_abs):
    assert support_preservation_check(cert_abs.exprs["gamma_m"], 500)["passed"]


# ---------------------------------------------------------------------------
# parameter rules


def test_m_rule_is_exact_ceiling_plus_safety():
    for k0, r, s in [(0, 0.5, 0.25), (2, 2.0**-5, 2.0**-3), (1, 1.0, 1.0)]:
        m = m_rule(k0, r, s)
        x = 1 / (Fraction(r) * Fraction(s) ** (k0 + 1) * math.factorial(k0 + 1))
        assert m == math.ceil(x) + max(1, math.ceil(x / 2**30))
        assert Fraction(r) * m * Fraction(s) ** (k0 + 1) * math.factorial(k0 + 1) > 1


def test_choose_n():
    assert choose_n(0, DEFAULT_TARGET) == 2
    assert choose_n(3, DEFAULT_TARGET) == 5
    assert choose_n(0, SeqSpec.parse("abs:1", ["2:3:5.0"])) == 3
    with pytest.raises(TargetError):
        choose_n(2, SeqSpec.parse("constant:1:1"))


# ---------------------------------------------------------------------------
# witness generator


def _check_certificate(cert, spec):
    k0 = spec.k_at(0)
    assert cert.k0 == k0
    assert cert.n >= k0 + 2 and cert.m >= 1 and cert.r > 0 and cert.s > 0
    assert cert.membership.decision == "inside"
    assert member_V(cert.exprs["gamma_m"], spec).decision == "inside"
    esc = cert.escape
    assert esc["order"] == k0 + 1
    assert abs(esc["value"]) >= 1.0
    assert esc["value"] == pytest.approx(expected_escape(k0, cert.r, cert.s, cert.m), rel=1e-8)
    assert value(cert.exprs["gamma_m"], 0.0) == 0.0


def test_witness_abs_spec(cert_abs):
    _check_certificate(cert_abs, SeqSpec.parse("abs:1"))
    assert cert_abs.k0 == 0
    assert cert_abs.escape["value"] == pytest.approx(cert_abs.r * cert_abs.m * cert_abs.s, rel=1e-8)


def test_witness_constant_spec():
    spec = SeqSpec.parse("constant:0:1")
    cert = witness_line(spec)
    _check_certificate(cert, spec)
    # independent dense-sampling re-check of membership at order 0
    xs = np.linspace(-0.5, cert.n + 0.5, 200_001)
    assert np.max(np.abs(value(cert.exprs["gamma_m"], xs))) < 1.0


def test_witness_override(cert_override):
    _check_certificate(cert_override, SeqSpec.parse("abs:1", ["0:3:0.1"]))
    assert cert_override.escape["order"] == 4
    assert cert_override.n >= 5


def test_exactness_window(cert_override):
    c = cert_override
    k0, n, r, s, m = c.k0, c.n, c.r, c.s, c.m
    w = min(0.25, 1 / (4 * m * s))
    xs = n + np.linspace(-w, w, 101)
    got = value(f_line(c.exprs["gamma_m"]), xs)
    want = r * m * s ** (k0 + 1) * (xs - n) ** (k0 + 1)
    assert np.max(np.abs(got - want)) <= 1e-12


def test_doubling_m_doubles_escape(cert_abs):
    c = cert_abs
    e1 = escape_value(build_line_exprs(c.k0, c.r, c.n, c.s, c.m)["gamma_m"], c.n, c.k0 + 1)
    e2 = escape_value(build_line_exprs(c.k0, c.r, c.n, c.s, 2 * c.m)["gamma_m"], c.n, c.k0 + 1)
    assert e2 == pytest.approx(2 * e1, rel=1e-10)


def test_undecided_at_tiny_tolerance():
    with pytest.raises(UndecidedError):
        witness_line(SeqSpec.parse("constant:0:1"), tol=1e-30)


def test_incompatible_target():
    with pytest.raises(TargetError):
        witness_line(SeqSpec.parse("constant:1:1"), SeqSpec.parse("constant:0:1"))


def test_extension_target_flagged():
    target = SeqSpec.parse("abs:0.5")
    cert = witness_line(SeqSpec.parse("constant:0:1"), target)
    assert cert.to_json()["target_extension"] is True
    assert abs(cert.escape["value"]) >= target.eps_at(cert.n)


# ---------------------------------------------------------------------------
# serialized certificates


def test_certificate_schema_and_verification(cert_abs):
    doc = json.loads(certio.dumps(cert_abs.to_json()))
    for key in ("spec", "target", "k0", "r", "n", "s", "m", "exprs", "membership_report", "escape"):
        assert key in doc
    assert set(doc["exprs"]) == {"h", "h_m", "phi", "gamma_m"}
    assert set(doc["escape"]) >= {"order", "location", "value", "bound", "margin"}
    assert isinstance(doc["r"], str) and isinstance(doc["escape"]["value"], str)
    assert verify_line(doc).ok


def test_serialization_is_deterministic():
    spec = SeqSpec.parse("constant:0:1")
    assert certio.dumps(witness_line(spec).to_json()) == certio.dumps(witness_line(spec).to_json())


@pytest.mark.parametrize("key,change", [
    ("r", lambda v: certio.dec(2 * certio.undec(v))),
    ("s", lambda v: certio.dec(2 * certio.undec(v))),
    ("m", lambda v: str(int(v) - 1)),
    ("n", lambda v: str(int(v) + 1)),
    ("k0", lambda v: str(int(v) + 1)),
])
def test_tampered_certificate_rejected(cert_abs, key, change):
    doc = json.loads(certio.dumps(cert_abs.to_json()))
    bad = copy.deepcopy(doc)
    bad[key] = change(bad[key])
    try:
        assert not verify_line(bad).ok
    except certio.SchemaError:
        pass


def test_tampered_escape_value_rejected(cert_abs):
    doc = json.loads(certio.dumps(cert_abs.to_json()))
    doc["escape"]["value"] = certio.dec(10 * certio.undec(doc["escape"]["value"]))
    assert not verify_line(doc).ok
