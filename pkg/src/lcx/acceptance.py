"""Acceptance suite: one runner per criterion, each returning a CriterionResult.

Every runner draws its randomness from ``numpy.random.default_rng(seed)`` so a
run is reproducible from the seed alone.
"""

from __future__ import annotations

import copy
import math
import time
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import certio
from .algebra import BasicNbhdCinf, algebra_suite, leibniz_bound_check, mult_discontinuity_witness, verify_mult
from .bundle import FibrePathology, PatchManifold, escape_for_parameters, verify_bundle, witness_bundle
from .calculus import composition_derivative_check, integral_form_check
from .core import add, const, identity, jets_1d, plateau, power, scale
from .line import support_preservation_check, witness_line
from .oracle import richardson_derivative
from .randomized import random_bump, random_expr, random_poly, random_quadruple, random_support_bump
from .topology import SeqSpec, member_V
from .verify import EXIT_OK, exit_code, verify_document


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0
    data: dict = field(default_factory=dict)

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] criterion {self.number}: {self.name} -- {self.detail} ({self.seconds:.1f} s)"

    def to_json(self) -> dict:
        return {"number": str(self.number), "name": self.name, "pass": self.passed,
                "detail": self.detail, "seconds": f"{self.seconds:.3f}"}


def identity_value(k0: int, r: float, s: float, m: int) -> Fraction:
    """r * m * s^(k0+1) * (k0+1)!, exactly."""
    return Fraction(r) * m * Fraction(s) ** (k0 + 1) * math.factorial(k0 + 1)


def _rel(a: float, b: float) -> float:
    return abs(a - b) / abs(b) if b else abs(a - b)


# ---------------------------------------------------------------------------
# 1. line witness


def line_families(seed: int = 0) -> list[tuple[str, SeqSpec]]:
    rng = np.random.default_rng(seed)
    overrides = []
    for n in sorted(rng.choice(np.arange(-3, 4), size=3, replace=False).tolist()):
        overrides.append((int(n), int(rng.integers(0, 4)), float(rng.choice([0.05, 0.1, 0.5, 1.0, 2.0]))))
    return [
        ("constant(0,1)", SeqSpec.parse("constant:0:1")),
        ("constant(3,0.1)", SeqSpec.parse("constant:3:0.1")),
        ("abs, eps=1", SeqSpec.parse("abs:1")),
        ("affine 2|n|+3, eps=1/(|n|+1)", SeqSpec.parse("affine:2:3:1:harmonic")),
        (f"constant(1,0.5) with overrides {overrides}", SeqSpec.parse("constant:1:0.5", overrides)),
    ]


def criterion_1(seed: int = 0) -> CriterionResult:
    t0 = time.perf_counter()
    rows, ok = [], True
    for name, spec in line_families(seed):
        t = time.perf_counter()
        cert = witness_line(spec, seed=seed)
        elapsed = time.perf_counter() - t
        exprs = cert.exprs
        value = cert.escape["value"]
        want = identity_value(cert.k0, cert.r, cert.s, cert.m)
        rel = _rel(value, float(want))
        inside = member_V(exprs["gamma_m"], spec).decision == "inside"
        good = rel <= 1e-8 and abs(value) >= 1.0 and want >= 1 and inside and elapsed <= 10.0
        ok &= good
        rows.append({"family": name, "rel": rel, "value": value, "inside": inside, "seconds": elapsed, "pass": good})
    worst = max(r["rel"] for r in rows)
    slow = max(r["seconds"] for r in rows)
    detail = f"{sum(r['pass'] for r in rows)}/{len(rows)} families; max rel {worst:.1e}; slowest {slow:.2f} s"
    return CriterionResult(1, "witness-line exact identity", ok, detail, time.perf_counter() - t0, {"rows": rows})


# ---------------------------------------------------------------------------
# 2. bundle witness


def criterion_2(seed: int = 0) -> CriterionResult:
    t0 = time.perf_counter()
    spec = SeqSpec.parse("constant:0:1")
    P2 = FibrePathology(PatchManifold.default(2, 4))
    t = time.perf_counter()
    cert = witness_bundle(spec, P2, p=3, seed=seed)
    gen = time.perf_counter() - t
    want = identity_value(cert.k0, cert.r, cert.s, cert.m)
    rel2 = _rel(cert.escape["value"], float(want))
    verified = verify_bundle(cert.to_json()).ok
    elapsed2 = time.perf_counter() - t
    # d = 1: feed the line witness's parameters to the bundle construction
    rels1 = []
    for _, fam in line_families(seed)[:3]:
        line = witness_line(fam, seed=seed)
        P1 = FibrePathology(PatchManifold.default(1, line.k0 + 2))
        bundle_val = escape_for_parameters(line.k0, line.r, line.s, line.m, P1)
        rels1.append(_rel(bundle_val, line.escape["value"]))
    ok = rel2 <= 1e-6 and verified and abs(cert.escape["value"]) >= 1 and max(rels1) <= 1e-8 and elapsed2 <= 60.0
    detail = (f"d=2,p=3 rel {rel2:.1e}, verified={verified}, {gen:.2f} s; "
              f"d=1 vs line max rel {max(rels1):.1e}")
    return CriterionResult(2, "bundle witness", ok, detail, time.perf_counter() - t0)


# ---------------------------------------------------------------------------
# 3. composition derivative


def criterion_3(seed: int = 0, count: int = 20) -> CriterionResult:
    t0 = time.perf_counter()
    rng = np.random.default_rng(seed)
    reports = [composition_derivative_check(*random_quadruple(rng)) for _ in range(count)]
    ok = all(r.passed for r in reports)
    slopes = [r.slope for r in reports if r.slope is not None]
    limit = max(r.limit_error / (1 + r.scale) for r in reports)
    detail = (f"{sum(r.passed for r in reports)}/{count} quadruples; min slope "
              f"{min(slopes) if slopes else float('nan'):.3f}; max scaled limit error {limit:.1e}")
    return CriterionResult(3, "composition derivative convergence", ok, detail, time.perf_counter() - t0)


# ---------------------------------------------------------------------------
# 4. integral form


def integral_cases(seed: int = 0, count: int = 20):
    """(label, gamma, eta, eta1, t) for polynomial and bump gamma."""
    rng = np.random.default_rng(seed)
    t = 0.5
    poly, bump = [], []
    for _ in range(count):
        eta = random_bump(rng, amplitude=1.0, min_transition=0.5)
        eta1 = random_bump(rng, amplitude=0.4, min_transition=0.5)
        poly.append(("poly", random_poly(rng, int(rng.integers(1, 7))), eta, eta1, t))
    # a fixed case whose path crosses a transition of gamma
    bump.append(("bump-fixed", plateau(0.25, 0.5), scale(0.3, plateau(0.5, 1.0)), scale(0.4, plateau(0.5, 1.0)), t))
    for _ in range(count):
        g = random_bump(rng, center=0.0, min_transition=0.5)
        eta = random_bump(rng, amplitude=1.0, min_transition=0.5)
        eta1 = random_bump(rng, amplitude=0.4, min_transition=0.5)
        bump.append(("bump", g, eta, eta1, t))
    return poly, bump


REDUCTION_FLOOR = 1e-13


def criterion_4(seed: int = 0) -> CriterionResult:
    t0 = time.perf_counter()
    poly, bump = integral_cases(seed)
    poly_err = max(integral_form_check(g, e, e1, t).discrepancy for _, g, e, e1, t in poly)
    reps = [integral_form_check(g, e, e1, t) for _, g, e, e1, t in bump]
    bump_err = max(r.discrepancy for r in reps)
    # a discrepancy already at roundoff level cannot shrink further
    live = [r for r in reps if r.discrepancy > REDUCTION_FLOOR]
    min_red = min((r.reduction for r in live), default=math.inf)
    ok = poly_err <= 1e-8 and bump_err <= 1e-5 and bool(live) and min_red >= 4.0
    detail = (f"poly max {poly_err:.1e}; bump max {bump_err:.1e}; "
              f"min reduction {min_red:.0f}x over {len(live)} non-exact bump cases")
    return CriterionResult(4, "integral form (Gauss-Legendre 20)", ok, detail, time.perf_counter() - t0)


# ---------------------------------------------------------------------------
# 5. support preservation


def criterion_5(seed: int = 0, count: int = 100) -> CriterionResult:
    t0 = time.perf_counter()
    rng = np.random.default_rng(seed)
    worst, ok, samples = 0.0, True, 0
    for i in range(count):
        res = support_preservation_check(random_support_bump(rng), 200, seed=seed * 1000 + i)
        worst = max(worst, res["max_abs"])
        samples += res["n_samples"]
        ok &= res["passed"] and res["n_samples"] == 200
    detail = f"{count} functions, {samples} outside samples, max |f(gamma)| = {worst:.1e}"
    return CriterionResult(5, "support preservation", ok, detail, time.perf_counter() - t0)


# ---------------------------------------------------------------------------
# 6. multiplication witness and Leibniz bound


def random_U(rng) -> BasicNbhdCinf:
    lo = float(rng.uniform(-3, 0))
    hi = lo + float(rng.uniform(0.5, 4))
    return BasicNbhdCinf(((lo, hi),), int(rng.integers(0, 5)), float(rng.choice([0.01, 0.1, 0.5, 1.0])))


def random_spec(rng) -> SeqSpec:
    choice = int(rng.integers(3))
    eps = float(rng.choice([0.05, 0.1, 1.0, 2.0]))
    if choice == 0:
        return SeqSpec(rule="constant", k=int(rng.integers(0, 4)), eps=eps)
    if choice == 1:
        return SeqSpec(rule="abs", eps=eps)
    return SeqSpec(rule="affine", a=int(rng.integers(1, 3)), b=int(rng.integers(0, 3)), eps=eps, eps_rule="harmonic")


def criterion_6(seed: int = 0, witnesses: int = 10, pairs: int = 100) -> CriterionResult:
    t0 = time.perf_counter()
    rng = np.random.default_rng(seed)
    wit_ok = 0
    for _ in range(witnesses):
        cert = mult_discontinuity_witness(random_U(rng), random_spec(rng), seed=seed)
        doc = cert.to_json()
        zero_q = all(certio.undec(row["q_hi"]) == 0.0 for row in doc["u_checks"])
        escape = Fraction(cert.t) * Fraction(cert.r) * Fraction(certio.undec(doc["escape"]["phi_x0"])) ** 2 >= 1
        wit_ok += bool(verify_mult(doc).ok and zero_q and escape)
    lb_ok = 0
    worst_ratio = 0.0
    for _ in range(pairs):
        g = random_bump(rng, amplitude=float(rng.uniform(0.2, 3)))
        e = random_bump(rng, amplitude=float(rng.uniform(0.2, 3)))
        lo = float(rng.uniform(-1.5, 1.0))
        rep = leibniz_bound_check(g, e, (lo, lo + float(rng.uniform(0.2, 1.5))), int(rng.integers(0, 5)))
        lb_ok += rep.passed
        if rep.bound_hi > 0:
            worst_ratio = max(worst_ratio, rep.product.lo / rep.bound_hi)
    ok = wit_ok == witnesses and lb_ok == pairs
    detail = (f"{wit_ok}/{witnesses} witnesses verified; Leibniz {lb_ok}/{pairs}, "
              f"max q(product)/bound = {worst_ratio:.3f}")
    return CriterionResult(6, "multiplication witness and Leibniz bound", ok, detail, time.perf_counter() - t0)


# ---------------------------------------------------------------------------
# 7. algebra


def criterion_7(seed: int = 0, trials: int = 1000) -> CriterionResult:
    t0 = time.perf_counter()
    rep = algebra_suite(trials, seed)
    detail = (f"{trials} trials; assoc {rep.associativity:.1e}, inverse {rep.inverse:.1e}, "
              f"unit {rep.unit:.1e}, homomorphism {rep.homomorphism:.1e}")
    return CriterionResult(7, "algebra identities", rep.passed, detail, time.perf_counter() - t0)


# ---------------------------------------------------------------------------
# 8. jet engine

ORACLE_FLOOR = 1e-30


def jet_rel_error(engine: float, oracle: float) -> float:
    """Relative error; references below ORACLE_FLOOR (difference-quotient noise) count as zero."""
    return abs(engine - oracle) / max(abs(oracle), ORACLE_FLOOR)


def poly_jet_error(rng) -> float:
    """Largest error of a random polynomial's jets up to order 6, relative to
    sum_k |c_k k!/(k-j)! x^(k-j)| (the natural scale of evaluating f^(j)(x))."""
    coeffs = rng.uniform(-1, 1, size=int(rng.integers(1, 9)))
    x = float(rng.uniform(-2, 2))
    f = add(const(float(coeffs[0])), *(scale(float(c), power(identity(), k)) for k, c in enumerate(coeffs) if k))
    jets = jets_1d(f, np.array([x]), 6)[:, 0]
    P = np.polynomial.Polynomial(coeffs)
    absP = np.polynomial.Polynomial(np.abs(coeffs))
    worst = 0.0
    for j in range(7):
        exact = P.deriv(j)(x)
        size = absP.deriv(j)(abs(x))
        worst = max(worst, abs(jets[j] - exact) / size if size else abs(jets[j] - exact))
    return worst


def criterion_8(seed: int = 0, count: int = 500, polys: int = 200) -> CriterionResult:
    t0 = time.perf_counter()
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(count):
        f = random_expr(rng, int(rng.integers(0, 3)))
        x = float(rng.uniform(-1, 1))
        j = int(rng.integers(0, 7))
        engine = float(jets_1d(f, np.array([x]), j)[j, 0])
        worst = max(worst, jet_rel_error(engine, richardson_derivative(f, x, j)))
    poly_worst = max(poly_jet_error(rng) for _ in range(polys))
    ok = worst <= 1e-5 and poly_worst <= 1e-12
    detail = f"{count} random jets max rel {worst:.1e}; {polys} polynomial jets max rel {poly_worst:.1e}"
    return CriterionResult(8, "jet engine vs Richardson differences", ok, detail, time.perf_counter() - t0)


# ---------------------------------------------------------------------------
# 9. tamper resistance


def tamper_variants(doc: dict) -> list[tuple[str, dict]]:
    """One-step adverse mutations of r, s, m, n and k0."""
    out = []

    def put(label, key, value):
        d = copy.deepcopy(doc)
        d[key] = value
        out.append((label, d))

    put("r*2", "r", certio.dec(2 * float(doc["r"])))
    put("s*2", "s", certio.dec(2 * float(doc["s"])))
    put("m-1", "m", str(int(doc["m"]) - 1))
    put("n-1", "n", str(int(doc["n"]) - 1))
    put("k0+1", "k0", str(int(doc["k0"]) + 1))
    if int(doc["k0"]) > 0:
        put("k0-1", "k0", str(int(doc["k0"]) - 1))
    return out


def _rejected(doc: dict) -> bool:
    try:
        return exit_code(verify_document(doc)) != EXIT_OK
    except (certio.SchemaError, ValueError):
        return True


def criterion_9(seed: int = 0) -> CriterionResult:
    t0 = time.perf_counter()
    docs = [witness_line(spec, seed=seed).to_json() for _, spec in line_families(seed)[:4]]
    docs.append(witness_bundle(SeqSpec.parse("constant:0:1"), FibrePathology(PatchManifold.default(2, 3)), p=2,
                               seed=seed).to_json())
    fresh_ok = all(exit_code(verify_document(d)) == EXIT_OK for d in docs)
    missed = []
    total = 0
    for i, doc in enumerate(docs):
        for label, bad in tamper_variants(doc):
            total += 1
            if not _rejected(bad):
                missed.append(f"{doc['kind']}#{i}:{label}")
    ok = fresh_ok and not missed
    detail = f"fresh certificates verify={fresh_ok}; {total - len(missed)}/{total} tampered rejected"
    if missed:
        detail += f"; accepted: {missed}"
    return CriterionResult(9, "tamper resistance", ok, detail, time.perf_counter() - t0)


RUNNERS = {
    1: criterion_1,
    2: criterion_2,
    3: criterion_3,
    4: criterion_4,
    5: criterion_5,
    6: criterion_6,
    7: criterion_7,
    8: criterion_8,
    9: criterion_9,
}


def run_all(seed: int = 0, which=None) -> list[CriterionResult]:
    return [RUNNERS[i](seed) for i in (which or sorted(RUNNERS))]
