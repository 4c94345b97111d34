"""The map f(gamma) = gamma o gamma - gamma(0) on C_c^oo(R) and its discontinuity witness.

The witness generator runs the constructive argument as an algorithm: pick
k0 from the input neighbourhood, scale a monomial bump h into it, choose a far
interval n and a linear bump phi there, then add a steep dilation h_m of h at
the origin.  gamma_m = phi + h_m stays in V(k, e) while

    f(gamma_m)^(k0+1)(n) = r * m * s**(k0+1) * (k0+1)!  >= 1,

so f(gamma_m) leaves the target neighbourhood.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import certio
from .core import (
    SmoothExpr,
    add,
    canonical,
    compose,
    const,
    derivative,
    dilate_scale,
    from_json,
    jets_1d,
    linear_bump,
    monomial_bump,
    mul,
    scale,
    support_bound,
    to_json,
    unit_linear_bump,
    value,
    with_support,
)
from .topology import (
    DEFAULT_TOL,
    MembershipReport,
    SeqSpec,
    SpecError,
    UndecidedError,
    derivative_brackets,
    intervals_meeting,
    member_V,
    power_of_two_search,
)

DEFAULT_TARGET = SeqSpec(rule="abs", eps=1.0)
SEARCH_CAP = 1000
ESCAPE_RTOL = 1e-8
N_SEARCH_LIMIT = 10_000


class TargetError(ValueError):
    """The target neighbourhood admits no escape at the construction's order."""


def _require_compact(gamma: SmoothExpr) -> tuple[float, float]:
    if gamma.dim_in != 1 or gamma.dim_out != 1:
        raise ValueError("expected a scalar function of one variable")
    hull = support_bound(gamma)
    if hull is None:
        raise ValueError("expected a compactly supported function")
    return hull[0]


def f_line_raw(gamma: SmoothExpr) -> SmoothExpr:
    """gamma o gamma - gamma(0) with no support declaration added."""
    _require_compact(gamma)
    return add(compose(gamma, gamma), const(-value(gamma, 0.0)))


def f_line(gamma: SmoothExpr) -> SmoothExpr:
    """f(gamma) = gamma o gamma - gamma(0); its support bound lies inside gamma's."""
    lo, hi = _require_compact(gamma)
    return with_support(f_line_raw(gamma), [(lo, hi)])


def df_line(gamma: SmoothExpr, gamma1: SmoothExpr) -> SmoothExpr:
    """df(gamma; gamma1) = gamma1 o gamma + (gamma' o gamma) * gamma1 - gamma1(0)."""
    a = _require_compact(gamma)
    b = _require_compact(gamma1)
    raw = add(
        compose(gamma1, gamma),
        mul(compose(derivative(gamma), gamma), gamma1),
        const(-value(gamma1, 0.0)),
    )
    return with_support(raw, [(min(a[0], b[0]), max(a[1], b[1]))])


def _outside_samples(gamma: SmoothExpr, n_samples: int, rng) -> np.ndarray:
    lo, hi = _require_compact(gamma)
    boxes = [b[0] for b in gamma.support]
    out = []
    while len(out) < n_samples:
        xs = rng.uniform(lo - 5.0, hi + 5.0, size=4 * n_samples)
        keep = np.ones(xs.size, dtype=bool)
        for a, b in boxes:
            keep &= (xs < a) | (xs > b)
        out.extend(xs[keep].tolist())
    return np.array(out[:n_samples])


def support_preservation_check(gamma: SmoothExpr, n_samples: int = 200, seed: int = 0) -> dict:
    """Sample points off supp(gamma) and confirm f(gamma) vanishes there (to 1e-14)."""
    rng = np.random.default_rng(seed)
    xs = _outside_samples(gamma, n_samples, rng)
    vals = jets_1d(f_line_raw(gamma), xs, 0)[0]
    worst = float(np.max(np.abs(vals))) if xs.size else 0.0
    return {"passed": bool(worst <= 1e-14), "max_abs": worst, "n_samples": int(xs.size)}


# ---------------------------------------------------------------------------
# parameter rules


SAFETY_BITS = 30


def m_rule(k0: int, r: float, s: float) -> int:
    """m = ceil(X) + max(1, ceil(X / 2^30)) with X = 1 / (r s^(k0+1) (k0+1)!), exactly.

    The safety term keeps r m s^(k0+1) (k0+1)! at least 1 + 2^-30 above 1 once
    X is large, so the escape inequality survives double-precision roundoff.
    """
    x = 1 / (certio.exact(r) * certio.exact(s) ** (k0 + 1) * math.factorial(k0 + 1))
    return math.ceil(x) + max(1, math.ceil(x / 2**SAFETY_BITS))


def escape_exceeds_one(k0: int, r: float, s: float, m: int) -> bool:
    """r m s^(k0+1) (k0+1)! > 1 in exact arithmetic."""
    return certio.exact(r) * m * certio.exact(s) ** (k0 + 1) * math.factorial(k0 + 1) > 1


def expected_escape(k0: int, r: float, s: float, m: int) -> float:
    """r * m * s^(k0+1) * (k0+1)!, rounded once from the exact value."""
    return float(certio.exact(r) * m * certio.exact(s) ** (k0 + 1) * math.factorial(k0 + 1))


def choose_n(k0: int, target: SeqSpec) -> int:
    """Smallest n >= k0 + 2 where the target checks order k0 + 1 with eps_n <= 1."""
    for n in range(k0 + 2, k0 + 2 + N_SEARCH_LIMIT):
        if target.k_at(n) >= k0 + 1 and target.eps_at(n) <= 1.0:
            return n
    raise TargetError(f"target never checks order {k0 + 1} with eps <= 1 for n >= {k0 + 2}")


def escape_value(gamma_m: SmoothExpr, n: int, order: int) -> float:
    return float(jets_1d(f_line(gamma_m), [float(n)], order)[order, 0])


def _lower_ratio(f: SmoothExpr, spec: SeqSpec) -> float:
    """Certified lower bound of max_{n,j} sup|f^(j)| / eps_n from a coarse grid.

    The coarse grid is a subset of every grid member_V refines to, so any
    scale this ratio already rules out would be ruled out by member_V too.
    """
    best = 0.0
    for n in intervals_meeting(f):
        kn, eps = spec.k_at(n), spec.eps_at(n)
        br = derivative_brackets(f, range(kn + 1), (n - 0.5, n + 0.5), 1e-300, max_depth=4)
        best = max(best, max(b.lo for b in br.values()) / eps)
    return best


@lru_cache(maxsize=1)
def image_bound_unit() -> float:
    """Upper bracket of sup |u * plateau(u)| (the image bound of linear_bump(n, 1))."""
    return derivative_brackets(unit_linear_bump(), [0], (-0.5, 0.5), 1e-6)[0].hi


def search_r(h: SmoothExpr, spec: SeqSpec, tol: float) -> tuple[float, MembershipReport]:
    reports = {}

    def at(c):
        reports[c] = member_V(scale(c, h), spec, tol)
        return reports[c]

    q, _ = power_of_two_search(at, _lower_ratio(h, spec), SEARCH_CAP)
    r = math.ldexp(1.0, -q)
    return r, reports[r]


def search_s(n: int, spec: SeqSpec, tol: float) -> tuple[float, MembershipReport]:
    unit = linear_bump(n, 1.0)
    img = image_bound_unit()
    reports = {}

    def at(c):
        if c * img > 1.0:
            # im(phi) must stay inside [-1, 1]; this level is rejected outright
            reports[c] = MembershipReport("outside", (), -math.inf)
        else:
            reports[c] = member_V(linear_bump(n, c), spec, tol)
        return reports[c]

    q, _ = power_of_two_search(at, _lower_ratio(unit, spec), SEARCH_CAP)
    s = math.ldexp(1.0, -q)
    return s, reports[s]


# ---------------------------------------------------------------------------
# certificate


@dataclass
class WitnessCertificate:
    spec: SeqSpec
    target: SeqSpec
    k0: int
    r: float
    n: int
    s: float
    m: int
    exprs: dict
    membership: MembershipReport
    escape: dict
    tol: float
    seed: int = 0
    extension: bool = False
    extra: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        doc = {
            "schema": certio.SCHEMA,
            "kind": "witness-line",
            "spec": self.spec.to_json(),
            "target": self.target.to_json(),
            "target_extension": self.extension,
            "k0": str(self.k0),
            "r": certio.dec(self.r),
            "n": str(self.n),
            "s": certio.dec(self.s),
            "m": str(self.m),
            "tol": certio.dec(self.tol),
            "seed": str(self.seed),
            "exprs": {k: to_json(v) for k, v in self.exprs.items()},
            "membership_report": self.membership.to_json(),
            "escape": {
                "order": str(self.escape["order"]),
                "location": str(self.escape["location"]),
                "value": certio.dec(self.escape["value"]),
                "expected": certio.dec(self.escape["expected"]),
                "bound": certio.dec(self.escape["bound"]),
                "margin": certio.dec(self.escape["margin"]),
            },
        }
        doc.update(self.extra)
        return doc


def build_line_exprs(k0: int, r: float, n: int, s: float, m: int) -> dict:
    h = monomial_bump(k0)
    h_m = dilate_scale(h, m, r, k0)
    phi = linear_bump(n, s)
    return {"h": h, "h_m": h_m, "phi": phi, "gamma_m": add(phi, h_m)}


def witness_line(
    spec: SeqSpec,
    target: SeqSpec = DEFAULT_TARGET,
    tol: float = DEFAULT_TOL,
    seed: int = 0,
) -> WitnessCertificate:
    """Construct gamma_m in V(spec) with f(gamma_m) outside V(target).

    Raises UndecidedError when membership cannot be decided at ``tol``, and
    TargetError when the target admits no escape of order k0 + 1.
    """
    if not tol > 0:
        raise ValueError("tolerance must be positive")
    k0 = spec.k_at(0)
    h = monomial_bump(k0)
    r, _ = search_r(h, spec, tol)
    n = choose_n(k0, target)
    s, _ = search_s(n, spec, tol)
    m = m_rule(k0, r, s)
    exprs = build_line_exprs(k0, r, n, s, m)
    report = member_V(exprs["gamma_m"], spec, tol)
    if report.decision != "inside":
        raise UndecidedError(f"gamma_m membership came out {report.decision}", report)
    order = k0 + 1
    val = escape_value(exprs["gamma_m"], n, order)
    expected = expected_escape(k0, r, s, m)
    bound = target.eps_at(n)
    escape = {
        "order": order,
        "location": n,
        "value": val,
        "expected": expected,
        "bound": bound,
        "margin": abs(val) - bound,
    }
    return WitnessCertificate(
        spec=spec,
        target=target,
        k0=k0,
        r=r,
        n=n,
        s=s,
        m=m,
        exprs=exprs,
        membership=report,
        escape=escape,
        tol=tol,
        seed=seed,
        extension=target != DEFAULT_TARGET,
    )


# ---------------------------------------------------------------------------
# verification


@dataclass
class VerifyReport:
    checks: list = field(default_factory=list)
    undecided: bool = False

    def add(self, name: str, passed: bool, detail: str = "") -> None:
        self.checks.append((name, bool(passed), detail))

    @property
    def ok(self) -> bool:
        return not self.undecided and all(p for _, p, _ in self.checks)

    def to_json(self) -> dict:
        return {
            "ok": self.ok,
            "undecided": self.undecided,
            "checks": [{"name": n, "passed": p, "detail": d} for n, p, d in self.checks],
        }


def _power_of_two_exponent(x: float) -> int | None:
    mant, exp = math.frexp(x)
    if mant != 0.5 or exp > 1:
        return None
    return 1 - exp


def _load_exprs(doc: dict, names) -> dict:
    out = {}
    for name in names:
        try:
            out[name] = from_json(certio.field(doc, "exprs", name))
        except (ValueError, TypeError, KeyError, IndexError) as exc:
            raise certio.SchemaError(f"expression {name}: {exc}") from exc
    return out


def _membership_check(rep: VerifyReport, name: str, f: SmoothExpr, spec: SeqSpec, tol: float) -> None:
    report = member_V(f, spec, tol)
    if report.decision == "undecided":
        rep.undecided = True
    rep.add(name, report.decision == "inside", f"decision={report.decision} margin={report.margin!r}")


def _minimality_check(rep: VerifyReport, name: str, make, x: float, spec: SeqSpec, tol: float, extra=None):
    """The halving search from 1 would have stopped at x: 2x is not certified inside."""
    q = _power_of_two_exponent(x)
    if q is None:
        rep.add(name, False, f"{x!r} is not 2^-q with q >= 0")
        return
    if q == 0:
        rep.add(name, True, "search stopped at the first level")
        return
    if extra is not None and not extra(2 * x):
        rep.add(name, True, "doubled value violates the image bound")
        return
    decision = member_V(make(2 * x), spec, tol).decision
    rep.add(name, decision != "inside", f"doubled value is {decision}")


def verify_line(doc: dict) -> VerifyReport:
    """Re-check a line certificate from its serialized content alone."""
    try:
        if certio.field(doc, "kind") != "witness-line":
            raise certio.SchemaError("not a witness-line certificate")
        spec = SeqSpec.from_json(certio.field(doc, "spec"))
        target = SeqSpec.from_json(certio.field(doc, "target"))
        k0 = certio.unint(certio.field(doc, "k0"))
        r = certio.undec(certio.field(doc, "r"))
        n = certio.unint(certio.field(doc, "n"))
        s = certio.undec(certio.field(doc, "s"))
        m = certio.unint(certio.field(doc, "m"))
        tol = certio.undec(certio.field(doc, "tol"))
        stored_value = certio.undec(certio.field(doc, "escape", "value"))
        exprs = _load_exprs(doc, ("h", "h_m", "phi", "gamma_m"))
    except SpecError as exc:
        raise certio.SchemaError(str(exc)) from exc
    if not (tol > 0 and r > 0 and s > 0 and m >= 1 and k0 >= 0):
        raise certio.SchemaError("parameters out of range")

    rep = VerifyReport()
    rep.add("k0 = spec k_0", k0 == spec.k_at(0), f"k0={k0} spec={spec.k_at(0)}")
    rep.add("n >= k0 + 2", n >= k0 + 2, f"n={n}")
    try:
        n_min = choose_n(k0, target)
        rep.add("n is the smallest admissible index", n == n_min, f"n={n} smallest={n_min}")
    except TargetError as exc:
        rep.add("n is the smallest admissible index", False, str(exc))
    rep.add("target checks order k0 + 1 at n", target.k_at(n) >= k0 + 1, f"k_n={target.k_at(n)}")
    m_expected = m_rule(k0, r, s)
    rep.add("m follows the ceiling-plus-safety rule", m == m_expected, f"m={m} rule={m_expected}")
    rep.add("r m s^(k0+1) (k0+1)! > 1 exactly", escape_exceeds_one(k0, r, s, m))
    rebuilt = build_line_exprs(k0, r, n, s, m)
    for name in ("h", "h_m", "phi", "gamma_m"):
        rep.add(f"expression {name} matches parameters", canonical(rebuilt[name]) == canonical(exprs[name]))
    img = image_bound_unit()
    rep.add("image bound of phi <= 1", s * img <= 1.0, f"bound={s * img!r}")
    if not rep.ok:
        return rep

    h = exprs["h"]
    _membership_check(rep, "r h in V(k, e)", scale(r, h), spec, tol)
    _membership_check(rep, "phi in V(k, e)", exprs["phi"], spec, tol)
    _membership_check(rep, "gamma_m in V(k, e)", exprs["gamma_m"], spec, tol)
    _minimality_check(rep, "r is the first power of two inside", lambda c: scale(c, h), r, spec, tol)
    _minimality_check(
        rep,
        "s is the first power of two inside",
        lambda c: linear_bump(n, c),
        s,
        spec,
        tol,
        extra=lambda c: c * img <= 1.0,
    )
    order = k0 + 1
    val = escape_value(exprs["gamma_m"], n, order)
    expected = expected_escape(k0, r, s, m)
    bound = target.eps_at(n)
    rep.add("escape |f(gamma_m)^(k0+1)(n)| >= eps_n", abs(val) >= bound, f"value={val!r} bound={bound!r}")
    rep.add(
        "escape equals r m s^(k0+1) (k0+1)!",
        abs(val - expected) <= ESCAPE_RTOL * abs(expected),
        f"value={val!r} expected={expected!r}",
    )
    rep.add(
        "escape matches stored value",
        abs(val - stored_value) <= ESCAPE_RTOL * max(abs(val), 1.0),
        f"stored={stored_value!r}",
    )
    return rep
