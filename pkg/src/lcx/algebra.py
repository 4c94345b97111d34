"""Pointwise multiplication of test functions and a unital algebra over a pairing.

Two bilinear maps live here.

* ``mult`` multiplies a smooth function by a test function.  On each step
  C^oo(R) x C^oo_[-n,n](R) it obeys the Leibniz estimate checked by
  ``leibniz_bound_check``; jointly it is discontinuous at zero, and
  ``mult_discontinuity_witness`` exhibits that failure concretely.
* ``algebra_mult`` is the product on quadruples (lambda, x, z, c) with
  lambda a locally square-integrable function, x a compactly supported one
  and z, c scalars; it is the multiplication of upper-triangular 3x3
  matrices [[c, lambda, z], [0, c, x], [0, 0, c]].  Functions are sampled on
  uniform grids over [-n, n] and the pairing lambda(x) is a trapezoid sum.
  (Joint discontinuity of that product on the direct limit is a consequence
  of the pairing being discontinuous, which cannot be certified on grids.)
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import certio
from .core import SmoothExpr, canonical, from_json, jets_1d, mul, plateau, scale, support_bound, to_json, translate
from .topology import (
    DEFAULT_TOL,
    BasicNbhdCinf,
    Bracket,
    MembershipReport,
    SeqSpec,
    SpecError,
    member_V,
    power_of_two_search,
    seminorm_qKk,
)

SEARCH_CAP = 1000
PHI_INNER = 0.125
PHI_OUTER = 0.25
K_MARGIN = 0.5
U_PROBE_T = (1.0, 10.0, 1e3, 1e6)


class GridError(ValueError):
    """Grid functions without a common grid, or a pairing off its support."""


# ---------------------------------------------------------------------------
# multiplication of smooth functions


def mult(gamma: SmoothExpr, eta: SmoothExpr) -> SmoothExpr:
    """mu(gamma, eta) = gamma * eta; its support is contained in eta's."""
    return mul(gamma, eta)


@dataclass(frozen=True)
class LeibnizReport:
    K: tuple[float, float]
    k: int
    product: Bracket
    left: Bracket
    right: Bracket

    @property
    def bound_hi(self) -> float:
        return 2.0**self.k * self.left.hi * self.right.hi

    @property
    def bound_lo(self) -> float:
        return 2.0**self.k * self.left.lo * self.right.lo

    @property
    def passed(self) -> bool:
        """The sampled seminorm of the product does not refute the bound."""
        return self.product.lo <= self.bound_hi

    @property
    def certified(self) -> bool:
        """Every admissible value of the product seminorm respects the bound."""
        return self.product.converged and self.product.hi <= self.bound_lo

    @property
    def margin(self) -> float:
        return self.bound_hi - self.product.lo

    def to_json(self) -> dict:
        return {
            "K": [repr(float(self.K[0])), repr(float(self.K[1]))],
            "k": str(self.k),
            "product": self.product.to_json(),
            "left": self.left.to_json(),
            "right": self.right.to_json(),
            "bound": repr(self.bound_hi),
            "margin": repr(self.margin),
            "pass": self.passed,
            "certified": self.certified,
        }


def _seminorm(f: SmoothExpr, K, k: int, rtol: float) -> Bracket:
    """q_{K,k}(f) bracketed to ``rtol`` relative to a coarse lower bound."""
    coarse = seminorm_qKk(f, K, k, math.inf, max_depth=0)
    if coarse.lo == 0.0 and coarse.hi == 0.0:
        return coarse
    return seminorm_qKk(f, K, k, rtol * max(coarse.lo, coarse.hi * 1e-3))


def leibniz_bound_check(gamma: SmoothExpr, eta: SmoothExpr, K, k: int, rtol: float = 1e-3) -> LeibnizReport:
    """q_{K,k}(gamma eta) <= 2^k q_{K,k}(gamma) q_{K,k}(eta), from derivative brackets.

    The binomial sum over i <= j <= k is at most 2^k.
    """
    K = (float(K[0]), float(K[1]))
    if not K[0] <= K[1]:
        raise SpecError("K must be a non-empty interval")
    if k < 0:
        raise SpecError("k must be non-negative")
    return LeibnizReport(
        K,
        k,
        _seminorm(mult(gamma, eta), K, k, rtol),
        _seminorm(gamma, K, k, rtol),
        _seminorm(eta, K, k, rtol),
    )


# ---------------------------------------------------------------------------
# discontinuity witness for mu


def witness_phi(x0: float) -> SmoothExpr:
    """Plateau bump equal to 1 near x0, supported in [x0 - 1/4, x0 + 1/4]."""
    return translate(plateau(PHI_INNER, PHI_OUTER), x0)


def _search_r(phi: SmoothExpr, spec: SeqSpec, tol: float) -> tuple[float, MembershipReport]:
    reports = {}

    def at(c):
        reports[c] = member_V(scale(c, phi), spec, tol)
        return reports[c]

    q, _ = power_of_two_search(at, 0.0, SEARCH_CAP)
    r = math.ldexp(1.0, -q)
    return r, reports[r]


def _t_rule(r: float, phi_x0: float) -> int:
    """Smallest integer t with t * r * phi(x0)^2 >= 1, computed exactly."""
    need = 1 / (certio.exact(r) * certio.exact(phi_x0) ** 2)
    return math.ceil(need)


def _value(f: SmoothExpr, x: float) -> float:
    return float(jets_1d(f, np.array([x]), 0)[0, 0])


@dataclass
class MultWitnessCertificate:
    U: BasicNbhdCinf
    spec: SeqSpec
    x0: float
    r: float
    t: int
    phi: SmoothExpr
    membership: MembershipReport
    u_checks: list
    escape: dict
    tol: float
    seed: int = 0

    def to_json(self) -> dict:
        return {
            "schema": certio.SCHEMA,
            "kind": "witness-mult",
            "U": self.U.to_json(),
            "spec": self.spec.to_json(),
            "W": {"sup_bound": "1.0"},
            "x0": certio.dec(self.x0),
            "r": certio.dec(self.r),
            "t": str(self.t),
            "tol": certio.dec(self.tol),
            "seed": str(self.seed),
            "exprs": {"phi": to_json(self.phi)},
            "membership_report": self.membership.to_json(),
            "u_checks": self.u_checks,
            "escape": self.escape,
        }


def _u_checks(U: BasicNbhdCinf, phi: SmoothExpr, ts) -> list:
    out = []
    for t in ts:
        q = seminorm_qKk(scale(float(t), phi), U.K, U.k, 1e-6)
        out.append({"t": certio.dec(t), "q_lo": certio.dec(q.lo), "q_hi": certio.dec(q.hi),
                    "inside": bool(q.converged and q.hi == 0.0 and q.hi < U.eps)})
    return out


def mult_discontinuity_witness(U: BasicNbhdCinf, spec: SeqSpec, tol: float = DEFAULT_TOL, seed: int = 0):
    """(t phi, r phi) in U x V whose product leaves W = {sup|gamma| < 1}.

    x0 lies one unit right of K, so phi's support keeps a distance of at
    least 3/4 from K and every derivative of t phi vanishes on K.
    """
    if len(U.K) != 1:
        raise SpecError("the multiplication witness is one-dimensional")
    x0 = float(U.K[0][1]) + 1.0
    phi = witness_phi(x0)
    r, membership = _search_r(phi, spec, tol)
    phi_x0 = _value(phi, x0)
    t = _t_rule(r, phi_x0)
    u_checks = _u_checks(U, phi, sorted(set(U_PROBE_T) | {float(t)}))
    value = _value(mult(scale(float(t), phi), scale(r, phi)), x0)
    escape = {
        "location": certio.dec(x0),
        "value": certio.dec(value),
        "expected": certio.dec(t * r * phi_x0**2),
        "phi_x0": certio.dec(phi_x0),
    }
    return MultWitnessCertificate(U, spec, x0, r, t, phi, membership, u_checks, escape, tol, seed)


def verify_mult(doc: dict):
    """Re-derive every claim of a multiplication-witness certificate."""
    from .line import VerifyReport

    rep = VerifyReport()
    U_doc = certio.field(doc, "U")
    try:
        K = tuple((certio.undec(lo), certio.undec(hi)) for lo, hi in certio.field(U_doc, "K"))
        U = BasicNbhdCinf(K, certio.unint(certio.field(U_doc, "k")), certio.undec(certio.field(U_doc, "eps")))
        spec = SeqSpec.from_json(certio.field(doc, "spec"))
    except (TypeError, ValueError) as exc:
        raise certio.SchemaError(str(exc)) from exc
    x0 = certio.undec(certio.field(doc, "x0"))
    r = certio.undec(certio.field(doc, "r"))
    t = certio.unint(certio.field(doc, "t"))
    tol = certio.undec(certio.field(doc, "tol"))
    try:
        phi = from_json(certio.field(doc, "exprs", "phi"))
    except (KeyError, TypeError, ValueError) as exc:
        raise certio.SchemaError(f"bad expression: {exc}") from exc

    rep.add("x0 outside K", all(x0 > hi or x0 < lo for lo, hi in U.K))
    rep.add("phi canonical", canonical(phi) == canonical(witness_phi(x0)))
    hull = support_bound(phi)
    far = hull is not None and all(
        hull[0][0] >= hi + K_MARGIN or hull[0][1] <= lo - K_MARGIN for lo, hi in U.K
    )
    rep.add("supp(phi) separated from K", far)
    phi_x0 = _value(phi, x0)
    rep.add("phi(x0) = 1", phi_x0 == 1.0)
    member = member_V(scale(r, phi), spec, tol)
    if member.decision == "undecided":
        rep.undecided = True
    rep.add("r phi in V", member.decision == "inside")
    rep.add("t rule", t == _t_rule(r, phi_x0))
    rep.add("escape exact", Fraction(t) * certio.exact(r) * certio.exact(phi_x0) ** 2 >= 1)
    for row in _u_checks(U, phi, sorted(set(U_PROBE_T) | {float(t)})):
        rep.add(f"t phi in U at t={row['t']}", row["inside"] and certio.undec(row["q_hi"]) == 0.0)
    value = _value(mult(scale(float(t), phi), scale(r, phi)), x0)
    rep.add("product leaves W", abs(value) >= 1.0)
    return rep


# ---------------------------------------------------------------------------
# grid functions and the algebra F x E_n x K x K

ROLES = ("E", "F")


def _step(n: int, N: int) -> Fraction:
    return Fraction(2 * n, N)


@dataclass(frozen=True, eq=False)
class GridFun:
    """Samples of a function on the uniform grid -n + i * 2n/N, i = 0..N.

    Role "E" marks a compactly supported element of L^2[-n, n] (values vanish
    off ``support``); role "F" marks a local element, known on [-n, n].
    """

    n: int
    N: int
    values: np.ndarray
    role: str = "E"
    support: tuple[float, float] | None = None

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise GridError("n must be a positive integer")
        if int(self.N) != self.N or self.N < 2:
            raise GridError("need N >= 2")
        if self.role not in ROLES:
            raise GridError(f"unknown role {self.role!r}")
        vals = np.array(self.values, dtype=np.float64)
        if vals.shape != (self.N + 1,):
            raise GridError(f"expected {self.N + 1} values, got shape {vals.shape}")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        if self.role == "E":
            sup = (-float(self.n), float(self.n)) if self.support is None else tuple(map(float, self.support))
            if not -self.n <= sup[0] <= sup[1] <= self.n:
                raise GridError("support must lie in [-n, n]")
            outside = (self.grid < sup[0]) | (self.grid > sup[1])
            if np.any(vals[outside] != 0.0):
                raise GridError("E-element has values off its support")
            object.__setattr__(self, "support", sup)
        else:
            object.__setattr__(self, "support", None)

    @property
    def step(self) -> Fraction:
        return _step(self.n, self.N)

    @property
    def grid(self) -> np.ndarray:
        return np.linspace(-self.n, self.n, self.N + 1)

    @classmethod
    def sample(cls, fn, n: int, N: int, role: str = "E", support=None) -> "GridFun":
        """Sample ``fn`` on the grid; an E-element is cut off outside ``support``.

        At a support endpoint strictly inside (-n, n) the cut-off function
        jumps, and the sample there is the average of the one-sided limits
        (half the value), which keeps the trapezoid pairing second order.
        """
        xs = np.linspace(-n, n, N + 1)
        vals = np.asarray(fn(xs), dtype=np.float64) * np.ones_like(xs)
        if role == "E" and support is not None:
            vals = np.where((xs >= support[0]) & (xs <= support[1]), vals, 0.0)
            for end in support:
                edge = np.isclose(xs, end, rtol=0, atol=1e-12 * n) & (np.abs(xs) < n)
                vals = np.where(edge, 0.5 * vals, vals)
        return cls(n, N, vals, role, support)

    @classmethod
    def zeros(cls, n: int, N: int, role: str = "E") -> "GridFun":
        return cls(n, N, np.zeros(N + 1), role, (0.0, 0.0) if role == "E" else None)

    def to_n(self, n: int) -> "GridFun":
        """The same function on [-n, n] with the same step.

        E-elements are padded with zeros; F-elements can only be restricted.
        """
        if n == self.n:
            return self
        per_unit = Fraction(self.N, 2 * self.n)  # samples per unit length
        if per_unit.denominator != 1:
            raise GridError("grid does not align with integer endpoints")
        pad = (n - self.n) * int(per_unit)
        if pad > 0:
            if self.role == "F":
                raise GridError("a local element is only known on its own interval")
            vals = np.concatenate([np.zeros(pad), self.values, np.zeros(pad)])
        else:
            vals = self.values[-pad: len(self.values) + pad]
        if pad < 0 and self.role == "E" and (self.support[0] < -n or self.support[1] > n):
            raise GridError(f"support {self.support} leaves [-{n}, {n}]")
        return GridFun(n, 2 * int(per_unit) * n, vals, self.role, self.support)

    def __add__(self, other: "GridFun") -> "GridFun":
        a, b = _align(self, other)
        return GridFun(a.n, a.N, a.values + b.values, a.role, _hull(a.support, b.support))

    def __mul__(self, c: float) -> "GridFun":
        return GridFun(self.n, self.N, float(c) * self.values, self.role, self.support)

    __rmul__ = __mul__

    def to_json(self) -> dict:
        doc = {"n": str(self.n), "N": str(self.N), "role": self.role,
               "values": [repr(float(v)) for v in self.values]}
        if self.role == "E":
            doc["support"] = [repr(self.support[0]), repr(self.support[1])]
        return doc

    @classmethod
    def from_json(cls, doc: dict) -> "GridFun":
        role = certio.field(doc, "role")
        support = None
        if role == "E":
            support = tuple(certio.undec(v) for v in certio.field(doc, "support"))
        values = [certio.undec(v) for v in certio.field(doc, "values")]
        return cls(certio.unint(certio.field(doc, "n")), certio.unint(certio.field(doc, "N")), values, role, support)


def _hull(a, b):
    if a is None or b is None:
        return a if b is None else b
    return (min(a[0], b[0]), max(a[1], b[1]))


def _align(a: GridFun, b: GridFun) -> tuple[GridFun, GridFun]:
    """Bring two grid functions of one role to a common grid."""
    if a.role != b.role:
        raise GridError("cannot combine E- and F-elements")
    if a.step != b.step:
        raise GridError(f"no common grid: steps {a.step} and {b.step}")
    n = max(a.n, b.n) if a.role == "E" else min(a.n, b.n)
    return a.to_n(n), b.to_n(n)


def pairing(lam: GridFun, x: GridFun) -> float:
    """lambda(x) = int lambda * x, trapezoid rule on the common grid."""
    if lam.role != "F" or x.role != "E":
        raise GridError("pairing takes an F-element and an E-element")
    if lam.step != x.step:
        raise GridError(f"no common grid: steps {lam.step} and {x.step}")
    lo, hi = x.support
    if lo < -lam.n or hi > lam.n:
        raise GridError(f"supp(x) = [{lo}, {hi}] leaves [-{lam.n}, {lam.n}]")
    x = x.to_n(lam.n)
    return float(np.trapezoid(lam.values * x.values, dx=float(x.step)))


@dataclass(frozen=True, eq=False)
class AlgebraElem:
    """(lambda, x, z, c) ~ [[c, lambda, z], [0, c, x], [0, 0, c]]."""

    lam: GridFun
    x: GridFun
    z: float
    c: float

    def __post_init__(self):
        if self.lam.role != "F" or self.x.role != "E":
            raise GridError("lambda must be an F-element and x an E-element")
        if self.lam.step != self.x.step:
            raise GridError(f"no common grid: steps {self.lam.step} and {self.x.step}")
        object.__setattr__(self, "z", float(self.z))
        object.__setattr__(self, "c", float(self.c))

    @classmethod
    def unit(cls, n: int, N: int) -> "AlgebraElem":
        return cls(GridFun.zeros(n, N, "F"), GridFun.zeros(n, N, "E"), 0.0, 1.0)

    def __mul__(self, other: "AlgebraElem") -> "AlgebraElem":
        return algebra_mult(self, other)

    def to_json(self) -> dict:
        return {"lambda": self.lam.to_json(), "x": self.x.to_json(), "z": repr(self.z), "c": repr(self.c)}

    @classmethod
    def from_json(cls, doc: dict) -> "AlgebraElem":
        return cls(
            GridFun.from_json(certio.field(doc, "lambda")),
            GridFun.from_json(certio.field(doc, "x")),
            certio.undec(certio.field(doc, "z")),
            certio.undec(certio.field(doc, "c")),
        )


def algebra_mult(a: AlgebraElem, b: AlgebraElem) -> AlgebraElem:
    """(c1 l2 + c2 l1, c1 x2 + c2 x1, c1 z2 + l1(x2) + z1 c2, c1 c2)."""
    lam = a.c * b.lam + b.c * a.lam
    x = a.c * b.x + b.c * a.x
    z = a.c * b.z + pairing(a.lam, b.x) + a.z * b.c
    return AlgebraElem(lam, x, z, a.c * b.c)


def algebra_inverse(a: AlgebraElem) -> AlgebraElem:
    """(-l / c^2, -x / c^2, l(x) / c^3 - z / c^2, 1 / c) for c != 0."""
    if a.c == 0:
        raise ZeroDivisionError("not a unit: c = 0")
    c2 = a.c * a.c
    return AlgebraElem((-1.0 / c2) * a.lam, (-1.0 / c2) * a.x, pairing(a.lam, a.x) / (c2 * a.c) - a.z / c2, 1.0 / a.c)


@dataclass(frozen=True, eq=False)
class ActionVector:
    u: float
    y: GridFun
    w: float

    def to_json(self) -> dict:
        return {"u": repr(float(self.u)), "y": self.y.to_json(), "w": repr(float(self.w))}


def matrix_action(a: AlgebraElem, v: ActionVector) -> ActionVector:
    """(u, y, w) -> (c u + lambda(y) + z w, c y + x w, c w)."""
    if v.y.role != "E":
        raise GridError("the middle coordinate must be an E-element")
    u = a.c * v.u + pairing(a.lam, v.y) + a.z * v.w
    y = a.c * v.y + v.w * a.x
    return ActionVector(u, y, a.c * v.w)


# ---------------------------------------------------------------------------
# comparisons and random elements


def _gf_diff(a: GridFun, b: GridFun) -> tuple[float, float]:
    a, b = _align(a, b)
    return float(np.max(np.abs(a.values - b.values))), float(max(np.max(np.abs(a.values)), np.max(np.abs(b.values))))


def elem_rel_error(a: AlgebraElem, b: AlgebraElem) -> float:
    """Largest component-wise difference relative to the largest component entry."""
    dl, sl = _gf_diff(a.lam, b.lam)
    dx, sx = _gf_diff(a.x, b.x)
    diff = max(dl, dx, abs(a.z - b.z), abs(a.c - b.c))
    size = max(sl, sx, abs(a.z), abs(b.z), abs(a.c), abs(b.c))
    return diff / size if size else diff


def action_rel_error(p: ActionVector, q: ActionVector) -> float:
    dy, sy = _gf_diff(p.y, q.y)
    diff = max(abs(p.u - q.u), dy, abs(p.w - q.w))
    size = max(abs(p.u), abs(q.u), sy, abs(p.w), abs(q.w))
    return diff / size if size else diff


DEFAULT_N_PER_UNIT = 128


def random_gridfun(rng: np.random.Generator, n: int, role: str, per_unit: int = DEFAULT_N_PER_UNIT) -> GridFun:
    N = 2 * n * per_unit
    xs = np.linspace(-n, n, N + 1)
    vals = rng.normal(size=N + 1)
    if role == "E":
        m = int(rng.integers(1, n + 1))
        lo, hi = sorted(rng.uniform(-m, m, size=2).tolist())
        vals = np.where((xs >= lo) & (xs <= hi), vals, 0.0)
        return GridFun(n, N, vals, "E", (lo, hi))
    return GridFun(n, N, vals, "F")


def random_elem(rng: np.random.Generator, n: int | None = None, unit: bool = False) -> AlgebraElem:
    """Random quadruple on a grid of step 1/128; with ``unit``, |c| >= 1/2."""
    n = int(rng.integers(1, 4)) if n is None else n
    c = float(rng.uniform(0.5, 2.0)) * (1 if rng.random() < 0.5 else -1) if unit else float(rng.normal())
    return AlgebraElem(random_gridfun(rng, n, "F"), random_gridfun(rng, n, "E"), float(rng.normal()), c)


def random_vector(rng: np.random.Generator, n: int) -> ActionVector:
    return ActionVector(float(rng.normal()), random_gridfun(rng, n, "E"), float(rng.normal()))


@dataclass
class AlgebraReport:
    trials: int
    seed: int
    associativity: float
    unit: float
    inverse: float
    homomorphism: float
    rtol: float = 1e-12
    extra: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return max(self.associativity, self.unit, self.inverse, self.homomorphism) <= self.rtol

    def to_json(self) -> dict:
        return {
            "schema": certio.SCHEMA,
            "kind": "algebra-report",
            "trials": str(self.trials),
            "seed": str(self.seed),
            "rtol": repr(self.rtol),
            "max_rel_error": {
                "associativity": repr(self.associativity),
                "unit": repr(self.unit),
                "inverse": repr(self.inverse),
                "homomorphism": repr(self.homomorphism),
            },
            "pass": self.passed,
        }


def algebra_suite(trials: int = 1000, seed: int = 0, rtol: float = 1e-12) -> AlgebraReport:
    """Associativity, unit, two-sided inverse and the matrix homomorphism on one common n.

    Elements in one trial share the interval [-n, n] so every pairing is
    defined; n varies between trials.
    """
    rng = np.random.default_rng(seed)
    worst = dict(associativity=0.0, unit=0.0, inverse=0.0, homomorphism=0.0)
    for _ in range(trials):
        n = int(rng.integers(1, 4))
        a, b, d = (random_elem(rng, n) for _ in range(3))
        worst["associativity"] = max(worst["associativity"], elem_rel_error((a * b) * d, a * (b * d)))
        one = AlgebraElem.unit(n, a.lam.N)
        worst["unit"] = max(worst["unit"], elem_rel_error(a * one, a), elem_rel_error(one * a, a))
        u = random_elem(rng, n, unit=True)
        inv = algebra_inverse(u)
        worst["inverse"] = max(worst["inverse"], elem_rel_error(u * inv, one), elem_rel_error(inv * u, one))
        v = random_vector(rng, n)
        lhs = matrix_action(a * b, v)
        rhs = matrix_action(a, matrix_action(b, v))
        worst["homomorphism"] = max(worst["homomorphism"], action_rel_error(lhs, rhs))
    return AlgebraReport(trials, seed, rtol=rtol, **worst)
