"""The section map f on a trivial bundle M x R^p over a patch manifold, and its witness.

M is modelled by finitely many disjoint open cubes U_n = c_n + (-w_n, w_n)^d
with charts kappa_n(u) = tan(pi (u - c_n) / (2 w_n)) (componentwise).  A fibre
functional lambda = e_i^* with v = e_i turns sections into scalars, and

    f(sigma)(x) = Psi_0(h_n(x) * lambda(sigma(x)))        for x in U_n, n >= 1,
    Psi_0(t)    = lambda(sigma(kappa_0^{-1}(t e_1))) - lambda(sigma(x_0)),

with f(sigma) = 0 off the union of the K_n = supp(h o kappa_n).  The witness
places a steep dilation gamma_m in patch 0 and a linear bump eta in patch
l = k0 + 1, so that f(sigma_m) o kappa_l^{-1} = r m s^(k0+1) y_1^(k0+1) near 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import certio
from .core import (
    SmoothExpr,
    add,
    affine,
    atan_stretch,
    canonical,
    component,
    compose,
    const,
    coord,
    dilate,
    directional_jets,
    from_json,
    mul,
    plateau,
    power,
    scale,
    stack,
    tan_stretch,
    to_json,
    value,
    with_support,
    zero,
)
from .line import ESCAPE_RTOL, VerifyReport, _power_of_two_exponent, escape_exceeds_one, expected_escape, m_rule
from .topology import (
    DEFAULT_TOL,
    MembershipReport,
    SeqSpec,
    SpecError,
    UndecidedError,
    member_W,
    partial_brackets,
    power_of_two_search,
)

SEARCH_CAP = 1000
ATAN2 = math.atan(2.0)


class PatchError(ValueError):
    """Overlapping or malformed patch data."""


@dataclass(frozen=True)
class Patch:
    center: tuple[float, ...]
    halfwidth: float

    def box(self, radius: float) -> tuple[tuple[float, float], ...]:
        return tuple((c - radius, c + radius) for c in self.center)

    @property
    def K(self) -> tuple[tuple[float, float], ...]:
        """supp(h o kappa): kappa^{-1}([-2, 2]^d)."""
        return self.box(2.0 * self.halfwidth * ATAN2 / math.pi)

    @property
    def L(self) -> tuple[tuple[float, float], ...]:
        """kappa^{-1}([-1, 1]^d)."""
        return self.box(0.5 * self.halfwidth)


@dataclass(frozen=True)
class PatchManifold:
    d: int
    patches: tuple[Patch, ...]

    def __post_init__(self):
        if self.d < 1:
            raise PatchError("dimension must be >= 1")
        if not self.patches:
            raise PatchError("need at least one patch")
        for p in self.patches:
            if len(p.center) != self.d:
                raise PatchError("patch center has the wrong dimension")
            if not (p.halfwidth > 0 and math.isfinite(p.halfwidth)):
                raise PatchError("patch half-widths must be positive")
        for i, a in enumerate(self.patches):
            for b in self.patches[i + 1 :]:
                # open cubes are disjoint iff they separate along some axis
                if not any(
                    abs(ca - cb) >= a.halfwidth + b.halfwidth for ca, cb in zip(a.center, b.center)
                ):
                    raise PatchError(f"patches at {a.center} and {b.center} overlap")

    @classmethod
    def default(cls, d: int, count: int, spacing: float = 3.0, halfwidth: float = 1.0) -> "PatchManifold":
        """``count`` unit cubes along the first axis, centers (spacing * n, 0, ..., 0)."""
        if count < 1:
            raise PatchError("need at least one patch")
        return cls(d, tuple(Patch((spacing * n,) + (0.0,) * (d - 1), halfwidth) for n in range(count)))

    @classmethod
    def parse(cls, text: str, d: int) -> "PatchManifold":
        """``N`` (default layout) or ``c1,...,cd@w;c1,...,cd@w;...``."""
        text = text.strip()
        try:
            if "@" not in text:
                return cls.default(d, int(text))
            patches = []
            for item in text.split(";"):
                center, w = item.split("@")
                patches.append(Patch(tuple(float(c) for c in center.split(",")), float(w)))
        except ValueError as exc:
            if isinstance(exc, PatchError):
                raise
            raise PatchError(f"cannot parse patches {text!r}: {exc}") from exc
        return cls(d, tuple(patches))

    def kappa(self, n: int) -> SmoothExpr:
        """kappa_n: R^d -> R^d, meaningful on U_n."""
        p = self.patches[n]
        w = p.halfwidth
        parts = [
            compose(affine(tan_stretch(), 1.0 / w, -c / w), coord(i, self.d))
            for i, c in enumerate(p.center)
        ]
        return stack(*parts) if self.d > 1 else parts[0]

    def kappa_inv(self, n: int) -> SmoothExpr:
        """kappa_n^{-1}(y) = c_n + w_n (2/pi) arctan(y)."""
        p = self.patches[n]
        parts = [
            add(const(c, self.d), scale(p.halfwidth, compose(atan_stretch(), coord(i, self.d))))
            for i, c in enumerate(p.center)
        ]
        return stack(*parts) if self.d > 1 else parts[0]

    def cutoff(self, n: int) -> SmoothExpr:
        """h_n = h o kappa_n extended by zero, h = plateau(1, 2, d)."""
        return with_support(compose(plateau(1.0, 2.0, self.d), self.kappa(n)), self.patches[n].K)

    def to_json(self) -> list:
        return [
            {"center": [certio.dec(c) for c in p.center], "halfwidth": certio.dec(p.halfwidth)}
            for p in self.patches
        ]

    @classmethod
    def from_json(cls, d: int, data: list) -> "PatchManifold":
        try:
            return cls(
                d,
                tuple(
                    Patch(tuple(certio.undec(c) for c in item["center"]), certio.undec(item["halfwidth"]))
                    for item in data
                ),
            )
        except (KeyError, TypeError) as exc:
            raise certio.SchemaError(f"malformed patches: {exc}") from exc


@dataclass(frozen=True)
class Section:
    """A compactly supported section of M x R^p: component expressions R^d -> R."""

    components: tuple[SmoothExpr, ...]

    def __post_init__(self):
        if not self.components:
            raise ValueError("a section needs at least one fibre component")
        d = self.components[0].dim_in
        for c in self.components:
            if c.dim_in != d or c.dim_out != 1:
                raise ValueError("section components must be scalar functions on a common R^d")
            if not c.is_bounded:
                raise ValueError("section components must be compactly supported")

    @property
    def d(self) -> int:
        return self.components[0].dim_in

    @property
    def p(self) -> int:
        return len(self.components)

    def __add__(self, other: "Section") -> "Section":
        if self.p != other.p:
            raise ValueError("fibre dimensions differ")
        return Section(tuple(add(a, b) for a, b in zip(self.components, other.components)))

    @classmethod
    def zero(cls, d: int, p: int) -> "Section":
        return cls(tuple(zero(d) for _ in range(p)))


@dataclass(frozen=True)
class FibrePathology:
    manifold: PatchManifold
    lambda_index: int = 0

    def lam(self, sigma: Section) -> SmoothExpr:
        if not 0 <= self.lambda_index < sigma.p:
            raise ValueError("lambda index outside the fibre")
        return sigma.components[self.lambda_index]

    def v(self, p: int) -> tuple[float, ...]:
        return tuple(1.0 if i == self.lambda_index else 0.0 for i in range(p))


def j_n(gamma: SmoothExpr, manifold: PatchManifold, n: int, v) -> Section:
    """Section v * (gamma o kappa_n) on U_n, zero elsewhere; gamma supported in [-1, 1]^d."""
    if gamma.dim_in != manifold.d:
        raise ValueError("gamma lives on the wrong dimension")
    base = with_support(compose(gamma, manifold.kappa(n)), manifold.patches[n].L)
    return Section(tuple(scale(float(vi), base) if vi != 1.0 else base for vi in v))


def _inside(boxes, outer) -> bool:
    slack = 1e-12
    return all(
        lo >= a - slack * (1 + abs(a)) and hi <= b + slack * (1 + abs(b))
        for box in boxes
        for (lo, hi), (a, b) in zip(box, outer)
    )


def pullback_rho(sigma: Section, manifold: PatchManifold, n: int) -> tuple[SmoothExpr, ...]:
    """rho_n(sigma) = sigma o kappa_n^{-1} on [-1, 1]^d; sigma must live in L_n."""
    L = manifold.patches[n].L
    for c in sigma.components:
        if not _inside(c.support, L):
            raise ValueError(f"section is not supported in L_{n}")
    inv = manifold.kappa_inv(n)
    box = ((-1.0, 1.0),) * manifold.d
    return tuple(with_support(compose(c, inv), box) for c in sigma.components)


def psi0(sigma: Section, P: FibrePathology) -> SmoothExpr:
    """Psi_0(t) = lambda(sigma(kappa_0^{-1}(t e_1))) - lambda(sigma(x_0))."""
    M = P.manifold
    p0 = M.patches[0]
    path = [add(const(p0.center[0], 1), scale(p0.halfwidth, atan_stretch()))]
    path += [const(c, 1) for c in p0.center[1:]]
    curve = stack(*path) if M.d > 1 else path[0]
    s1 = P.lam(sigma)
    x0 = p0.center if M.d > 1 else p0.center[0]
    return add(compose(s1, curve), const(-value(s1, x0), 1))


def f_bundle(sigma: Section, P: FibrePathology) -> SmoothExpr:
    """f(sigma) as a scalar function on R^d (see module docstring)."""
    M = P.manifold
    if sigma.d != M.d:
        raise ValueError("section and manifold dimensions differ")
    s1 = P.lam(sigma)
    outer = psi0(sigma, P)
    terms = [compose(outer, mul(M.cutoff(n), s1)) for n in range(1, len(M.patches))]
    return add(*terms) if terms else zero(M.d)


# ---------------------------------------------------------------------------
# witness


def bump_g(k0: int, d: int) -> SmoothExpr:
    """g(y) = y_1^(k0+1) on [-1/2, 1/2]^d, supported in [-1, 1]^d."""
    return mul(power(coord(0, d), k0 + 1), plateau(0.5, 1.0, d))


def bump_eta(s: float, d: int) -> SmoothExpr:
    """eta(y) = s y_1 on [-1/2, 1/2]^d, supported in [-1, 1]^d."""
    return scale(s, mul(coord(0, d), plateau(0.5, 1.0, d)))


def build_bundle_exprs(k0: int, r: float, s: float, m: int, d: int) -> dict:
    g = bump_g(k0, d)
    return {"g": g, "gamma_m": dilate(g, m, r, k0, axis=0), "eta": bump_eta(s, d)}


def build_sigma(exprs: dict, P: FibrePathology, ell: int, p: int) -> Section:
    v = P.v(p)
    return j_n(exprs["gamma_m"], P.manifold, 0, v) + j_n(exprs["eta"], P.manifold, ell, v)


def bundle_escape(sigma: Section, P: FibrePathology, ell: int, order: int) -> float:
    """d^order/dy_1^order of f(sigma) o kappa_ell^{-1} at y = 0."""
    pulled = compose(f_bundle(sigma, P), P.manifold.kappa_inv(ell))
    e1 = np.zeros(P.manifold.d)
    e1[0] = 1.0
    jets = directional_jets(pulled, np.zeros((1, P.manifold.d)), e1, order)
    return float(jets[order, 0])


def regime_check(exprs: dict, m: int, s: float, d: int, samples: int = 41) -> dict:
    """m |eta(y)| <= 1/2 on the inspected neighbourhood |y_1| <= rho."""
    rho = min(0.5, 1.0 / (2.0 * m * s))
    ys = np.zeros((samples, d))
    ys[:, 0] = np.linspace(-rho, rho, samples)
    worst = float(np.max(np.abs(np.atleast_1d(value(exprs["eta"], ys))))) * m
    return {"radius": rho, "max_m_eta": worst, "passed": bool(worst <= 0.5 * (1 + 1e-12))}


def _lower_ratio_W(f: SmoothExpr, k: int, eps: float) -> float:
    box = ((-1.0, 1.0),) * f.dim_in
    br = partial_brackets(f, k, box, 1e-300, budget=(2 * 8 + 1) ** f.dim_in * 4)
    return max(b.lo for b in br.values()) / eps


def _search_W(make, k: int, eps: float, tol: float) -> float:
    def at(c):
        return member_W(make(c), k, eps, tol)

    q, _ = power_of_two_search(at, _lower_ratio_W(make(1.0), k, eps), SEARCH_CAP)
    return math.ldexp(1.0, -q)


@dataclass
class BundleCertificate:
    spec: SeqSpec
    pathology: FibrePathology
    p: int
    k0: int
    ell: int
    r: float
    s: float
    m: int
    exprs: dict
    sigma: Section
    memberships: dict
    escape: dict
    regime: dict
    tol: float
    seed: int = 0

    def to_json(self) -> dict:
        M = self.pathology.manifold
        return {
            "schema": certio.SCHEMA,
            "kind": "witness-bundle",
            "d": str(M.d),
            "p": str(self.p),
            "lambda_index": str(self.pathology.lambda_index),
            "patches": M.to_json(),
            "per_patch_spec": self.spec.to_json(),
            "k0": str(self.k0),
            "ell": str(self.ell),
            "r": certio.dec(self.r),
            "s": certio.dec(self.s),
            "m": str(self.m),
            "n": str(self.ell),
            "tol": certio.dec(self.tol),
            "seed": str(self.seed),
            "exprs": {k: to_json(v) for k, v in self.exprs.items()},
            "sigma_m": [to_json(c) for c in self.sigma.components],
            "membership_report": {k: v.to_json() for k, v in self.memberships.items()},
            "escape": {
                "order": str(self.escape["order"]),
                "location": str(self.escape["location"]),
                "value": certio.dec(self.escape["value"]),
                "expected": certio.dec(self.escape["expected"]),
                "bound": certio.dec(self.escape["bound"]),
                "margin": certio.dec(self.escape["margin"]),
            },
            "regime": {
                "radius": certio.dec(self.regime["radius"]),
                "max_m_eta": certio.dec(self.regime["max_m_eta"]),
                "passed": self.regime["passed"],
            },
            "trivializations": None,
        }


def witness_bundle(
    spec: SeqSpec,
    P: FibrePathology,
    p: int = 1,
    tol: float = DEFAULT_TOL,
    seed: int = 0,
) -> BundleCertificate:
    """Section sigma_m = tau_m + tau with tau_m in W_{k0,eps0} (patch 0), tau in
    W_{k_l,eps_l} (patch l = k0 + 1), and f(sigma_m) outside the target."""
    if not tol > 0:
        raise ValueError("tolerance must be positive")
    if p < 1:
        raise ValueError("fibre dimension must be >= 1")
    M = P.manifold
    d = M.d
    k0, eps0 = spec.k_at(0), spec.eps_at(0)
    ell = k0 + 1
    if len(M.patches) < k0 + 2:
        raise PatchError(f"need at least {k0 + 2} patches for k0={k0}")
    kl, epsl = spec.k_at(ell), spec.eps_at(ell)
    g = bump_g(k0, d)
    r = _search_W(lambda c: scale(c, g), k0, eps0, tol)
    s = _search_W(lambda c: bump_eta(c, d), kl, epsl, tol)
    m = m_rule(k0, r, s)
    exprs = build_bundle_exprs(k0, r, s, m, d)
    memberships = {
        "gamma_m": member_W(exprs["gamma_m"], k0, eps0, tol),
        "eta": member_W(exprs["eta"], kl, epsl, tol),
    }
    for name, rep in memberships.items():
        if rep.decision != "inside":
            raise UndecidedError(f"{name} membership came out {rep.decision}", rep)
    sigma = build_sigma(exprs, P, ell, p)
    order = k0 + 1
    val = bundle_escape(sigma, P, ell, order)
    expected = expected_escape(k0, r, s, m)
    escape = {
        "order": order,
        "location": ell,
        "value": val,
        "expected": expected,
        "bound": 1.0,
        "margin": abs(val) - 1.0,
    }
    return BundleCertificate(
        spec=spec,
        pathology=P,
        p=p,
        k0=k0,
        ell=ell,
        r=r,
        s=s,
        m=m,
        exprs=exprs,
        sigma=sigma,
        memberships=memberships,
        escape=escape,
        regime=regime_check(exprs, m, s, d),
        tol=tol,
        seed=seed,
    )


def escape_for_parameters(k0: int, r: float, s: float, m: int, P: FibrePathology, p: int = 1) -> float:
    """Escape derivative of the bundle construction at given (k0, r, s, m)."""
    exprs = build_bundle_exprs(k0, r, s, m, P.manifold.d)
    ell = k0 + 1
    return bundle_escape(build_sigma(exprs, P, ell, p), P, ell, k0 + 1)


def _membership(rep: VerifyReport, name: str, f: SmoothExpr, k: int, eps: float, tol: float) -> None:
    report = member_W(f, k, eps, tol)
    if report.decision == "undecided":
        rep.undecided = True
    rep.add(name, report.decision == "inside", f"decision={report.decision} margin={report.margin!r}")


def _minimal(rep: VerifyReport, name: str, make, x: float, k: int, eps: float, tol: float) -> None:
    q = _power_of_two_exponent(x)
    if q is None:
        rep.add(name, False, f"{x!r} is not 2^-q with q >= 0")
    elif q == 0:
        rep.add(name, True, "search stopped at the first level")
    else:
        decision = member_W(make(2 * x), k, eps, tol).decision
        rep.add(name, decision != "inside", f"doubled value is {decision}")


def verify_bundle(doc: dict) -> VerifyReport:
    """Re-check a bundle certificate from its serialized content alone."""
    try:
        if certio.field(doc, "kind") != "witness-bundle":
            raise certio.SchemaError("not a witness-bundle certificate")
        d = certio.unint(certio.field(doc, "d"))
        p = certio.unint(certio.field(doc, "p"))
        lam = certio.unint(certio.field(doc, "lambda_index"))
        M = PatchManifold.from_json(d, certio.field(doc, "patches"))
        spec = SeqSpec.from_json(certio.field(doc, "per_patch_spec"))
        k0 = certio.unint(certio.field(doc, "k0"))
        ell = certio.unint(certio.field(doc, "ell"))
        n = certio.unint(certio.field(doc, "n"))
        r = certio.undec(certio.field(doc, "r"))
        s = certio.undec(certio.field(doc, "s"))
        m = certio.unint(certio.field(doc, "m"))
        tol = certio.undec(certio.field(doc, "tol"))
        stored_value = certio.undec(certio.field(doc, "escape", "value"))
        exprs = {k: from_json(certio.field(doc, "exprs", k)) for k in ("g", "gamma_m", "eta")}
        sigma = Section(tuple(from_json(c) for c in certio.field(doc, "sigma_m")))
    except (SpecError, PatchError, ValueError, TypeError, KeyError, IndexError) as exc:
        if isinstance(exc, certio.SchemaError):
            raise
        raise certio.SchemaError(str(exc)) from exc
    if not (tol > 0 and r > 0 and s > 0 and m >= 1 and k0 >= 0 and p >= 1 and 0 <= lam < p):
        raise certio.SchemaError("parameters out of range")
    P = FibrePathology(M, lam)

    rep = VerifyReport()
    rep.add("k0 = spec k_0", k0 == spec.k_at(0), f"k0={k0}")
    rep.add("l = k0 + 1", ell == k0 + 1 and n == ell, f"l={ell} n={n}")
    rep.add("enough patches", len(M.patches) >= k0 + 2 and ell < len(M.patches))
    m_expected = m_rule(k0, r, s)
    rep.add("m follows the ceiling-plus-safety rule", m == m_expected, f"m={m} rule={m_expected}")
    rep.add("r m s^(k0+1) (k0+1)! > 1 exactly", escape_exceeds_one(k0, r, s, m))
    if not rep.ok:
        return rep
    rebuilt = build_bundle_exprs(k0, r, s, m, d)
    for name in ("g", "gamma_m", "eta"):
        rep.add(f"expression {name} matches parameters", canonical(rebuilt[name]) == canonical(exprs[name]))
    sig = build_sigma(rebuilt, P, ell, p)
    rep.add(
        "sigma_m matches parameters",
        sig.p == sigma.p and all(canonical(a) == canonical(b) for a, b in zip(sig.components, sigma.components)),
    )
    if not rep.ok:
        return rep

    eps0, kl, epsl = spec.eps_at(0), spec.k_at(ell), spec.eps_at(ell)
    g = exprs["g"]
    _membership(rep, "r g in W_{k0,eps0}", scale(r, g), k0, eps0, tol)
    _membership(rep, "gamma_m in W_{k0,eps0}", exprs["gamma_m"], k0, eps0, tol)
    _membership(rep, "eta in W_{k_l,eps_l}", exprs["eta"], kl, epsl, tol)
    _minimal(rep, "r is the first power of two inside", lambda c: scale(c, g), r, k0, eps0, tol)
    _minimal(rep, "s is the first power of two inside", lambda c: bump_eta(c, d), s, kl, epsl, tol)
    regime = regime_check(exprs, m, s, d)
    rep.add("regime m |eta| <= 1/2 near 0", regime["passed"], f"max={regime['max_m_eta']!r}")
    val = bundle_escape(sigma, P, ell, k0 + 1)
    expected = expected_escape(k0, r, s, m)
    rep.add("escape >= 1", abs(val) >= 1.0, f"value={val!r}")
    rep.add(
        "escape equals r m s^(k0+1) (k0+1)!",
        abs(val - expected) <= 1e-6 * abs(expected),
        f"value={val!r} expected={expected!r}",
    )
    rep.add(
        "escape matches stored value",
        abs(val - stored_value) <= ESCAPE_RTOL * max(abs(val), 1.0),
        f"stored={stored_value!r}",
    )
    return rep
