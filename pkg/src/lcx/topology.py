"""Seminorm machinery on test-function spaces.

Basic zero-neighbourhoods V(k, e) of C_c^oo(R), the sets W_{k,eps} of
C^oo_{[-1,1]^d}(R^d), q_{K,k} seminorms, and the certified supremum brackets
all of them are decided with.

Bracket semantics: on a uniform grid of spacing ``delta`` over the piece of
the interval that meets the support bound,

    lo = max sampled |f^(j)|,  hi = lo + delta * 1.1 * max sampled |f^(j+1)|

(for d > 1 the Lipschitz term is sum_l (delta_l / 2) max |d_l d^alpha f|).  The grid
is halved until ``hi - lo <= tol`` or the depth cap is hit; a capped bracket
is flagged ``converged=False`` and never supports an "inside" verdict.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .core.expr import SmoothExpr, const, dilate, identity, mul, power, scale, support_bound
from .core.jets import jets_1d, partial_jets
from .core.series import algebra

SLACK = 1.1
CHUNK = 1 << 15
DEFAULT_TOL = 1e-2
DEFAULT_DEPTH = 12
DEFAULT_BUDGET_ND = 1 << 20

RULES = ("constant", "abs", "affine")
EPS_RULES = ("constant", "harmonic")


class SpecError(ValueError):
    """Malformed sequence specification."""


@dataclass(frozen=True)
class SeqSpec:
    """Sequences k = (k_n), e = (eps_n) over n in Z, given by a rule plus overrides.

    rule "constant": k_n = k;  "abs": k_n = |n|;  "affine": k_n = a|n| + b.
    eps_rule "constant": eps_n = eps;  "harmonic": eps_n = eps / (|n| + 1).
    """

    rule: str = "constant"
    k: int = 0
    a: int = 1
    b: int = 0
    eps: float = 1.0
    eps_rule: str = "constant"
    overrides: tuple[tuple[int, int, float], ...] = field(default=())

    def __post_init__(self):
        if self.rule not in RULES:
            raise SpecError(f"unknown rule {self.rule!r}; expected one of {RULES}")
        if self.eps_rule not in EPS_RULES:
            raise SpecError(f"unknown eps rule {self.eps_rule!r}")
        for name in ("k", "a", "b"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, int) or v < 0:
                raise SpecError(f"{name} must be a non-negative integer, got {v!r}")
        if not (math.isfinite(self.eps) and self.eps > 0):
            raise SpecError(f"eps must be positive, got {self.eps!r}")
        seen = set()
        for n, k, eps in self.overrides:
            if n in seen:
                raise SpecError(f"duplicate override for n={n}")
            seen.add(n)
            if not isinstance(k, int) or k < 0:
                raise SpecError(f"override k at n={n} must be a non-negative integer")
            if not (math.isfinite(eps) and eps > 0):
                raise SpecError(f"override eps at n={n} must be positive")
        object.__setattr__(self, "overrides", tuple(sorted(self.overrides)))

    def _override(self, n: int):
        for m, k, eps in self.overrides:
            if m == n:
                return k, eps
        return None

    def k_at(self, n: int) -> int:
        o = self._override(n)
        if o is not None:
            return o[0]
        if self.rule == "constant":
            return self.k
        if self.rule == "abs":
            return abs(n)
        return self.a * abs(n) + self.b

    def eps_at(self, n: int) -> float:
        o = self._override(n)
        if o is not None:
            return o[1]
        if self.eps_rule == "harmonic":
            return self.eps / (abs(n) + 1)
        return self.eps

    def to_json(self) -> dict:
        return {
            "rule": self.rule,
            "k": str(self.k),
            "a": str(self.a),
            "b": str(self.b),
            "eps": repr(float(self.eps)),
            "eps_rule": self.eps_rule,
            "overrides": [[str(n), str(k), repr(float(e))] for n, k, e in self.overrides],
        }

    @classmethod
    def from_json(cls, data: dict) -> "SeqSpec":
        try:
            return cls(
                rule=data["rule"],
                k=int(data["k"]),
                a=int(data["a"]),
                b=int(data["b"]),
                eps=float(data["eps"]),
                eps_rule=data["eps_rule"],
                overrides=tuple((int(n), int(k), float(e)) for n, k, e in data["overrides"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, SpecError):
                raise
            raise SpecError(f"malformed spec: {exc}") from exc

    @classmethod
    def parse(cls, text: str, overrides=()) -> "SeqSpec":
        """Parse ``constant:K:EPS``, ``abs:EPS``, ``affine:A:B:EPS`` (optional ``:harmonic``)."""
        parts = text.strip().split(":")
        eps_rule = "constant"
        if parts and parts[-1] in EPS_RULES and len(parts) > 1:
            eps_rule = parts.pop()
        try:
            if parts[0] == "constant" and len(parts) == 3:
                kw = dict(rule="constant", k=int(parts[1]), eps=float(parts[2]))
            elif parts[0] == "abs" and len(parts) == 2:
                kw = dict(rule="abs", eps=float(parts[1]))
            elif parts[0] == "affine" and len(parts) == 4:
                kw = dict(rule="affine", a=int(parts[1]), b=int(parts[2]), eps=float(parts[3]))
            else:
                raise SpecError(f"cannot parse spec rule {text!r}")
        except ValueError as exc:
            if isinstance(exc, SpecError):
                raise
            raise SpecError(f"cannot parse spec rule {text!r}: {exc}") from exc
        parsed = []
        for item in overrides:
            if isinstance(item, str):
                try:
                    n, k, eps = item.split(":")
                    parsed.append((int(n), int(k), float(eps)))
                except ValueError as exc:
                    raise SpecError(f"cannot parse override {item!r} (want n:k:eps)") from exc
            else:
                parsed.append(tuple(item))
        return cls(eps_rule=eps_rule, overrides=tuple(parsed), **kw)


@dataclass(frozen=True)
class Bracket:
    lo: float
    hi: float
    tol: float
    depth: int
    converged: bool = True

    def __post_init__(self):
        object.__setattr__(self, "lo", float(self.lo))
        object.__setattr__(self, "hi", float(self.hi))
        object.__setattr__(self, "tol", float(self.tol))
        object.__setattr__(self, "depth", int(self.depth))
        object.__setattr__(self, "converged", bool(self.converged))
        if not (0.0 <= self.lo <= self.hi):
            raise ValueError(f"bracket needs 0 <= lo <= hi, got [{self.lo}, {self.hi}]")

    @property
    def width(self) -> float:
        return self.hi - self.lo

    def scaled(self, c: float) -> "Bracket":
        c = abs(c)
        return Bracket(c * self.lo, c * self.hi, c * self.tol, self.depth, self.converged)

    def to_json(self) -> dict:
        return {
            "lo": repr(float(self.lo)),
            "hi": repr(float(self.hi)),
            "tol": repr(float(self.tol)),
            "depth": str(self.depth),
            "converged": self.converged,
        }


ZERO_BRACKET = Bracket(0.0, 0.0, 0.0, 0, True)


def _abs_finite(a: np.ndarray) -> np.ndarray:
    a = np.abs(a)
    a[~np.isfinite(a)] = math.inf
    return a


# ---------------------------------------------------------------------------
# one dimension


def _pieces_1d(f: SmoothExpr, interval) -> list[tuple[float, float]]:
    a, b = float(interval[0]), float(interval[1])
    if a > b:
        raise ValueError("empty interval")
    out = []
    for box in f.support:
        lo, hi = max(a, box[0][0]), min(b, box[0][1])
        if lo <= hi:
            out.append((lo, hi))
    return out


def _maxima_1d(f: SmoothExpr, xs: np.ndarray, top: int) -> np.ndarray:
    best = np.zeros(top + 1)
    for s in range(0, xs.size, CHUNK):
        jets = _abs_finite(jets_1d(f, xs[s : s + CHUNK], top))
        best = np.maximum(best, jets.max(axis=1))
    return best


def derivative_brackets(
    f: SmoothExpr,
    orders,
    interval,
    tol,
    *,
    max_depth: int = DEFAULT_DEPTH,
    n0: int = 64,
    thresholds: dict | None = None,
    joint: bool = False,
) -> dict[int, Bracket]:
    """Brackets of sup |f^(j)| over ``interval`` for several orders on a shared grid.

    ``tol`` is a float or a mapping order -> tolerance.  With ``thresholds``
    (order -> eps) refinement also continues while some bracket straddles its
    threshold, and stops as soon as one lower bound reaches its threshold.
    With ``joint`` only the maximum over the orders has to reach the (smallest)
    tolerance; every returned bracket then carries that joint flag.
    """
    if f.dim_in != 1 or f.dim_out != 1:
        raise ValueError("derivative_brackets needs a scalar 1-D expression")
    orders = sorted(set(int(j) for j in orders))
    tols = {j: float(tol[j]) if isinstance(tol, dict) else float(tol) for j in orders}
    if any(t <= 0 for t in tols.values()):
        raise ValueError("tolerance must be positive")
    pieces = _pieces_1d(f, interval)
    if not pieces:
        return {j: ZERO_BRACKET for j in orders}
    top = orders[-1] + 1
    state = []
    for a, b in pieces:
        if a == b:
            state.append([a, b, 0, 0.0, _maxima_1d(f, np.array([a]), top)])
        else:
            xs = np.linspace(a, b, n0 + 1)
            state.append([a, b, n0, (b - a) / n0, _maxima_1d(f, xs, top)])
    depth = 0
    while True:
        lo = {j: max(st[4][j] for st in state) for j in orders}
        hi = {}
        for j in orders:
            hi[j] = max(
                st[4][j] + (SLACK * st[3] * st[4][j + 1] if st[3] > 0 else 0.0) for st in state
            )
        if joint:
            joint_ok = max(hi.values()) - max(lo.values()) <= min(tols.values())
            done = joint_ok
        else:
            done = all(hi[j] - lo[j] <= tols[j] for j in orders)
        if thresholds is not None:
            if any(lo[j] >= thresholds[j] for j in orders):
                done = True
            elif done:
                done = all(hi[j] < thresholds[j] for j in orders)
        if done or depth >= max_depth:
            if joint:
                return {j: Bracket(lo[j], hi[j], tols[j], depth, joint_ok) for j in orders}
            return {j: Bracket(lo[j], hi[j], tols[j], depth, hi[j] - lo[j] <= tols[j]) for j in orders}
        depth += 1
        for st in state:
            a, b, cells, delta, best = st
            if cells == 0:
                continue
            mids = a + (np.arange(cells) + 0.5) * delta
            st[4] = np.maximum(best, _maxima_1d(f, mids, top))
            st[2] = cells * 2
            st[3] = delta / 2


# ---------------------------------------------------------------------------
# several dimensions


def multi_indices(d: int, k: int) -> list[tuple[int, ...]]:
    return [a for a in algebra(d, k).indices]


def _pieces_nd(f: SmoothExpr, box) -> list[tuple[tuple[float, float], ...]]:
    out = []
    for sb in f.support:
        piece = []
        for (a, b), (lo, hi) in zip(box, sb):
            lo, hi = max(a, lo), min(b, hi)
            if lo > hi:
                break
            piece.append((lo, hi))
        else:
            out.append(tuple(piece))
    return out


def _maxima_nd(f: SmoothExpr, axes: list[np.ndarray], top: int) -> tuple[list, np.ndarray]:
    d = len(axes)
    total = math.prod(a.size for a in axes)
    alg = algebra(d, top)
    best = np.zeros(alg.size)
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d)
    for s in range(0, total, CHUNK):
        _, jets = partial_jets(f, mesh[s : s + CHUNK], top)
        best = np.maximum(best, _abs_finite(jets).max(axis=1))
    return alg.indices, best


def tensor_factors(f: SmoothExpr):
    """Split f(y) = prod_i f_i(y_i) into one-variable factors, or return None.

    Recognises products, scalar multiples, powers, constants, coordinate
    projections, one-variable functions of a single coordinate and axis
    dilations of such products.  Returns {axis: 1-D expression}; the scalar
    coefficient is folded into one of the factors.
    """
    d = f.dim_in

    def rec(node):
        kind = node.kind
        if kind == "const":
            return node.params[0], {}
        if kind == "coord":
            return 1.0, {node.params[0]: identity()}
        if kind == "scale":
            sub = rec(node.children[0])
            return None if sub is None else (node.params[0] * sub[0], sub[1])
        if kind == "compose":
            outer, inner = node.children
            if inner.kind == "coord" and outer.dim_in == 1 and outer.dim_out == 1:
                return 1.0, {inner.params[0]: outer}
            return None
        if kind == "mul":
            coef, parts = 1.0, {}
            for child in node.children:
                sub = rec(child)
                if sub is None:
                    return None
                coef *= sub[0]
                for axis, g in sub[1].items():
                    parts[axis] = mul(parts[axis], g) if axis in parts else g
            return coef, parts
        if kind == "pow":
            sub = rec(node.children[0])
            if sub is None:
                return None
            n = node.params[0]
            return sub[0] ** n, {axis: power(g, n) for axis, g in sub[1].items()}
        if kind == "dilate":
            m, coef, k0, axis = node.params
            sub = rec(node.children[0])
            if sub is None:
                return None
            inner_coef, parts = sub
            one = parts.get(axis, const(1.0))
            parts = dict(parts)
            parts[axis] = dilate(one, m, coef * inner_coef, k0, axis=0)
            return 1.0, parts
        return None

    if f.dim_out != 1:
        return None
    out = rec(f)
    if out is None:
        return None
    coef, parts = out
    parts = {axis: parts.get(axis, const(1.0)) for axis in range(d)}
    if coef != 1.0:
        parts[0] = scale(coef, parts[0])
    return parts


def _tensor_brackets(parts, k: int, box, tol: float, threshold) -> dict:
    d = len(parts)
    alphas = multi_indices(d, k)
    tols = {}
    # coarse pass: sizes of every factor's derivatives, to split the tolerance
    coarse = {
        axis: derivative_brackets(g, range(k + 1), box[axis], 1e300, max_depth=0) for axis, g in parts.items()
    }
    for axis in parts:
        big = max(
            (math.prod(coarse[b][a[b]].hi for b in parts if b != axis) for a in alphas), default=1.0
        )
        tols[axis] = tol / (2 * d * big) if big > 0 else 1e300
    fine = {
        axis: derivative_brackets(g, range(k + 1), box[axis], tols[axis]) for axis, g in parts.items()
    }
    out = {}
    for a in alphas:
        lo = math.prod(fine[axis][a[axis]].lo for axis in parts)
        hi = math.prod(fine[axis][a[axis]].hi for axis in parts)
        conv = all(fine[axis][a[axis]].converged for axis in parts) or hi - lo <= tol
        depth = max(fine[axis][a[axis]].depth for axis in parts)
        out[a] = Bracket(lo, hi, tol, depth, conv and hi - lo <= tol)
    return out


def partial_brackets(
    f: SmoothExpr,
    k: int,
    box,
    tol: float,
    *,
    budget: int = DEFAULT_BUDGET_ND,
    n0: int = 8,
    threshold: float | None = None,
    tensor: bool = True,
) -> dict[tuple[int, ...], Bracket]:
    """Brackets of sup_box |d^alpha f| for every multi-index with |alpha| <= k.

    ``threshold`` plays the role of ``thresholds`` in :func:`derivative_brackets`
    (one value shared by all multi-indices).
    """
    d = f.dim_in
    if f.dim_out != 1:
        raise ValueError("partial_brackets needs a scalar expression")
    alphas = multi_indices(d, k)
    if tol <= 0:
        raise ValueError("tolerance must be positive")
    pieces = _pieces_nd(f, box)
    if not pieces:
        return {a: ZERO_BRACKET for a in alphas}
    parts = tensor_factors(f) if tensor else None
    if parts is not None:
        return _tensor_brackets(parts, k, box, tol, threshold)
    top = k + 1
    cells = n0
    depth = 0
    while True:
        lo = {a: 0.0 for a in alphas}
        hi = {a: 0.0 for a in alphas}
        for piece in pieces:
            axes, deltas = [], []
            for a, b in piece:
                if a == b:
                    axes.append(np.array([a]))
                    deltas.append(0.0)
                else:
                    axes.append(np.linspace(a, b, cells + 1))
                    deltas.append((b - a) / cells)
            indices, best = _maxima_nd(f, axes, top)
            pos = {a: i for i, a in enumerate(indices)}
            for alpha in alphas:
                here = best[pos[alpha]]
                lip = 0.0
                for axis in range(d):
                    if deltas[axis] == 0.0:
                        continue
                    up = list(alpha)
                    up[axis] += 1
                    # every point of a cell is within delta/2 of a node along each axis
                    lip += 0.5 * deltas[axis] * best[pos[tuple(up)]]
                lo[alpha] = max(lo[alpha], here)
                hi[alpha] = max(hi[alpha], here + SLACK * lip)
        done = all(hi[a] - lo[a] <= tol for a in alphas)
        if threshold is not None:
            if any(lo[a] >= threshold for a in alphas):
                done = True
            elif done:
                done = all(hi[a] < threshold for a in alphas)
        next_points = (2 * cells + 1) ** d * len(pieces)
        if done or next_points > budget:
            return {a: Bracket(lo[a], hi[a], tol, depth, hi[a] - lo[a] <= tol) for a in alphas}
        cells *= 2
        depth += 1


# ---------------------------------------------------------------------------
# public operations


def sup_derivative_bracket(f: SmoothExpr, j: int, region, tol: float = 1e-4, **kw) -> Bracket:
    """Bracket of sup |f^(j)| over an interval (d = 1) or of max_{|alpha|=j} sup |d^alpha f| over a box."""
    if tol <= 0:
        raise ValueError("tolerance must be positive")
    if f.dim_in == 1:
        interval = region[0] if isinstance(region[0], (tuple, list)) else region
        return derivative_brackets(f, [j], interval, tol, **kw)[j]
    brackets = partial_brackets(f, j, region, tol, **kw)
    chosen = [b for a, b in brackets.items() if sum(a) == j]
    return _combine(chosen, tol)


def _combine(brackets, tol: float) -> Bracket:
    if not brackets:
        return ZERO_BRACKET
    return Bracket(
        max(b.lo for b in brackets),
        max(b.hi for b in brackets),
        tol,
        max(b.depth for b in brackets),
        all(b.converged for b in brackets),
    )


def seminorm_qKk(f: SmoothExpr, K, k: int, tol: float = 1e-4, **kw) -> Bracket:
    """q_{K,k}(f) = max_{|alpha| <= k} sup_K |d^alpha f|."""
    if f.dim_in == 1:
        interval = K[0] if isinstance(K[0], (tuple, list)) else K
        kw.setdefault("joint", True)
        return _combine(list(derivative_brackets(f, range(k + 1), interval, tol, **kw).values()), tol)
    return _combine(list(partial_brackets(f, k, K, tol, **kw).values()), tol)


@dataclass(frozen=True)
class MembershipEntry:
    n: int
    j: int
    bracket: Bracket
    eps: float

    @property
    def verdict(self) -> str:
        if self.bracket.lo >= self.eps:
            return "outside"
        if self.bracket.converged and self.bracket.hi < self.eps:
            return "inside"
        return "undecided"


@dataclass(frozen=True)
class MembershipReport:
    decision: str
    entries: tuple[MembershipEntry, ...]
    margin: float

    def to_json(self) -> dict:
        return {
            "decision": self.decision,
            "margin": repr(float(self.margin)),
            "entries": [
                {
                    "n": str(e.n),
                    "j": str(e.j),
                    "lo": repr(float(e.bracket.lo)),
                    "hi": repr(float(e.bracket.hi)),
                    "eps": repr(float(e.eps)),
                }
                for e in self.entries
            ],
        }


def _decide(entries) -> MembershipReport:
    entries = tuple(sorted(entries, key=lambda e: (e.n, e.j)))
    verdicts = [e.verdict for e in entries]
    if "outside" in verdicts:
        decision = "outside"
    elif all(v == "inside" for v in verdicts):
        decision = "inside"
    else:
        decision = "undecided"
    margin = min((e.eps - e.bracket.hi for e in entries), default=math.inf)
    return MembershipReport(decision, entries, margin)


def intervals_meeting(f: SmoothExpr) -> list[int]:
    """Integers n whose [n - 1/2, n + 1/2] meets the support bound of f."""
    hull = support_bound(f)
    if hull is None:
        raise ValueError("membership in V(k, e) needs a compactly supported function")
    if not f.support:
        return []
    ns = set()
    for box in f.support:
        lo, hi = box[0]
        ns.update(range(math.ceil(lo - 0.5), math.floor(hi + 0.5) + 1))
    return sorted(ns)


def member_V(f: SmoothExpr, spec: SeqSpec, tol: float = DEFAULT_TOL, **kw) -> MembershipReport:
    """Decide f in V(k, e) (strict inequalities); ``tol`` is relative to eps_n."""
    if f.dim_in != 1 or f.dim_out != 1:
        raise ValueError("member_V needs a scalar 1-D expression")
    if tol <= 0:
        raise ValueError("tolerance must be positive")
    entries = []
    for n in intervals_meeting(f):
        kn, eps = spec.k_at(n), spec.eps_at(n)
        brackets = derivative_brackets(
            f, range(kn + 1), (n - 0.5, n + 0.5), tol * eps, thresholds={j: eps for j in range(kn + 1)}, **kw
        )
        entries.extend(MembershipEntry(n, j, brackets[j], eps) for j in range(kn + 1))
    return _decide(entries)


def member_W(f: SmoothExpr, k: int, eps: float, tol: float = DEFAULT_TOL, **kw) -> MembershipReport:
    """Decide f in W_{k,eps}: sup_{[-1,1]^d} |d^alpha f| < eps for |alpha| <= k.

    Entries are labelled by n = 0 and j = position of alpha in degree order.
    """
    box = ((-1.0, 1.0),) * f.dim_in
    if f.dim_in == 1:
        brackets = derivative_brackets(
            f, range(k + 1), box[0], tol * eps, thresholds={j: eps for j in range(k + 1)}, **kw
        )
        entries = [MembershipEntry(0, j, brackets[j], eps) for j in range(k + 1)]
    else:
        brackets = partial_brackets(f, k, box, tol * eps, threshold=eps, **kw)
        entries = [MembershipEntry(0, i, b, eps) for i, b in enumerate(brackets.values())]
    return _decide(entries)


@dataclass(frozen=True)
class BasicNbhdCinf:
    """{gamma : q_{K,k}(gamma) < eps} in C^oo(R^d)."""

    K: tuple[tuple[float, float], ...]
    k: int
    eps: float

    def __post_init__(self):
        if not self.eps > 0:
            raise SpecError("eps must be positive")
        if self.k < 0:
            raise SpecError("k must be non-negative")
        if not self.K or any(lo > hi for lo, hi in self.K):
            raise SpecError("K must be a non-empty box")

    def contains(self, f: SmoothExpr, tol: float = DEFAULT_TOL) -> tuple[str, Bracket]:
        q = seminorm_qKk(f, self.K, self.k, tol * self.eps)
        if q.lo >= self.eps:
            return "outside", q
        if q.converged and q.hi < self.eps:
            return "inside", q
        return "undecided", q

    def to_json(self) -> dict:
        return {
            "K": [[repr(float(lo)), repr(float(hi))] for lo, hi in self.K],
            "k": str(self.k),
            "eps": repr(float(self.eps)),
        }


def power_of_two_search(report_at, lower_estimate: float, cap: int) -> tuple[int, list]:
    """Smallest q >= 0 with report_at(2**-q).decision == "inside".

    ``lower_estimate`` is a certified lower bound on max_j sup|f^(j)| / eps_j
    for the unscaled function; levels where the scaled lower bound already
    reaches eps are outside and skipped without evaluation.
    """
    q = 0
    if lower_estimate >= 1.0:
        q = math.floor(math.log2(lower_estimate)) + 1
        while q > 0 and math.ldexp(lower_estimate, -(q - 1)) < 1.0:
            q -= 1
    trail = []
    while q <= cap:
        report = report_at(math.ldexp(1.0, -q))
        trail.append((q, report.decision))
        if report.decision == "inside":
            return q, trail
        if any(not e.bracket.converged for e in report.entries) and report.decision == "undecided":
            raise UndecidedError(f"membership undecided at scale 2^-{q}: tolerance not reached", report)
        q += 1
    raise UndecidedError(f"no power-of-two scale up to 2^-{cap} certified inside", None)


class UndecidedError(RuntimeError):
    def __init__(self, message: str, report: MembershipReport | None):
        super().__init__(message)
        self.report = report
