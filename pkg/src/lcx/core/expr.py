"""Immutable expression DAGs denoting smooth maps R^d -> R (or R^p via ``stack``).

Each node records a conservative support bound: a finite union of closed
boxes outside of which the node vanishes identically (boxes may have infinite
sides).  The evaluator relies on it to return exact zero jets off support,
which is also what keeps dilations by huge factors and tangent stretches
outside their charts from producing inf/nan.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from numbers import Integral, Real

Interval = tuple[float, float]
Box = tuple[Interval, ...]
Support = tuple[Box, ...]

INF = math.inf


def full_box(dim: int) -> Box:
    return ((-INF, INF),) * dim


def _box_intersection(a: Box, b: Box) -> Box | None:
    out = []
    for (alo, ahi), (blo, bhi) in zip(a, b):
        lo, hi = max(alo, blo), min(ahi, bhi)
        if lo > hi:
            return None
        out.append((lo, hi))
    return tuple(out)


def _box_contains(outer: Box, inner: Box) -> bool:
    return all(olo <= ilo and ihi <= ohi for (olo, ohi), (ilo, ihi) in zip(outer, inner))


def _union(*supports: Support) -> Support:
    boxes: list[Box] = []
    for s in supports:
        for box in s:
            if any(_box_contains(b, box) for b in boxes):
                continue
            boxes = [b for b in boxes if not _box_contains(box, b)]
            boxes.append(box)
    return tuple(boxes)


def _intersection(a: Support, b: Support) -> Support:
    out = []
    for x in a:
        for y in b:
            z = _box_intersection(x, y)
            if z is not None:
                out.append(z)
    return _union(tuple(out))


def _is_bounded(support: Support) -> bool:
    return all(math.isfinite(v) for box in support for iv in box for v in iv)


@dataclass(frozen=True, eq=False)
class SmoothExpr:
    kind: str
    children: tuple["SmoothExpr", ...]
    params: tuple
    dim_in: int
    dim_out: int
    support: Support

    # evaluation sugar -----------------------------------------------------
    def __call__(self, *x):
        from .jets import value

        return value(self, x[0] if len(x) == 1 else x)

    # arithmetic sugar -----------------------------------------------------
    def __add__(self, other):
        if isinstance(other, Real):
            other = const(float(other), self.dim_in)
        return add(self, other)

    __radd__ = __add__

    def __neg__(self):
        return scale(-1.0, self)

    def __sub__(self, other):
        if isinstance(other, Real):
            other = const(float(other), self.dim_in)
        return add(self, scale(-1.0, other))

    def __rsub__(self, other):
        return const(float(other), self.dim_in) + scale(-1.0, self)

    def __mul__(self, other):
        if isinstance(other, Real):
            return scale(float(other), self)
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Real):
            return scale(1.0 / float(other), self)
        return quotient(self, other)

    def __pow__(self, n):
        return power(self, n)

    def __repr__(self) -> str:
        return f"SmoothExpr({self.kind}, d={self.dim_in}, p={self.dim_out}, nodes={count_nodes(self)})"

    @property
    def is_bounded(self) -> bool:
        return _is_bounded(self.support)


def _node(kind, children, params, dim_in, support, dim_out=1) -> SmoothExpr:
    return SmoothExpr(kind, tuple(children), tuple(params), dim_in, dim_out, tuple(support))


def _scalar(f: SmoothExpr, what: str) -> None:
    if f.dim_out != 1:
        raise ValueError(f"{what} needs scalar-valued operands")


# ---------------------------------------------------------------------------
# leaves


def const(c: float, dim: int = 1) -> SmoothExpr:
    c = float(c)
    return _node("const", (), (c,), dim, () if c == 0.0 else (full_box(dim),))


def zero(dim: int = 1) -> SmoothExpr:
    return const(0.0, dim)


def coord(i: int, dim: int) -> SmoothExpr:
    if not 0 <= i < dim:
        raise ValueError(f"coordinate {i} out of range for dimension {dim}")
    return _node("coord", (), (int(i),), dim, (full_box(dim),))


def identity() -> SmoothExpr:
    return coord(0, 1)


def gexp() -> SmoothExpr:
    """The flat gluing function g(u) = exp(-1/u) for u > 0, 0 for u <= 0."""
    return _node("g", (), (), 1, (((0.0, INF),),))


def tan_stretch() -> SmoothExpr:
    """u -> tan(pi u / 2), a diffeomorphism (-1, 1) -> R."""
    return _node("tan", (), (), 1, (full_box(1),))


def atan_stretch() -> SmoothExpr:
    """y -> (2/pi) arctan(y), the inverse of :func:`tan_stretch`."""
    return _node("atan", (), (), 1, (full_box(1),))


# ---------------------------------------------------------------------------
# combinators


def _same_dim(items) -> int:
    dims = {f.dim_in for f in items}
    if len(dims) != 1:
        raise ValueError(f"input dimension mismatch: {sorted(dims)}")
    return dims.pop()


def add(*terms: SmoothExpr) -> SmoothExpr:
    if not terms:
        raise ValueError("empty sum")
    for t in terms:
        _scalar(t, "add")
    if len(terms) == 1:
        return terms[0]
    dim = _same_dim(terms)
    return _node("add", terms, (), dim, _union(*(t.support for t in terms)))


def mul(*factors: SmoothExpr) -> SmoothExpr:
    if not factors:
        raise ValueError("empty product")
    for f in factors:
        _scalar(f, "mul")
    if len(factors) == 1:
        return factors[0]
    dim = _same_dim(factors)
    support = factors[0].support
    for f in factors[1:]:
        support = _intersection(support, f.support)
    return _node("mul", factors, (), dim, support)


def scale(c: float, f: SmoothExpr) -> SmoothExpr:
    _scalar(f, "scale")
    c = float(c)
    return _node("scale", (f,), (c,), f.dim_in, () if c == 0.0 else f.support)


def power(f: SmoothExpr, n: int) -> SmoothExpr:
    _scalar(f, "power")
    if not isinstance(n, Integral) or n < 0:
        raise ValueError("only non-negative integer powers are supported")
    n = int(n)
    support = (full_box(f.dim_in),) if n == 0 else f.support
    return _node("pow", (f,), (n,), f.dim_in, support)


def quotient(num: SmoothExpr, den: SmoothExpr) -> SmoothExpr:
    """num / den; the caller guarantees den has no zeros."""
    _scalar(num, "quotient")
    _scalar(den, "quotient")
    dim = _same_dim((num, den))
    return _node("quot", (num, den), (), dim, num.support)


def stack(*components: SmoothExpr) -> SmoothExpr:
    if not components:
        raise ValueError("empty stack")
    for c in components:
        _scalar(c, "stack")
    dim = _same_dim(components)
    return _node("stack", components, (), dim, _union(*(c.support for c in components)), len(components))


def component(f: SmoothExpr, i: int) -> SmoothExpr:
    if f.kind == "stack":
        return f.children[i]
    if f.dim_out == 1 and i == 0:
        return f
    raise ValueError("component() needs a stack")


def compose(outer: SmoothExpr, inner: SmoothExpr) -> SmoothExpr:
    """outer o inner.  Inherits inner's support iff outer(0) == 0."""
    if outer.dim_in != inner.dim_out:
        raise ValueError(
            f"dimension mismatch: outer takes {outer.dim_in} inputs, inner gives {inner.dim_out}"
        )
    from .jets import value_at_origin

    if not outer.support:
        support: Support = ()
    elif inner.kind == "coord" and outer.dim_in == 1:
        # x -> outer(x_i): the support is a slab along axis i
        axis = inner.params[0]
        full = full_box(inner.dim_in)
        support = tuple(
            tuple(box[0] if j == axis else full[j] for j in range(inner.dim_in)) for box in outer.support
        )
    elif value_at_origin(outer) == 0.0:
        support = inner.support
    else:
        support = (full_box(inner.dim_in),)
    return _node("compose", (outer, inner), (), inner.dim_in, support, outer.dim_out)


def affine(f: SmoothExpr, a, b) -> SmoothExpr:
    """x -> f(a * x + b) with coordinatewise a (non-zero) and b."""
    _scalar(f, "affine")
    d = f.dim_in
    a = _as_tuple(a, d)
    b = _as_tuple(b, d)
    if any(ai == 0.0 for ai in a):
        raise ValueError("affine scale factors must be non-zero")
    boxes = []
    for box in f.support:
        mapped = []
        for (lo, hi), ai, bi in zip(box, a, b):
            u, v = (lo - bi) / ai, (hi - bi) / ai
            mapped.append((min(u, v), max(u, v)))
        boxes.append(tuple(mapped))
    return _node("affine", (f,), (a, b), d, tuple(boxes))


def translate(f: SmoothExpr, shift) -> SmoothExpr:
    """x -> f(x - shift)."""
    shift = _as_tuple(shift, f.dim_in)
    return affine(f, (1.0,) * f.dim_in, tuple(-s for s in shift))


def with_support(f: SmoothExpr, box) -> SmoothExpr:
    """Declare (and enforce at evaluation) that f vanishes outside ``box``.

    Only for constructions where the vanishing is known by design; the
    evaluator returns exact zero jets off the box.
    """
    _scalar(f, "with_support")
    box = tuple((float(lo), float(hi)) for lo, hi in box)
    if len(box) != f.dim_in:
        raise ValueError("support box dimension mismatch")
    return _node("support", (f,), (box,), f.dim_in, _intersection(f.support, (box,)))


def dilate(h: SmoothExpr, m, coef: float, k0: int, axis: int = 0) -> SmoothExpr:
    """y -> coef * m**(-k0) * h(y with y[axis] replaced by m * y[axis]).

    Evaluated by series substitution with the factor m**(j - k0) applied per
    degree, so derivatives stay finite even when m**(k0 + 1) would overflow.
    """
    _scalar(h, "dilate")
    if not isinstance(m, Integral) or m < 1:
        raise ValueError("dilation factor m must be an integer >= 1")
    if not isinstance(k0, Integral) or k0 < 0:
        raise ValueError("k0 must be a non-negative integer")
    m = int(m)
    mf = float(m)
    boxes = []
    for box in h.support:
        lo, hi = box[axis]
        shrunk = list(box)
        shrunk[axis] = (lo / mf, hi / mf)
        boxes.append(tuple(shrunk))
    support = () if float(coef) == 0.0 else tuple(boxes)
    return _node("dilate", (h,), (m, float(coef), int(k0), int(axis)), h.dim_in, support)


def derivative(f: SmoothExpr, axis: int = 0) -> SmoothExpr:
    """Partial derivative of f along ``axis`` as a node."""
    _scalar(f, "derivative")
    return _node("deriv", (f,), (int(axis),), f.dim_in, f.support)


def _as_tuple(v, d: int) -> tuple[float, ...]:
    if isinstance(v, Real):
        return (float(v),) * d
    v = tuple(float(x) for x in v)
    if len(v) != d:
        raise ValueError(f"expected {d} components, got {len(v)}")
    return v


# ---------------------------------------------------------------------------
# queries


def support_bound(f: SmoothExpr) -> Box | None:
    """Hull of the stored support, or None when unbounded.

    An identically-zero expression reports the degenerate box at the origin.
    """
    if not f.support:
        return ((0.0, 0.0),) * f.dim_in
    if not f.is_bounded:
        return None
    return tuple(
        (min(b[i][0] for b in f.support), max(b[i][1] for b in f.support)) for i in range(f.dim_in)
    )


def support_boxes(f: SmoothExpr) -> Support:
    return f.support


def is_zero(f: SmoothExpr) -> bool:
    return not f.support


def iter_nodes(f: SmoothExpr):
    seen = set()
    stack_ = [f]
    while stack_:
        node = stack_.pop()
        if id(node) in seen:
            continue
        seen.add(id(node))
        yield node
        stack_.extend(node.children)


def count_nodes(f: SmoothExpr) -> int:
    return sum(1 for _ in iter_nodes(f))


# ---------------------------------------------------------------------------
# canonical JSON


def _enc(v):
    if isinstance(v, bool):
        raise TypeError("booleans are not expression parameters")
    if isinstance(v, Integral):
        return str(int(v))
    if isinstance(v, Real):
        return repr(float(v))
    if isinstance(v, tuple):
        return [_enc(x) for x in v]
    raise TypeError(f"cannot encode parameter {v!r}")


def to_json(f: SmoothExpr) -> dict:
    """Canonical JSON tree; reals as shortest round-trip decimal strings."""
    memo: dict[int, dict] = {}

    def rec(node):
        key = id(node)
        if key not in memo:
            memo[key] = {
                "kind": node.kind,
                "dim": str(node.dim_in),
                "params": [_enc(p) for p in node.params],
                "children": [rec(c) for c in node.children],
            }
        return memo[key]

    return rec(f)


def canonical(f: SmoothExpr) -> str:
    return json.dumps(to_json(f), sort_keys=True, separators=(",", ":"))


def from_json(tree: dict) -> SmoothExpr:
    """Rebuild an expression from :func:`to_json` output (supports recomputed)."""
    try:
        kind = tree["kind"]
        dim = int(tree["dim"])
        params = tree["params"]
        kids = [from_json(c) for c in tree["children"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"malformed expression node: {exc}") from exc
    if kind == "const":
        return const(float(params[0]), dim)
    if kind == "coord":
        return coord(int(params[0]), dim)
    if kind == "g":
        return gexp()
    if kind == "tan":
        return tan_stretch()
    if kind == "atan":
        return atan_stretch()
    if kind == "add":
        return add(*kids)
    if kind == "mul":
        return mul(*kids)
    if kind == "scale":
        return scale(float(params[0]), kids[0])
    if kind == "pow":
        return power(kids[0], int(params[0]))
    if kind == "quot":
        return quotient(*kids)
    if kind == "stack":
        return stack(*kids)
    if kind == "compose":
        return compose(*kids)
    if kind == "affine":
        return affine(kids[0], [float(x) for x in params[0]], [float(x) for x in params[1]])
    if kind == "support":
        return with_support(kids[0], [(float(lo), float(hi)) for lo, hi in params[0]])
    if kind == "dilate":
        return dilate(kids[0], int(params[0]), float(params[1]), int(params[2]), int(params[3]))
    if kind == "deriv":
        return derivative(kids[0], int(params[0]))
    raise ValueError(f"unknown expression kind {kind!r}")
