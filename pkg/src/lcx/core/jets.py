"""Taylor-mode evaluation of expression DAGs.

Every node is evaluated on a batch of base points at once: the inputs are one
truncated series per input coordinate, and the result is the truncated series
of the node.  Composition feeds the inner series straight into the outer DAG;
``dilate`` and ``deriv`` nodes go through series substitution instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .expr import SmoothExpr, full_box
from .series import TaylorAlgebra, algebra, check_order

# Below this argument exp(-1/u) leaves the normal float range; g is treated as
# flat there (all jets of order <= 64 are below 1e-100 in that region).
G_CUTOFF = 1.0 / 708.0

HALF_PI = 0.5 * math.pi


@dataclass(frozen=True)
class Jet:
    """Derivatives [f(x), f'(x), ..., f^(r)(x)] (not divided by j!)."""

    x: object
    order: int
    values: np.ndarray
    direction: object = field(default=None)

    def __len__(self) -> int:
        return self.order + 1

    def __getitem__(self, j):
        return self.values[j]


def _mask(support, base: np.ndarray) -> np.ndarray | None:
    """Points (columns of ``base``) inside the union of boxes; None = all."""
    if len(support) == 1 and support[0] == full_box(base.shape[0]):
        return None
    inside = np.zeros(base.shape[1], dtype=bool)
    for box in support:
        hit = np.ones(base.shape[1], dtype=bool)
        for i, (lo, hi) in enumerate(box):
            if lo != -math.inf:
                hit &= base[i] >= lo
            if hi != math.inf:
                hit &= base[i] <= hi
        inside |= hit
    return inside


class _Evaluator:
    def __init__(self, alg: TaylorAlgebra, npts: int):
        self.alg = alg
        self.npts = npts
        self.memo: dict = {}
        self._inputs: list = []

    def register(self, inputs) -> int:
        self._inputs.append(inputs)
        return len(self._inputs) - 1

    def zeros(self) -> np.ndarray:
        return np.zeros((self.alg.size, self.npts))

    def vector(self, node: SmoothExpr, token: int) -> list[np.ndarray]:
        out = self.run(node, token)
        return out if isinstance(out, list) else [out]

    def run(self, node: SmoothExpr, token: int):
        key = (id(node), token)
        hit = self.memo.get(key)
        if hit is not None:
            return hit
        inputs = self._inputs[token]
        if not node.support:
            result = self.zeros() if node.dim_out == 1 else [self.zeros() for _ in range(node.dim_out)]
        else:
            base = np.array([u[0] for u in inputs])
            mask = _mask(node.support, base)
            if mask is not None and not mask.any():
                result = (
                    self.zeros() if node.dim_out == 1 else [self.zeros() for _ in range(node.dim_out)]
                )
            else:
                with np.errstate(all="ignore"):
                    result = self._dispatch(node, token, inputs)
                if mask is not None and not mask.all():
                    if isinstance(result, list):
                        result = [np.where(mask, r, 0.0) for r in result]
                    else:
                        result = np.where(mask, result, 0.0)
        self.memo[key] = result
        return result

    def _dispatch(self, node: SmoothExpr, token: int, inputs):
        alg = self.alg
        kind = node.kind
        if kind == "const":
            return alg.constant(np.full(self.npts, node.params[0]))
        if kind == "coord":
            return inputs[node.params[0]]
        if kind == "add":
            out = self.run(node.children[0], token).copy()
            for c in node.children[1:]:
                out += self.run(c, token)
            return out
        if kind == "mul":
            out = self.run(node.children[0], token)
            for c in node.children[1:]:
                out = alg.mul(out, self.run(c, token))
            return out
        if kind == "scale":
            return node.params[0] * self.run(node.children[0], token)
        if kind == "pow":
            return alg.power(self.run(node.children[0], token), node.params[0])
        if kind == "quot":
            return alg.div(self.run(node.children[0], token), self.run(node.children[1], token))
        if kind == "stack":
            return [self.run(c, token) for c in node.children]
        if kind == "compose":
            outer, inner = node.children
            inner_series = tuple(self.vector(inner, token))
            return self.run(outer, self.register(inner_series))
        if kind == "affine":
            a, b = node.params
            shifted = []
            for u, ai, bi in zip(inputs, a, b):
                v = ai * u
                v[0] += bi
                shifted.append(v)
            return self.run(node.children[0], self.register(tuple(shifted)))
        if kind == "support":
            return self.run(node.children[0], token)
        if kind == "g":
            return self._g(inputs[0])
        if kind == "tan":
            return alg.tan(HALF_PI * inputs[0])
        if kind == "atan":
            return alg.atan(inputs[0]) / HALF_PI
        if kind == "dilate":
            return self._dilate(node, inputs)
        if kind == "deriv":
            return self._deriv(node, inputs)
        raise ValueError(f"unknown node kind {kind!r}")

    def _g(self, u: np.ndarray) -> np.ndarray:
        ok = u[0] > G_CUTOFF
        if not ok.any():
            return self.zeros()
        safe = np.where(ok, u, 0.0)
        safe[0] = np.where(ok, u[0], 1.0)
        one = self.alg.constant(np.ones(self.npts))
        out = self.alg.exp(-self.alg.div(one, safe))
        return np.where(ok, out, 0.0)

    def _dilate(self, node: SmoothExpr, inputs):
        m, coef, k0, axis = node.params
        (h,) = node.children
        d = h.dim_in
        base = [u[0].copy() for u in inputs]
        base[axis] = base[axis] * float(m)
        inner_alg = algebra(d, self.alg.order)
        coeffs = _run(h, inner_alg, [inner_alg.variable(b, i) for i, b in enumerate(base)])
        logm = math.log(m)
        weights = []
        for alpha in inner_alg.indices:
            e = alpha[axis] - k0
            w = coef * math.exp(e * logm) if e * logm < 709.0 else math.copysign(math.inf, coef)
            weights.append(w)
        return self._substitute(coeffs, inner_alg, inputs, weights)

    def _deriv(self, node: SmoothExpr, inputs):
        (axis,) = node.params
        (f,) = node.children
        d = f.dim_in
        base = [u[0].copy() for u in inputs]
        up = algebra(d, self.alg.order + 1)
        coeffs = _run(f, up, [up.variable(b, i) for i, b in enumerate(base)])
        low = algebra(d, self.alg.order)
        shifted = up.shift(coeffs, axis)[: low.size]
        return self._substitute(shifted, low, inputs, None)

    def _substitute(self, coeffs, inner_alg: TaylorAlgebra, inputs, weights):
        """sum_beta w_beta * c_beta * prod_i (U_i - U_i(0))**beta_i."""
        alg = self.alg
        deltas = []
        for u in inputs:
            dlt = u.copy()
            dlt[0] = 0.0
            deltas.append(dlt)
        max_pow = inner_alg.order
        powers = []
        for dlt in deltas:
            ps = [alg.constant(np.ones(self.npts))]
            for _ in range(max_pow):
                ps.append(alg.mul(ps[-1], dlt))
            powers.append(ps)
        out = self.zeros()
        for k, beta in enumerate(inner_alg.indices):
            c = coeffs[k]
            if weights is not None:
                w = weights[k]
                if w == 0.0:
                    continue
                c = np.where(c != 0.0, c * w, 0.0)
            if not c.any():
                continue
            mono = None
            for i, e in enumerate(beta):
                if e:
                    mono = powers[i][e] if mono is None else alg.mul(mono, powers[i][e])
            if mono is None:
                out[0] += c
            else:
                out += c * mono
        return out


def _run(f: SmoothExpr, alg: TaylorAlgebra, inputs) -> np.ndarray | list:
    if len(inputs) != f.dim_in:
        raise ValueError(f"expression takes {f.dim_in} inputs, got {len(inputs)}")
    npts = inputs[0].shape[1]
    ev = _Evaluator(alg, npts)
    token = ev.register(tuple(inputs))
    return ev.run(f, token)


def _points(x, dim: int) -> np.ndarray:
    """Normalise x to an array of shape (dim, N)."""
    arr = np.asarray(x, dtype=np.float64)
    if dim == 1:
        return arr.reshape(1, -1)
    if arr.ndim == 1:
        if arr.shape[0] != dim:
            raise ValueError(f"expected a point in R^{dim}")
        return arr.reshape(dim, 1)
    if arr.shape[-1] != dim:
        raise ValueError(f"expected points in R^{dim}")
    return arr.reshape(-1, dim).T.copy()


# ---------------------------------------------------------------------------
# public API


def series_at(f: SmoothExpr, alg: TaylorAlgebra, inputs) -> np.ndarray | list:
    """Propagate caller-supplied input series through f (advanced use)."""
    return _run(f, alg, list(inputs))


def jets_1d(f: SmoothExpr, xs, r: int) -> np.ndarray:
    """Derivatives of orders 0..r of a scalar 1-D expression at many points.

    Returns an array of shape (r + 1, N).
    """
    check_order(r)
    if f.dim_in != 1 or f.dim_out != 1:
        raise ValueError("jets_1d needs a scalar function of one variable")
    xs = np.atleast_1d(np.asarray(xs, dtype=np.float64)).ravel()
    alg = algebra(1, r)
    out = _run(f, alg, [alg.line(xs, 1.0)])
    return alg.to_derivatives(out)


def eval_jet(f: SmoothExpr, x: float, r: int) -> Jet:
    """Exact derivatives f(x), ..., f^(r)(x) of a scalar 1-D expression."""
    vals = jets_1d(f, [x], r)[:, 0]
    return Jet(float(x), r, vals)


def directional_jets(f: SmoothExpr, points, v, r: int) -> np.ndarray | list[np.ndarray]:
    """Derivatives of t -> f(x + t v) at t = 0 for a batch of points.

    Returns an (r + 1, N) array, or a list of them for vector-valued f.
    """
    check_order(r)
    base = _points(points, f.dim_in)
    v = np.broadcast_to(np.asarray(v, dtype=np.float64), (f.dim_in,))
    if not np.any(v):
        raise ValueError("direction must be non-zero")
    alg = algebra(1, r)
    inputs = []
    for i in range(f.dim_in):
        s = alg.constant(base[i])
        if r >= 1:
            s[1] = v[i]
        inputs.append(s)
    out = _run(f, alg, inputs)
    if isinstance(out, list):
        return [alg.to_derivatives(o) for o in out]
    return alg.to_derivatives(out)


def directional_jet(f: SmoothExpr, x, v, r: int):
    """Jet of t -> f(x + t v); a tuple of Jets for vector-valued f."""
    out = directional_jets(f, np.asarray(x, dtype=np.float64).reshape(1, -1), v, r)
    xt = tuple(np.atleast_1d(np.asarray(x, dtype=np.float64)))
    vt = tuple(np.atleast_1d(np.asarray(v, dtype=np.float64)))
    if isinstance(out, list):
        return tuple(Jet(xt, r, o[:, 0], vt) for o in out)
    return Jet(xt, r, out[:, 0], vt)


def partial_jets(f: SmoothExpr, points, k: int) -> tuple[TaylorAlgebra, np.ndarray]:
    """All partial derivatives of total order <= k at a batch of points.

    Returns the algebra (whose ``indices`` name the multi-indices) and an
    array of shape (n_multi_indices, N) holding d^alpha f.
    """
    check_order(k)
    if f.dim_out != 1:
        raise ValueError("partial_jets needs a scalar expression")
    base = _points(points, f.dim_in)
    alg = algebra(f.dim_in, k)
    out = _run(f, alg, [alg.variable(base[i], i) for i in range(f.dim_in)])
    return alg, alg.to_derivatives(out)


def value(f: SmoothExpr, x):
    """Plain evaluation; scalar in, scalar out, arrays broadcast over points."""
    scalar_input = np.ndim(x) == 0 or (f.dim_in > 1 and np.ndim(x) == 1)
    base = _points(x, f.dim_in)
    alg = algebra(f.dim_in, 0)
    out = _run(f, alg, [alg.constant(base[i]) for i in range(f.dim_in)])
    if isinstance(out, list):
        vals = np.stack([o[0] for o in out], axis=-1)
        return vals[0] if scalar_input else vals
    return float(out[0, 0]) if scalar_input else out[0]


def value_at_origin(f: SmoothExpr) -> float:
    alg = algebra(f.dim_in, 0)
    out = _run(f, alg, [alg.constant(np.zeros(1)) for _ in range(f.dim_in)])
    if isinstance(out, list):
        return float(max(abs(o[0, 0]) for o in out))
    return float(out[0, 0])
