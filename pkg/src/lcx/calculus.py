"""Numerical validation of first derivatives of operators between function spaces.

Only the step t is discretized: every x-dependence (values and derivatives in
x) is computed by exact jets, so a difference quotient

    D_t = (op(base + t dir) - op(base)) / t

differs from the closed-form Gateaux derivative by the O(t) remainder alone.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .bundle import FibrePathology, Section, f_bundle
from .core import (
    SmoothExpr,
    add,
    compose,
    derivative,
    jets_1d,
    mul,
    scale,
    support_bound,
    zero,
)
from .line import df_line, f_line

DYADIC_T = tuple(2.0**-k for k in range(3, 13))
DEFAULT_SLOPE = 0.9
LIMIT_TOL = 1e-5

OPERATORS = ("composition", "f_line", "f_bundle", "mult")


@dataclass(frozen=True)
class OperatorHandle:
    """An operator on tuples of expressions; ``closure`` holds fixed data."""

    name: str
    closure: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.name not in OPERATORS:
            raise ValueError(f"unknown operator {self.name!r}")

    def __call__(self, *inputs: SmoothExpr) -> SmoothExpr:
        if self.name == "composition":
            gamma, eta = inputs
            return compose(gamma, eta)
        if self.name == "f_line":
            (gamma,) = inputs
            return f_line(gamma)
        if self.name == "mult":
            gamma, eta = inputs
            return mul(gamma, eta)
        P: FibrePathology = self.closure["pathology"]
        return f_bundle(Section(tuple(inputs)), P)

    def derivative(self, base, direction) -> SmoothExpr:
        """Closed-form Gateaux derivative, where one is known."""
        if self.name == "composition":
            (gamma, eta), (gamma1, eta1) = base, direction
            return add(mul(compose(derivative(gamma), eta), eta1), compose(gamma1, eta))
        if self.name == "f_line":
            return df_line(base[0], direction[0])
        if self.name == "mult":
            (gamma, eta), (gamma1, eta1) = base, direction
            return add(mul(gamma1, eta), mul(gamma, eta1))
        raise NotImplementedError(f"no closed form for {self.name}")


def _perturb(base, direction, t: float):
    return tuple(add(b, scale(t, v)) for b, v in zip(base, direction))


def _jets(f: SmoothExpr, samples, r: int) -> np.ndarray:
    return jets_1d(f, samples, r)


def gateaux_fd(op: OperatorHandle, base, direction, t: float, samples, r: int) -> np.ndarray:
    """Jets (orders 0..r, shape (r+1, N)) of (op(base + t dir) - op(base)) / t."""
    if t == 0:
        raise ValueError("t must be non-zero")
    moved = op(*_perturb(base, direction, t))
    here = op(*base)
    return (_jets(moved, samples, r) - _jets(here, samples, r)) / t


@dataclass(frozen=True)
class ConvergenceReport:
    t_grid: tuple[float, ...]
    errors: tuple[float, ...]
    slope: float | None
    passed: bool
    limit_error: float
    scale: float
    slope_threshold: float = DEFAULT_SLOPE
    slope_full: float | None = None

    def to_json(self) -> dict:
        return {
            "t_grid": [repr(t) for t in self.t_grid],
            "errors": [repr(e) for e in self.errors],
            "slope": None if self.slope is None else repr(self.slope),
            "slope_full_grid": None if self.slope_full is None else repr(self.slope_full),
            "pass": self.passed,
            "limit_error": repr(self.limit_error),
            "scale": repr(self.scale),
            "slope_threshold": repr(self.slope_threshold),
        }


def fit_slope(ts, errs) -> float:
    """Least-squares slope of log(err) against log(t)."""
    x = np.log(np.asarray(ts))
    y = np.log(np.asarray(errs))
    return float(np.polyfit(x, y, 1)[0])


def richardson_limit(ts, quotients, levels: int = 4):
    """t -> 0 limit of D(t) = D + c1 t + c2 t^2 + ... from the smallest dyadic steps.

    Uses the halving chain ending at min(ts); each table column removes one
    power of t: R_j = (2^j R_{j-1}(t/2) - R_{j-1}(t)) / (2^j - 1).
    """
    order = np.argsort(ts)
    chain = [quotients[order[0]]]
    t = ts[order[0]]
    lookup = {tt: q for tt, q in zip(ts, quotients)}
    while len(chain) < levels and 2 * t in lookup:
        t *= 2
        chain.append(lookup[t])
    # chain[0] has the smallest t; table rows run from coarse to fine
    row = chain[::-1]
    for j in range(1, len(row)):
        factor = 2.0**j
        row = [(factor * row[i + 1] - row[i]) / (factor - 1) for i in range(len(row) - 1)]
    return row[-1]


def default_samples(*fs: SmoothExpr, extra=(0.0,), per_interval: int = 21) -> np.ndarray:
    """21 equispaced points over the hull of the inputs' supports, plus special points."""
    pts = list(extra)
    for f in fs:
        hull = support_bound(f)
        if hull is None or hull[0][0] == hull[0][1]:
            continue
        pts.extend(np.linspace(hull[0][0], hull[0][1], per_interval).tolist())
    return np.unique(np.asarray(pts, dtype=np.float64))


def convergence_check(
    op: OperatorHandle,
    base,
    direction,
    samples,
    r_max: int = 2,
    t_grid=DYADIC_T,
    slope_threshold: float = DEFAULT_SLOPE,
    closed: SmoothExpr | None = None,
) -> ConvergenceReport:
    """Compare difference quotients with the closed form over a dyadic t grid.

    Passes iff the errors are non-increasing after the first two entries, the
    log-log slope fitted over those same entries reaches ``slope_threshold``,
    and the Richardson extrapolation to t = 0 matches the closed form to
    1e-5 * (1 + scale).  The slope over the whole grid is reported as well.
    """
    samples = np.asarray(samples, dtype=np.float64)
    closed = op.derivative(base, direction) if closed is None else closed
    target = _jets(closed, samples, r_max)
    scale_ = float(np.max(np.abs(target))) if target.size else 0.0
    quotients = [gateaux_fd(op, base, direction, t, samples, r_max) for t in t_grid]
    errors = tuple(float(np.max(np.abs(q - target))) for q in quotients)
    ts = list(t_grid)
    extrap = richardson_limit(ts, quotients)
    limit_error = float(np.max(np.abs(extrap - target)))
    limit_ok = limit_error <= LIMIT_TOL * (1 + scale_)
    noise = 1e-10 * (1 + scale_)
    if max(errors) <= noise:
        # the quotient is exact (e.g. a linear operator or a zero direction)
        return ConvergenceReport(tuple(ts), errors, None, limit_ok, limit_error, scale_, slope_threshold)
    monotone = all(errors[i + 1] <= errors[i] + noise for i in range(2, len(errors) - 1))
    floored = [max(e, noise) for e in errors]
    slope_full = fit_slope(ts, floored)
    start = 2 if len(ts) > 3 else 0
    # entries at the noise floor carry no information about the rate
    keep = [i for i in range(start, len(ts)) if errors[i] > noise]
    if len(keep) < 2:
        return ConvergenceReport(tuple(ts), errors, None, monotone and limit_ok, limit_error, scale_,
                                 slope_threshold, slope_full)
    slope = fit_slope([ts[i] for i in keep], [errors[i] for i in keep])
    passed = monotone and slope >= slope_threshold and limit_ok
    return ConvergenceReport(tuple(ts), errors, slope, passed, limit_error, scale_, slope_threshold, slope_full)


def composition_derivative_check(gamma, eta, gamma1, eta1, samples=None, r_max: int = 2, **kw):
    """d Gamma(gamma, eta; gamma1, eta1) = gamma'(eta) eta1 + gamma1(eta)."""
    if samples is None:
        samples = default_samples(eta, eta1)
    return convergence_check(OperatorHandle("composition"), (gamma, eta), (gamma1, eta1), samples, r_max, **kw)


def f_line_derivative_check(gamma, gamma1, samples=None, r_max: int = 2, **kw):
    """df(gamma; gamma1) = gamma1 o gamma + (gamma' o gamma) gamma1 - gamma1(0)."""
    if samples is None:
        samples = default_samples(gamma, gamma1)
    return convergence_check(OperatorHandle("f_line"), (gamma,), (gamma1,), samples, r_max, **kw)


@dataclass(frozen=True)
class IntegralFormReport:
    t: float
    nodes: int
    discrepancy: float
    refined_nodes: int
    refined_discrepancy: float

    @property
    def reduction(self) -> float:
        if self.refined_discrepancy == 0:
            return math.inf
        return self.discrepancy / self.refined_discrepancy

    def to_json(self) -> dict:
        return {
            "t": repr(self.t),
            "nodes": str(self.nodes),
            "discrepancy": repr(self.discrepancy),
            "refined_nodes": str(self.refined_nodes),
            "refined_discrepancy": repr(self.refined_discrepancy),
        }


def integral_form(gamma: SmoothExpr, eta: SmoothExpr, eta1: SmoothExpr, t: float, samples, nodes: int) -> np.ndarray:
    """F_t(x) = int_0^1 gamma'(eta(x) + s t eta1(x)) eta1(x) ds by Gauss-Legendre."""
    s, w = np.polynomial.legendre.leggauss(nodes)
    s = 0.5 * (s + 1.0)
    w = 0.5 * w
    e = jets_1d(eta, samples, 0)[0]
    e1 = jets_1d(eta1, samples, 0)[0]
    args = e[None, :] + t * s[:, None] * e1[None, :]
    dg = jets_1d(gamma, args.ravel(), 1)[1].reshape(args.shape)
    return (w[:, None] * dg).sum(axis=0) * e1


def integral_form_check(gamma, eta, eta1, t: float, samples=None, nodes: int = 20) -> IntegralFormReport:
    """|F_t - (gamma o (eta + t eta1) - gamma o eta) / t| at ``nodes`` and 2 * ``nodes``."""
    if t == 0:
        raise ValueError("t must be non-zero")
    if samples is None:
        samples = default_samples(eta, eta1)
    samples = np.asarray(samples, dtype=np.float64)
    moved = compose(gamma, add(eta, scale(t, eta1)))
    exact = (jets_1d(moved, samples, 0)[0] - jets_1d(compose(gamma, eta), samples, 0)[0]) / t
    a = float(np.max(np.abs(integral_form(gamma, eta, eta1, t, samples, nodes) - exact)))
    b = float(np.max(np.abs(integral_form(gamma, eta, eta1, t, samples, 2 * nodes) - exact)))
    return IntegralFormReport(t, nodes, a, 2 * nodes, b)


def triangle_diagnostic(gamma, eta, eta1, t: float, samples=None, nodes: int = 20) -> dict:
    """The three legs between the difference quotient, F_t and the t -> 0 closed form.

    |FD - closed| <= |FD - F_t| + |F_t - closed|; the first leg is only
    quadrature error, the second is the O(t) remainder, so a failing
    derivative check can be attributed to one of them.
    """
    if t == 0:
        raise ValueError("t must be non-zero")
    if samples is None:
        samples = default_samples(eta, eta1)
    samples = np.asarray(samples, dtype=np.float64)
    fd = gateaux_fd(OperatorHandle("composition"), (gamma, eta), (zero(), eta1), t, samples, 0)[0]
    closed = jets_1d(mul(compose(derivative(gamma), eta), eta1), samples, 0)[0]
    quad = integral_form(gamma, eta, eta1, t, samples, nodes)
    legs = {
        "fd_vs_closed": float(np.max(np.abs(fd - closed))),
        "fd_vs_quadrature": float(np.max(np.abs(fd - quad))),
        "quadrature_vs_closed": float(np.max(np.abs(quad - closed))),
    }
    legs["triangle_holds"] = legs["fd_vs_closed"] <= (legs["fd_vs_quadrature"] + legs["quadrature_vs_closed"]) * (
        1 + 1e-12
    ) + 1e-300
    return legs
