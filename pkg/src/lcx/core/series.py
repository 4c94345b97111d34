"""Truncated multivariate Taylor algebras.

A :class:`TaylorAlgebra` fixes the number of formal variables and the total
degree at which series are truncated.  Univariate jets are the one-variable
case; mixed partial derivatives come from the multivariate case.
"""

from __future__ import annotations

import itertools
import math
import os
from functools import lru_cache

import numpy as np

from .. import _kernels

DEFAULT_MAX_ORDER = 64


class CapabilityError(RuntimeError):
    """Raised when a request exceeds a configured capability (e.g. jet order)."""


def max_jet_order() -> int:
    raw = os.environ.get("LCX_MAX_JET_ORDER")
    if raw is None:
        return DEFAULT_MAX_ORDER
    try:
        value = int(raw)
    except ValueError as exc:
        raise CapabilityError(f"LCX_MAX_JET_ORDER is not an integer: {raw!r}") from exc
    if value < 0:
        raise CapabilityError("LCX_MAX_JET_ORDER must be non-negative")
    return value


def check_order(order: int) -> None:
    if order < 0:
        raise ValueError("jet order must be non-negative")
    cap = max_jet_order()
    if order > cap:
        raise CapabilityError(f"jet order {order} exceeds the configured maximum {cap}")


def _multi_indices(nvars: int, order: int) -> list[tuple[int, ...]]:
    out = []
    for total in range(order + 1):
        # reverse-lexicographic within a degree puts x_0^total first
        block = [
            c for c in itertools.product(range(total + 1), repeat=nvars) if sum(c) == total
        ]
        block.sort(reverse=True)
        out.extend(block)
    return out


class TaylorAlgebra:
    """Series in ``nvars`` variables truncated above total degree ``order``."""

    def __init__(self, nvars: int, order: int):
        if nvars < 1:
            raise ValueError("need at least one variable")
        self.nvars = nvars
        self.order = order
        self.indices = _multi_indices(nvars, order)
        self.index_of = {a: i for i, a in enumerate(self.indices)}
        self.size = len(self.indices)
        self.deg = np.array([sum(a) for a in self.indices], dtype=np.int64)
        ptr = [0]
        left: list[int] = []
        right: list[int] = []
        for a in self.indices:
            for b in itertools.product(*(range(ai + 1) for ai in a)):
                c = tuple(ai - bi for ai, bi in zip(a, b))
                left.append(self.index_of[b])
                right.append(self.index_of[c])
            ptr.append(len(left))
        self.ptr = np.array(ptr, dtype=np.int64)
        self.left = np.array(left, dtype=np.int64)
        self.right = np.array(right, dtype=np.int64)
        # derivative = Taylor coefficient * alpha!
        self.factorials = np.array(
            [math.prod(math.factorial(ai) for ai in a) for a in self.indices], dtype=np.float64
        )

    def __repr__(self) -> str:
        return f"TaylorAlgebra(nvars={self.nvars}, order={self.order})"

    # construction -------------------------------------------------------
    def constant(self, values) -> np.ndarray:
        values = np.asarray(values, dtype=np.float64)
        out = np.zeros((self.size, values.shape[0]))
        out[0] = values
        return out

    def variable(self, base, i: int) -> np.ndarray:
        """Series of ``base + t_i`` (the i-th formal variable)."""
        out = self.constant(base)
        if self.order >= 1:
            unit = [0] * self.nvars
            unit[i] = 1
            out[self.index_of[tuple(unit)]] = 1.0
        return out

    def line(self, base, direction: float) -> np.ndarray:
        """Univariate series of ``base + direction * t``."""
        if self.nvars != 1:
            raise ValueError("line() needs a univariate algebra")
        out = self.constant(base)
        if self.order >= 1:
            out[1] = direction
        return out

    # arithmetic ---------------------------------------------------------
    def mul(self, a, b):
        return _kernels.KERNELS.mul(a, b, self.ptr, self.left, self.right)

    def div(self, a, b):
        return _kernels.KERNELS.div(a, b, self.ptr, self.left, self.right)

    def exp(self, a):
        return _kernels.KERNELS.exp(a, self.ptr, self.left, self.right, self.deg)

    def tan(self, a):
        return _kernels.KERNELS.tan(a, self.ptr, self.left, self.right, self.deg)

    def atan(self, a):
        return _kernels.KERNELS.atan(a, self.ptr, self.left, self.right, self.deg)

    def power(self, a, n: int):
        if n < 0:
            raise ValueError("negative powers are not supported")
        result = self.constant(np.ones(a.shape[1]))
        base = a
        while n:
            if n & 1:
                result = self.mul(result, base)
            n >>= 1
            if n:
                base = self.mul(base, base)
        return result

    def shift(self, a, axis: int = 0) -> np.ndarray:
        """Series of the partial derivative along ``axis`` (loses the top degree)."""
        out = np.zeros_like(a)
        for k, alpha in enumerate(self.indices):
            if self.deg[k] == self.order:
                continue
            up = list(alpha)
            up[axis] += 1
            out[k] = a[self.index_of[tuple(up)]] * up[axis]
        return out

    def to_derivatives(self, a) -> np.ndarray:
        return a * self.factorials[:, None]


@lru_cache(maxsize=64)
def algebra(nvars: int, order: int) -> TaylorAlgebra:
    return TaylorAlgebra(nvars, order)
