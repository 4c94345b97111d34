"""Hot loops of the truncated Taylor arithmetic.

Every series is a float64 array of shape ``(n_coef, N)``: row ``k`` holds the
Taylor coefficient of multi-index ``k`` at each of ``N`` base points.  Products
are driven by a CSR table of index pairs ``(left[p], right[p])`` with
``left + right == k`` for ``p in range(ptr[k], ptr[k + 1])``; ``deg[k]`` is the
total degree of multi-index ``k``.  Index 0 is always the constant term.

Two implementations exist for each kernel: a numba ``@njit`` one and a pure
numpy one.  ``LCX_NUMBA=0`` in the environment (or numba being absent) selects
the numpy path at import time; both are always reachable through
``NUMPY_KERNELS`` and ``NUMBA_KERNELS`` for benchmarking and cross-checks.
"""

from __future__ import annotations

import os
from types import SimpleNamespace

import numpy as np

try:  # pragma: no cover - exercised implicitly
    import numba
except ImportError:  # pragma: no cover
    numba = None


# ---------------------------------------------------------------------------
# numpy reference path


def _mul_np(a, b, ptr, left, right):
    n = a.shape[0]
    out = np.empty((n, a.shape[1]))
    for k in range(n):
        s, e = ptr[k], ptr[k + 1]
        out[k] = np.einsum("ij,ij->j", a[left[s:e]], b[right[s:e]])
    return out


def _div_np(a, b, ptr, left, right):
    n = a.shape[0]
    out = np.empty((n, a.shape[1]))
    b0 = b[0]
    out[0] = a[0] / b0
    for k in range(1, n):
        s, e = ptr[k], ptr[k + 1]
        li, ri = left[s:e], right[s:e]
        keep = li != 0
        acc = a[k] - np.einsum("ij,ij->j", b[li[keep]], out[ri[keep]])
        out[k] = acc / b0
    return out


def _exp_np(a, ptr, left, right, deg):
    n = a.shape[0]
    out = np.empty((n, a.shape[1]))
    out[0] = np.exp(a[0])
    for k in range(1, n):
        s, e = ptr[k], ptr[k + 1]
        li, ri = left[s:e], right[s:e]
        keep = li != 0
        li, ri = li[keep], ri[keep]
        w = deg[li].astype(np.float64)[:, None]
        out[k] = np.einsum("ij,ij->j", w * a[li], out[ri]) / deg[k]
    return out


def _tan_np(a, ptr, left, right, deg):
    n = a.shape[0]
    t = np.empty((n, a.shape[1]))
    q = np.empty_like(t)
    t[0] = np.tan(a[0])
    q[0] = 1.0 + t[0] * t[0]
    for k in range(1, n):
        s, e = ptr[k], ptr[k + 1]
        li, ri = left[s:e], right[s:e]
        keep = li != 0
        lk, rk = li[keep], ri[keep]
        w = deg[lk].astype(np.float64)[:, None]
        t[k] = np.einsum("ij,ij->j", w * a[lk], q[rk]) / deg[k]
        q[k] = np.einsum("ij,ij->j", t[li], t[ri])
    return t


def _atan_np(a, ptr, left, right, deg):
    q = _mul_np(a, a, ptr, left, right)
    q[0] += 1.0
    n = a.shape[0]
    out = np.empty((n, a.shape[1]))
    out[0] = np.arctan(a[0])
    for k in range(1, n):
        s, e = ptr[k], ptr[k + 1]
        li, ri = left[s:e], right[s:e]
        keep = (li != 0) & (ri != 0)
        lk, rk = li[keep], ri[keep]
        w = deg[lk].astype(np.float64)[:, None]
        acc = deg[k] * a[k] - np.einsum("ij,ij->j", w * out[lk], q[rk])
        out[k] = acc / (deg[k] * q[0])
    return out


NUMPY_KERNELS = SimpleNamespace(
    name="numpy", mul=_mul_np, div=_div_np, exp=_exp_np, tan=_tan_np, atan=_atan_np
)


# ---------------------------------------------------------------------------
# numba path

NUMBA_KERNELS = None

if numba is not None:
    njit = numba.njit(cache=True, fastmath=False)

    @njit
    def _mul_nb(a, b, ptr, left, right):
        n, npts = a.shape
        out = np.zeros((n, npts))
        for k in range(n):
            for p in range(ptr[k], ptr[k + 1]):
                i = left[p]
                j = right[p]
                for q in range(npts):
                    out[k, q] += a[i, q] * b[j, q]
        return out

    @njit
    def _div_nb(a, b, ptr, left, right):
        n, npts = a.shape
        out = np.zeros((n, npts))
        for q in range(npts):
            out[0, q] = a[0, q] / b[0, q]
        for k in range(1, n):
            for q in range(npts):
                out[k, q] = a[k, q]
            for p in range(ptr[k], ptr[k + 1]):
                i = left[p]
                if i == 0:
                    continue
                j = right[p]
                for q in range(npts):
                    out[k, q] -= b[i, q] * out[j, q]
            for q in range(npts):
                out[k, q] /= b[0, q]
        return out

    @njit
    def _exp_nb(a, ptr, left, right, deg):
        n, npts = a.shape
        out = np.zeros((n, npts))
        for q in range(npts):
            out[0, q] = np.exp(a[0, q])
        for k in range(1, n):
            for p in range(ptr[k], ptr[k + 1]):
                i = left[p]
                if i == 0:
                    continue
                j = right[p]
                w = float(deg[i])
                for q in range(npts):
                    out[k, q] += w * a[i, q] * out[j, q]
            dk = float(deg[k])
            for q in range(npts):
                out[k, q] /= dk
        return out

    @njit
    def _tan_nb(a, ptr, left, right, deg):
        n, npts = a.shape
        t = np.zeros((n, npts))
        qq = np.zeros((n, npts))
        for q in range(npts):
            t[0, q] = np.tan(a[0, q])
            qq[0, q] = 1.0 + t[0, q] * t[0, q]
        for k in range(1, n):
            for p in range(ptr[k], ptr[k + 1]):
                i = left[p]
                if i == 0:
                    continue
                j = right[p]
                w = float(deg[i])
                for q in range(npts):
                    t[k, q] += w * a[i, q] * qq[j, q]
            dk = float(deg[k])
            for q in range(npts):
                t[k, q] /= dk
            for p in range(ptr[k], ptr[k + 1]):
                i = left[p]
                j = right[p]
                for q in range(npts):
                    qq[k, q] += t[i, q] * t[j, q]
        return t

    @njit
    def _atan_nb(a, ptr, left, right, deg):
        n, npts = a.shape
        qq = _mul_nb(a, a, ptr, left, right)
        for q in range(npts):
            qq[0, q] += 1.0
        out = np.zeros((n, npts))
        for q in range(npts):
            out[0, q] = np.arctan(a[0, q])
        for k in range(1, n):
            dk = float(deg[k])
            for q in range(npts):
                out[k, q] = dk * a[k, q]
            for p in range(ptr[k], ptr[k + 1]):
                i = left[p]
                j = right[p]
                if i == 0 or j == 0:
                    continue
                w = float(deg[i])
                for q in range(npts):
                    out[k, q] -= w * out[i, q] * qq[j, q]
            for q in range(npts):
                out[k, q] /= dk * qq[0, q]
        return out

    NUMBA_KERNELS = SimpleNamespace(
        name="numba", mul=_mul_nb, div=_div_nb, exp=_exp_nb, tan=_tan_nb, atan=_atan_nb
    )


def _select():
    flag = os.environ.get("LCX_NUMBA", "1").strip().lower()
    if NUMBA_KERNELS is None or flag in {"0", "false", "no", "off"}:
        return NUMPY_KERNELS
    return NUMBA_KERNELS


KERNELS = _select()
