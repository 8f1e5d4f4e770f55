"""Leaf kernels for blocked Cholesky: potrf, trsm, syrk, gemm.

Lower-triangular, right-looking conventions; updates subtract.  The loops are
compiled with numba and release the GIL so worker threads run them in
parallel.  Views may be strided windows into a larger array.
"""
import math

import numpy as np
from numba import njit

from .errors import NumericalError, UsageError


@njit(cache=True, nogil=True)
def _potrf(a):
    n = a.shape[0]
    for j in range(n):
        s = a[j, j]
        for k in range(j):
            s -= a[j, k] * a[j, k]
        if not s > 0.0:
            return j
        d = math.sqrt(s)
        a[j, j] = d
        for i in range(j + 1, n):
            t = a[i, j]
            for k in range(j):
                t -= a[i, k] * a[j, k]
            a[i, j] = t / d
    for i in range(n):
        for j in range(i + 1, n):
            a[i, j] = 0.0
    return -1


@njit(cache=True, nogil=True)
def _trsm(l, b):
    m = b.shape[0]
    n = b.shape[1]
    for j in range(n):
        if l[j, j] == 0.0:
            return j
    for r in range(m):
        for j in range(n):
            t = b[r, j]
            for k in range(j):
                t -= b[r, k] * l[j, k]
            b[r, j] = t / l[j, j]
    return -1


@njit(cache=True, nogil=True)
def _syrk(a, c):
    n = c.shape[0]
    kk = a.shape[1]
    for i in range(n):
        for j in range(i + 1):
            s = 0.0
            for k in range(kk):
                s += a[i, k] * a[j, k]
            c[i, j] -= s


@njit(cache=True, nogil=True)
def _gemm(a, b, c):
    m = c.shape[0]
    n = c.shape[1]
    kk = a.shape[1]
    for i in range(m):
        for j in range(n):
            s = 0.0
            for k in range(kk):
                s += a[i, k] * b[j, k]
            c[i, j] -= s


def _check2d(name, *arrays):
    for x in arrays:
        if x.ndim != 2 or x.dtype != np.float64:
            raise UsageError(f"{name}: expected 2-d float64 views, got {x.dtype} with ndim={x.ndim}")


def potrf(a):
    """Factor ``a`` in place into its lower Cholesky factor; zero the strict upper part.

    Only the lower triangle of the input is read.
    """
    _check2d("potrf", a)
    if a.shape[0] != a.shape[1]:
        raise UsageError(f"potrf: block must be square, got {a.shape}")
    bad = _potrf(a)
    if bad >= 0:
        raise NumericalError("potrf", bad)


def trsm(l, b):
    """``b <- b @ inv(l).T`` for lower-triangular ``l``."""
    _check2d("trsm", l, b)
    if l.shape[0] != l.shape[1] or b.shape[1] != l.shape[0]:
        raise UsageError(f"trsm: shapes l{l.shape} b{b.shape} do not conform")
    bad = _trsm(l, b)
    if bad >= 0:
        raise NumericalError("trsm", bad)


def syrk(a, c):
    """Lower triangle of ``c`` minus ``a @ a.T``; the strict upper part of ``c`` is left alone."""
    _check2d("syrk", a, c)
    if c.shape[0] != c.shape[1] or a.shape[0] != c.shape[0]:
        raise UsageError(f"syrk: shapes a{a.shape} c{c.shape} do not conform")
    _syrk(a, c)


def gemm(a, b, c):
    """``c <- c - a @ b.T``."""
    _check2d("gemm", a, b, c)
    if a.shape[0] != c.shape[0] or b.shape[0] != c.shape[1] or a.shape[1] != b.shape[1]:
        raise UsageError(f"gemm: shapes a{a.shape} b{b.shape} c{c.shape} do not conform")
    _gemm(a, b, c)
