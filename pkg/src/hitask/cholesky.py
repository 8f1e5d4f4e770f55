"""Blocked Cholesky as four splittable operations: potrf, trsm, syrk, gemm.

Each split walks the child grids of its arguments and emits one child task
per block update; each run calls the matching leaf kernel.
"""
import numpy as np

from . import kernels
from .errors import ConfigurationError, NumericalError
from .tasks import R, RW, Operation, create_task, register_operation


def _grid(h, op):
    if h.grid is None:
        raise ConfigurationError(
            f"{op} split reached leaf {h.label}: partition tree is shallower than the flow graph")
    return h.grid


def potrf_split(t, emit):
    a = t.args[0][0]
    p, pc = _grid(a, "potrf")
    if p != pc:
        raise ConfigurationError(f"potrf split needs a square grid, got {p}x{pc}")
    for k in range(p):
        emit("potrf", [(a(k, k), RW)])
        for i in range(k + 1, p):
            emit("trsm", [(a(k, k), R), (a(i, k), RW)])
        for i in range(k + 1, p):
            emit("syrk", [(a(i, k), R), (a(i, i), RW)])
        for j in range(k + 1, p):
            for i in range(j + 1, p):
                emit("gemm", [(a(i, k), R), (a(j, k), R), (a(i, j), RW)])


def trsm_split(t, emit):
    # B <- B inv(L)^T, one block column of B at a time
    l, b = t.args[0][0], t.args[1][0]
    q, qc = _grid(l, "trsm")
    m, bq = _grid(b, "trsm")
    if q != qc or bq != q:
        raise ConfigurationError(f"trsm split: grids {q}x{qc} and {m}x{bq} do not conform")
    for j in range(q):
        for r in range(m):
            emit("trsm", [(l(j, j), R), (b(r, j), RW)])
        for i in range(j + 1, q):
            for r in range(m):
                emit("gemm", [(b(r, j), R), (l(i, j), R), (b(r, i), RW)])


def syrk_split(t, emit):
    a, c = t.args[0][0], t.args[1][0]
    m, q = _grid(a, "syrk")
    cm, cn = _grid(c, "syrk")
    if cm != cn or cm != m:
        raise ConfigurationError(f"syrk split: grids {m}x{q} and {cm}x{cn} do not conform")
    for k in range(q):
        for i in range(m):
            emit("syrk", [(a(i, k), R), (c(i, i), RW)])
            for j in range(i):
                emit("gemm", [(a(i, k), R), (a(j, k), R), (c(i, j), RW)])


def gemm_split(t, emit):
    a, b, c = (h for h, _ in t.args)
    m, q = _grid(a, "gemm")
    n, bq = _grid(b, "gemm")
    cm, cn = _grid(c, "gemm")
    if q != bq or (cm, cn) != (m, n):
        raise ConfigurationError(f"gemm split: grids {m}x{q}, {n}x{bq}, {cm}x{cn} do not conform")
    for i in range(m):
        for j in range(n):
            for k in range(q):
                emit("gemm", [(a(i, k), R), (b(j, k), R), (c(i, j), RW)])


def _locate(err, h):
    return NumericalError(err.kernel, err.pivot, h.row_offset + err.pivot, h.label)


def potrf_run(t):
    h = t.args[0][0]
    try:
        kernels.potrf(t.region(h))
    except NumericalError as err:
        raise _locate(err, h) from None


def trsm_run(t):
    l, b = t.args[0][0], t.args[1][0]
    try:
        kernels.trsm(t.region(l), t.region(b))
    except NumericalError as err:
        raise _locate(err, l) from None


def syrk_run(t):
    a, c = t.args[0][0], t.args[1][0]
    kernels.syrk(t.region(a), t.region(c))


def gemm_run(t):
    a, b, c = (h for h, _ in t.args)
    kernels.gemm(t.region(a), t.region(b), t.region(c))


OPERATIONS = (
    Operation("potrf", potrf_split, potrf_run),
    Operation("trsm", trsm_split, trsm_run),
    Operation("syrk", syrk_split, syrk_run),
    Operation("gemm", gemm_split, gemm_run),
)

for _op in OPERATIONS:
    register_operation(_op, replace=True)


def cholesky(dispatcher, a):
    """Submit the factorization of ``a`` (level-0 handle) as one root task.

    The lower factor overwrites ``a`` once ``dispatcher.wait_all()`` returns.
    """
    task = create_task("potrf", None, [(a, RW)])
    dispatcher.submit(task)
    return task


def potrf_child_counts(p):
    """Closed-form child counts of a potrf split over a p x p grid."""
    return {
        "potrf": p,
        "trsm": p * (p - 1) // 2,
        "syrk": p * (p - 1) // 2,
        "gemm": p * (p - 1) * (p - 2) // 6,
    }


def residual(factor, original):
    """``||L L^T - A||_F / ||A||_F`` with ``L`` the lower triangle of ``factor``."""
    low = np.tril(factor)
    return float(np.linalg.norm(low @ low.T - original) / np.linalg.norm(original))
