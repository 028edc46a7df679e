"""Phase-one simplex for barycentric feasibility systems.

Solves ``A @ lam = b, lam >= 0`` by minimizing the sum of artificial
variables with a dense tableau. Pricing is Dantzig's most-negative rule; after
more than ``m`` consecutive degenerate pivots the kernel switches to Bland's
smallest-index rule until the objective strictly decreases again, which rules
out cycling. On infeasibility the optimal phase-one duals are returned; they
form a Farkas vector ``y`` with ``y @ A <= 0`` and ``y @ b > 0``.

The pivoting kernel is compiled with numba when it is importable and runs as
plain Python otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import nnls

try:
    from numba import njit
except ImportError:  # pragma: no cover - exercised only without numba
    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda fn: fn


FEAS_TOL = 1e-9
PIVOT_TOL = 1e-9
STRICT_PIVOT_TOL = 1e-7

# kernel status codes
_OK = 0
_CAP = 1


class IndeterminateError(RuntimeError):
    """The simplex hit its iteration cap or produced an unverifiable answer."""


@dataclass(frozen=True)
class PhaseOneResult:
    feasible: bool
    objective: float
    x: np.ndarray  # primal point, length n (meaningful when feasible)
    y: np.ndarray  # phase-one duals in the caller's row signs, length m
    iterations: int


@njit(cache=True, nogil=True)
def _phase_one_kernel(A, b, max_iter, piv_tol):
    m, n = A.shape
    width = n + m + 1
    T = np.zeros((m + 1, width))
    sign = np.ones(m)
    for i in range(m):
        if b[i] < 0.0:
            sign[i] = -1.0
        for j in range(n):
            T[i, j] = sign[i] * A[i, j]
        T[i, n + i] = 1.0
        T[i, width - 1] = sign[i] * b[i]
    # reduced costs of the phase-one objective with artificial basis
    for j in range(n):
        s = 0.0
        for i in range(m):
            s += T[i, j]
        T[m, j] = -s
    s = 0.0
    for i in range(m):
        s += T[i, width - 1]
    T[m, width - 1] = -s

    basis = np.empty(m, dtype=np.int64)
    for i in range(m):
        basis[i] = n + i

    it = 0
    status = _OK
    bland = False
    stalled = 0
    while True:
        enter = -1
        if bland:
            for j in range(n + m):
                if T[m, j] < -piv_tol:
                    enter = j
                    break
        else:
            most = -piv_tol
            for j in range(n + m):
                if T[m, j] < most:
                    most = T[m, j]
                    enter = j
        if enter < 0:
            break
        if it >= max_iter:
            status = _CAP
            break
        leave = -1
        best = 0.0
        for i in range(m):
            a = T[i, enter]
            if a > piv_tol:
                ratio = T[i, width - 1] / a
                if leave < 0 or ratio < best - 1e-12:
                    leave = i
                    best = ratio
                elif abs(ratio - best) <= 1e-12 and (
                    basis[i] < basis[leave] if bland else a > T[leave, enter]
                ):
                    leave = i
                    best = ratio
        if leave < 0:
            # phase one is bounded below by zero; an unbounded ray means the
            # column is numerically void, so retire it
            T[m, enter] = 0.0
            continue
        if best * -T[m, enter] <= 1e-14:
            stalled += 1
            if stalled > m:
                bland = True
        else:
            stalled = 0
            bland = False
        piv = T[leave, enter]
        for j in range(width):
            T[leave, j] /= piv
        for i in range(m + 1):
            if i != leave:
                f = T[i, enter]
                if f != 0.0:
                    for j in range(width):
                        T[i, j] -= f * T[leave, j]
        basis[leave] = enter
        it += 1

    x = np.zeros(n)
    for i in range(m):
        if basis[i] < n:
            x[basis[i]] = T[i, width - 1]
    y = np.empty(m)
    for i in range(m):
        # artificial reduced cost is 1 - y_i in the flipped system
        y[i] = sign[i] * (1.0 - T[m, n + i])
    objective = -T[m, width - 1]
    return status, objective, x, y, it


def _polish(A, b, x, residual):
    """Nonnegative least squares restricted to the support of ``x``."""
    support = np.flatnonzero(x > 0)
    if support.size == 0:
        return x, residual
    xs, _ = nnls(A[:, support], b)
    refined = np.zeros_like(x)
    refined[support] = xs
    r = float(np.abs(A @ refined - b).sum())
    return (refined, r) if r < residual else (x, residual)


def phase_one(
    A, b, tol: float = FEAS_TOL, max_iter: int | None = None, pivot_tol: float = PIVOT_TOL
) -> PhaseOneResult:
    """Decide feasibility of ``A @ x = b, x >= 0``.

    ``tol`` bounds the l1 residual accepted as feasible. Pivot elements
    below ``pivot_tol`` are never used. ``max_iter``
    defaults to ``10 * (m + n)``; exceeding it raises
    :class:`IndeterminateError`.
    """
    A = np.ascontiguousarray(A, dtype=float)
    b = np.ascontiguousarray(b, dtype=float)
    m, n = A.shape
    if b.shape != (m,):
        raise ValueError(f"rhs has shape {b.shape}, expected ({m},)")
    if max_iter is None:
        max_iter = 10 * (m + n)
    status, objective, x, y, it = _phase_one_kernel(A, b, max_iter, pivot_tol)
    if status == _CAP:
        raise IndeterminateError(
            f"simplex iteration cap {max_iter} exceeded ({m} rows, {n} columns)"
        )
    x = np.maximum(x, 0.0)
    residual = float(np.abs(A @ x - b).sum())
    if residual > tol and objective <= tol:
        # the tableau believes it is feasible: refine on the support
        x, residual = _polish(A, b, x, residual)
    feasible = residual <= tol
    return PhaseOneResult(feasible, float(objective), x, y, int(it))
