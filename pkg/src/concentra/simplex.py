"""Dense two-phase simplex with Bland's anti-cycling rule.

Problems here are small (a few hundred variables), so a deterministic dense
tableau beats a general-purpose solver: no scaling heuristics, no
perturbation, bit-identical runs.  Interface mirrors the usual linprog shape:

    minimize c @ x  subject to  A_ub @ x <= b_ub,  A_eq @ x == b_eq,
    lo <= x <= hi  per-variable (None for unbounded).
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

__all__ = ["LPStatus", "LPResult", "solve_lp", "SolverError"]

#: pivot eligibility threshold.
EPS_PIVOT = 1e-9


class SolverError(RuntimeError):
    """Iteration limit hit; with Bland's rule this indicates broken input."""


class LPStatus(str, Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


@dataclass(frozen=True)
class LPResult:
    status: LPStatus
    x: np.ndarray | None
    value: float | None
    iterations: int


def _as_2d(a, ncols: int) -> np.ndarray:
    if a is None:
        return np.zeros((0, ncols))
    a = np.asarray(a, dtype=float)
    if a.ndim == 1:
        a = a[None, :]
    if a.shape[1] != ncols:
        raise ValueError(f"constraint matrix has {a.shape[1]} columns, expected {ncols}")
    return a


def _iterate(T: np.ndarray, basis: np.ndarray, cost: np.ndarray, eps: float, limit: int) -> tuple[str, int]:
    """Run simplex pivots until optimal or unbounded.  T's last column is b."""
    m = T.shape[0]
    used = 0
    while True:
        if used >= limit:
            raise SolverError(f"simplex iteration limit {limit} exceeded")
        r = cost - cost[basis] @ T[:, :-1]
        r[basis] = 0.0
        entering = -1
        for j in range(r.size):  # Bland: smallest eligible index
            if r[j] < -eps:
                entering = j
                break
        if entering < 0:
            return "optimal", used
        col = T[:, entering]
        rows = np.flatnonzero(col > eps)
        if rows.size == 0:
            return "unbounded", used
        ratios = T[rows, -1] / col[rows]
        best = ratios.min()
        tied = rows[ratios <= best + 1e-15]
        leave = tied[np.argmin(basis[tied])]  # Bland: smallest basic index
        _pivot(T, basis, int(leave), entering)
        used += 1


def _pivot(T: np.ndarray, basis: np.ndarray, row: int, col: int) -> None:
    T[row] /= T[row, col]
    factors = T[:, col].copy()
    factors[row] = 0.0
    T -= np.outer(factors, T[row])
    T[:, col] = 0.0
    T[row, col] = 1.0
    basis[row] = col


def solve_lp(
    c,
    A_ub=None,
    b_ub=None,
    A_eq=None,
    b_eq=None,
    bounds=None,
    eps: float = EPS_PIVOT,
    max_iter: int | None = None,
) -> LPResult:
    c = np.asarray(c, dtype=float)
    n = c.size
    A_ub = _as_2d(A_ub, n)
    b_ub = np.zeros(0) if b_ub is None else np.atleast_1d(np.asarray(b_ub, dtype=float))
    A_eq = _as_2d(A_eq, n)
    b_eq = np.zeros(0) if b_eq is None else np.atleast_1d(np.asarray(b_eq, dtype=float))
    if bounds is None:
        bounds = [(0.0, None)] * n
    if len(bounds) != n:
        raise ValueError(f"{len(bounds)} bounds for {n} variables")

    # -- substitute bounds so every solver variable is >= 0 ------------------
    # per original var: list of (solver column, sign) plus a constant offset
    cols: list[list[tuple[int, float]]] = []
    offset = np.zeros(n)
    extra_rows: list[tuple[int, float]] = []  # (solver col, upper bound on it)
    nc = 0
    for j, (lo, hi) in enumerate(bounds):
        lo = -np.inf if lo is None else float(lo)
        hi = np.inf if hi is None else float(hi)
        if lo > hi:
            return LPResult(LPStatus.INFEASIBLE, None, None, 0)
        if np.isfinite(lo):
            cols.append([(nc, 1.0)])
            offset[j] = lo
            if np.isfinite(hi):
                extra_rows.append((nc, hi - lo))
            nc += 1
        elif np.isfinite(hi):
            cols.append([(nc, -1.0)])
            offset[j] = hi
            nc += 1
        else:
            cols.append([(nc, 1.0), (nc + 1, -1.0)])
            nc += 2

    def expand(A: np.ndarray) -> np.ndarray:
        out = np.zeros((A.shape[0], nc))
        for j, parts in enumerate(cols):
            for cc, sgn in parts:
                out[:, cc] += sgn * A[:, j]
        return out

    Aub = expand(A_ub)
    bub = b_ub - A_ub @ offset
    for cc, ub in extra_rows:
        row = np.zeros(nc)
        row[cc] = 1.0
        Aub = np.vstack([Aub, row])
        bub = np.concatenate([bub, [ub]])
    Aeq = expand(A_eq)
    beq = b_eq - A_eq @ offset
    cs = np.zeros(nc)
    for j, parts in enumerate(cols):
        for cc, sgn in parts:
            cs[cc] += sgn * c[j]

    m_ub, m_eq = Aub.shape[0], Aeq.shape[0]
    m = m_ub + m_eq
    n_slack = m_ub
    n_art = m
    width = nc + n_slack + n_art + 1
    T = np.zeros((m, width))
    T[:m_ub, :nc] = Aub
    T[m_ub:, :nc] = Aeq
    T[:m_ub, nc : nc + n_slack] = np.eye(m_ub)
    T[:m_ub, -1] = bub
    T[m_ub:, -1] = beq
    neg = T[:, -1] < 0.0
    T[neg] *= -1.0
    T[:, nc + n_slack : nc + n_slack + n_art] = np.eye(m)
    basis = np.arange(nc + n_slack, nc + n_slack + n_art)

    limit = max_iter if max_iter is not None else 200 * (m + width)
    scale = max(1.0, float(np.abs(T[:, -1]).max(initial=0.0)))

    # -- phase 1 --------------------------------------------------------------
    cost1 = np.zeros(width - 1)
    cost1[nc + n_slack :] = 1.0
    status, it1 = _iterate(T, basis, cost1, eps, limit)
    resid = float(cost1[basis] @ T[:, -1])
    if resid > 10.0 * eps * scale:
        return LPResult(LPStatus.INFEASIBLE, None, None, it1)

    # drive leftover artificials out of the basis (degenerate rows)
    art_start = nc + n_slack
    drop_rows = []
    for i in range(m):
        if basis[i] >= art_start:
            piv = -1
            for j in range(art_start):
                if abs(T[i, j]) > eps:
                    piv = j
                    break
            if piv >= 0:
                _pivot(T, basis, i, piv)
            else:
                drop_rows.append(i)
    if drop_rows:
        keep = np.setdiff1d(np.arange(m), drop_rows)
        T = T[keep]
        basis = basis[keep]
        m = len(keep)
    T = np.delete(T, np.s_[art_start : art_start + n_art], axis=1)
    T[:, -1] = np.maximum(T[:, -1], 0.0)

    # -- phase 2 --------------------------------------------------------------
    cost2 = np.concatenate([cs, np.zeros(n_slack)])
    status, it2 = _iterate(T, basis, cost2, eps, limit)
    if status == "unbounded":
        return LPResult(LPStatus.UNBOUNDED, None, None, it1 + it2)

    xs = np.zeros(nc + n_slack)
    xs[basis] = T[:, -1]
    x = offset.copy()
    for j, parts in enumerate(cols):
        for cc, sgn in parts:
            x[j] += sgn * xs[cc]
    return LPResult(LPStatus.OPTIMAL, x, float(c @ x), it1 + it2)
