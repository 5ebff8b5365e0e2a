"""Dense two-phase tableau simplex.

Solves ``min c @ x`` subject to ``A_ub @ x <= b_ub``, ``A_eq @ x == b_eq``
and ``lb <= x <= ub`` with finite lower bounds.  Intended for the small
instances used in this package (a few hundred rows), not for speed.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
ITER_LIMIT = "iteration_limit"


@dataclass
class LPResult:
    status: str
    x: Optional[np.ndarray]
    fun: float
    nit: int

    @property
    def success(self) -> bool:
        return self.status == OPTIMAL


def _as_rows(A, b, n):
    if A is None or len(A) == 0:
        return np.zeros((0, n)), np.zeros(0)
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.asarray(b, dtype=float).reshape(-1)
    if A.shape != (len(b), n):
        raise ValueError(f"constraint matrix shape {A.shape} does not match ({len(b)}, {n})")
    return A, b


class _Tableau:
    def __init__(self, T, basis, tol):
        self.T = T
        self.basis = basis
        self.tol = tol
        self.nit = 0

    def pivot(self, r, e):
        T = self.T
        T[r] /= T[r, e]
        col = T[:, e].copy()
        col[r] = 0.0
        nz = np.flatnonzero(col)
        T[nz] -= np.outer(col[nz], T[r])
        T[:, e] = 0.0
        T[r, e] = 1.0
        self.basis[r] = e
        self.nit += 1

    def run(self, ncols, max_iter):
        """Pivot on the last row as objective until optimal; returns a status."""
        T = self.T
        tol = self.tol
        stall = 0
        bland = False
        last_obj = T[-1, -1]
        while True:
            if self.nit >= max_iter:
                return ITER_LIMIT
            d = T[-1, :ncols]
            candidates = np.flatnonzero(d < -tol)
            if candidates.size == 0:
                return OPTIMAL
            if bland:
                e = int(candidates[0])
            else:
                e = int(candidates[np.argmin(d[candidates])])
            col = T[:-1, e]
            rows = np.flatnonzero(col > tol)
            if rows.size == 0:
                return UNBOUNDED
            ratios = T[rows, -1] / col[rows]
            best = ratios.min()
            ties = rows[ratios <= best + 1e-12 * max(1.0, abs(best))]
            r = int(min(ties, key=lambda i: self.basis[i]))
            self.pivot(r, e)
            obj = T[-1, -1]
            if abs(obj - last_obj) <= 1e-14 * max(1.0, abs(obj)):
                stall += 1
                if stall > 3 * ncols:
                    bland = True
            else:
                stall = 0
            last_obj = obj


def linprog(c, A_ub=None, b_ub=None, A_eq=None, b_eq=None, lb=None, ub=None,
            max_iter=None, tol=1e-9) -> LPResult:
    """Minimize ``c @ x`` with the two-phase simplex method.

    Lower bounds default to zero and must be finite; upper bounds default
    to ``+inf``.  The returned point is re-solved from its final basis for
    accuracy.
    """
    c = np.asarray(c, dtype=float).reshape(-1)
    n = c.size
    A_ub, b_ub = _as_rows(A_ub, b_ub, n)
    A_eq, b_eq = _as_rows(A_eq, b_eq, n)
    lb = np.zeros(n) if lb is None else np.asarray(lb, dtype=float).reshape(-1)
    ub = np.full(n, np.inf) if ub is None else np.asarray(ub, dtype=float).reshape(-1)
    if not np.isfinite(lb).all():
        raise ValueError("linprog requires finite lower bounds")
    if (ub < lb - tol).any():
        return LPResult(INFEASIBLE, None, np.nan, 0)

    # shift x = lb + y so that y >= 0; finite upper bounds become rows
    bounded = np.flatnonzero(np.isfinite(ub))
    A_box = np.zeros((bounded.size, n))
    A_box[np.arange(bounded.size), bounded] = 1.0
    A_in = np.vstack([A_ub, A_box])
    b_in = np.concatenate([b_ub - A_ub @ lb, np.maximum(ub[bounded] - lb[bounded], 0.0)])
    b_e = b_eq - A_eq @ lb
    m_in, m_eq = len(b_in), len(b_e)
    m = m_in + m_eq

    # standard form [A | slacks] z = b with b >= 0
    A_std = np.zeros((m, n + m_in))
    A_std[:m_in, :n] = A_in
    A_std[:m_in, n:] = np.eye(m_in)
    A_std[m_in:, :n] = A_eq
    b_std = np.concatenate([b_in, b_e])
    flip = b_std < 0
    A_std[flip] *= -1
    b_std[flip] *= -1

    needs_art = np.concatenate([flip[:m_in], np.ones(m_eq, dtype=bool)])
    art_rows = np.flatnonzero(needs_art)
    n_std = n + m_in
    n_art = art_rows.size
    ncols = n_std + n_art

    T = np.zeros((m + 1, ncols + 1))
    T[:m, :n_std] = A_std
    T[art_rows, n_std + np.arange(n_art)] = 1.0
    T[:m, -1] = b_std
    basis = [0] * m
    for i in range(m_in):
        if not needs_art[i]:
            basis[i] = n + i
    for k, i in enumerate(art_rows):
        basis[i] = n_std + k

    if max_iter is None:
        max_iter = 50 * (m + ncols)
    tab = _Tableau(T, basis, tol)

    if n_art:
        # phase 1: minimize the sum of artificials
        T[-1, :] = 0.0
        T[-1, :n_std] = -T[art_rows, :n_std].sum(axis=0)
        T[-1, -1] = -T[art_rows, -1].sum()
        status = tab.run(ncols, max_iter)
        if status == ITER_LIMIT:
            return LPResult(ITER_LIMIT, None, np.nan, tab.nit)
        scale = max(1.0, np.abs(b_std).max(initial=0.0))
        if -T[-1, -1] > 1e-7 * scale:
            return LPResult(INFEASIBLE, None, np.nan, tab.nit)
        # drive remaining artificials out of the basis or drop their rows
        keep = []
        for i in range(m):
            if tab.basis[i] >= n_std:
                row = tab.T[i, :n_std]
                j = np.flatnonzero(np.abs(row) > 1e-9)
                if j.size:
                    tab.pivot(i, int(j[np.argmax(np.abs(row[j]))]))
                    keep.append(i)
            else:
                keep.append(i)
        T = np.vstack([tab.T[keep], tab.T[-1:]])
        T = np.delete(T, np.s_[n_std:ncols], axis=1)
        basis = [tab.basis[i] for i in keep]
        A_std, b_std = A_std[keep], b_std[keep]
        nit = tab.nit
        tab = _Tableau(T, basis, tol)
        tab.nit = nit

    # phase 2 objective row in reduced-cost form
    T = tab.T
    cost = np.zeros(n_std)
    cost[:n] = c
    T[-1, :] = 0.0
    T[-1, :n_std] = cost
    for i, j in enumerate(tab.basis):
        if cost[j] != 0.0:
            T[-1] -= cost[j] * T[i]
    status = tab.run(n_std, max_iter)
    if status != OPTIMAL:
        return LPResult(status, None, np.nan, tab.nit)

    z = np.zeros(n_std)
    cols = np.array(tab.basis, dtype=int)
    z[cols] = T[:-1, -1]
    resid = b_std - A_std[:, cols] @ z[cols] if cols.size else np.zeros(0)
    if cols.size and np.abs(resid).max() > 1e-12 * max(1.0, np.abs(b_std).max()):
        try:
            z[cols] = np.linalg.solve(A_std[:, cols], b_std)
        except np.linalg.LinAlgError:
            pass
    z = np.maximum(z, 0.0)
    x = lb + z[:n]
    return LPResult(OPTIMAL, x, float(c @ x), tab.nit)
