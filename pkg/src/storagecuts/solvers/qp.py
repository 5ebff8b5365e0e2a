"""Primal active-set method for convex quadratic programs.

Solves ``min 0.5 x'Hx + g'x`` subject to ``A_ub x <= b_ub``, ``A_eq x == b_eq``
and ``lb <= x <= ub`` for a symmetric positive semidefinite ``H``.  The
Hessian may be singular: when the reduced gradient has a component along a
zero-curvature direction of the working face, the method moves along that
ray until a constraint blocks it.

A feasible starting point comes from the simplex phase 1 unless ``x0`` is
supplied.  Ties between blocking or dropped constraints go to the lowest row
index, which keeps the iterates deterministic.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .simplex import INFEASIBLE, ITER_LIMIT, OPTIMAL, UNBOUNDED, _as_rows, linprog

KKT_TOL = 1e-7


@dataclass
class QPResult:
    status: str
    x: Optional[np.ndarray]
    fun: float
    nit: int
    kkt_residual: float = np.nan

    @property
    def success(self) -> bool:
        return self.status == OPTIMAL


def _stack_inequalities(A_ub, b_ub, lb, ub, n):
    rows = [A_ub]
    rhs = [b_ub]
    lo = np.flatnonzero(np.isfinite(lb))
    hi = np.flatnonzero(np.isfinite(ub))
    if lo.size:
        block = np.zeros((lo.size, n))
        block[np.arange(lo.size), lo] = -1.0
        rows.append(block)
        rhs.append(-lb[lo])
    if hi.size:
        block = np.zeros((hi.size, n))
        block[np.arange(hi.size), hi] = 1.0
        rows.append(block)
        rhs.append(ub[hi])
    return np.vstack(rows), np.concatenate(rhs)


def _independent_rows(A, tol=1e-10):
    """Indices of a maximal linearly independent subset of the rows of ``A``."""
    keep = []
    basis = np.zeros((0, A.shape[1]))
    for i, row in enumerate(A):
        norm = np.linalg.norm(row)
        if norm == 0:
            continue
        if basis.shape[0]:
            resid = row - basis.T @ (basis @ row)
        else:
            resid = row
        rn = np.linalg.norm(resid)
        if rn > tol * norm:
            keep.append(i)
            basis = np.vstack([basis, resid / rn])
    return keep


def _null_space(A_w, n):
    if A_w.shape[0] == 0:
        return np.eye(n)
    q, _ = np.linalg.qr(A_w.T, mode="complete")
    return q[:, A_w.shape[0]:]


def quadprog(H, g, A_ub=None, b_ub=None, A_eq=None, b_eq=None, lb=None, ub=None,
             x0=None, max_iter=None, tol=1e-9) -> QPResult:
    """Minimize ``0.5 x'Hx + g'x`` over a polyhedron with the active-set method."""
    g = np.asarray(g, dtype=float).reshape(-1)
    n = g.size
    H = np.asarray(H, dtype=float).reshape(n, n)
    H = 0.5 * (H + H.T)
    A_ub, b_ub = _as_rows(A_ub, b_ub, n)
    A_eq, b_eq = _as_rows(A_eq, b_eq, n)
    lb = np.full(n, -np.inf) if lb is None else np.asarray(lb, dtype=float).reshape(-1)
    ub = np.full(n, np.inf) if ub is None else np.asarray(ub, dtype=float).reshape(-1)
    G, h = _stack_inequalities(A_ub, b_ub, lb, ub, n)
    m_eq = A_eq.shape[0]

    if x0 is None:
        if not np.isfinite(lb).all():
            raise ValueError("a starting point is needed when some lower bounds are infinite")
        start = linprog(np.zeros(n), A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq, lb=lb, ub=ub)
        if start.status == INFEASIBLE:
            return QPResult(INFEASIBLE, None, np.nan, start.nit)
        if not start.success:
            return QPResult(start.status, None, np.nan, start.nit)
        x = start.x.copy()
    else:
        x = np.asarray(x0, dtype=float).copy()
    scale = max(1.0, np.abs(h).max(initial=0.0), np.abs(b_eq).max(initial=0.0))
    feas_tol = 1e-9 * scale

    eq_keep = _independent_rows(A_eq)
    A_eq_w = A_eq[eq_keep]
    # initial working set: active inequalities that keep the rows independent
    active = np.flatnonzero(G @ x - h >= -feas_tol)
    cand = np.vstack([A_eq_w, G[active]])
    chosen = _independent_rows(cand)
    if len([i for i in chosen if i < len(eq_keep)]) < len(eq_keep):
        raise ValueError("equality rows lost independence")
    work = [int(active[i - len(eq_keep)]) for i in chosen if i >= len(eq_keep)]

    if max_iter is None:
        max_iter = 50 * (G.shape[0] + m_eq + n)
    nit = 0
    while True:
        if nit >= max_iter:
            return QPResult(ITER_LIMIT, x, float(0.5 * x @ H @ x + g @ x), nit)
        nit += 1
        grad = H @ x + g
        A_w = np.vstack([A_eq_w, G[work]]) if work else A_eq_w
        Z = _null_space(A_w, n)
        p = np.zeros(n)
        ray = False
        if Z.shape[1]:
            Hr = Z.T @ H @ Z
            gr = Z.T @ grad
            w, V = np.linalg.eigh(Hr)
            curv_tol = 1e-10 * max(1.0, np.abs(w).max(initial=0.0))
            flat = w <= curv_tol
            gflat = V[:, flat] @ (V[:, flat].T @ gr)
            if np.linalg.norm(gflat) > tol * max(1.0, np.linalg.norm(gr)):
                p = -Z @ gflat
                ray = True
            else:
                Vp = V[:, ~flat]
                p = -Z @ (Vp @ ((Vp.T @ gr) / w[~flat]))

        if np.linalg.norm(p) <= 1e-12 * max(1.0, np.linalg.norm(x)):
            if A_w.shape[0] == 0:
                mu = np.zeros(0)
            else:
                mu = np.linalg.lstsq(A_w.T, -grad, rcond=None)[0]
            mu_ineq = mu[len(eq_keep):]
            if mu_ineq.size == 0 or mu_ineq.min() >= -tol * max(1.0, np.abs(grad).max()):
                resid = grad + A_w.T @ mu if A_w.shape[0] else grad
                return QPResult(OPTIMAL, x, float(0.5 * x @ H @ x + g @ x), nit,
                                float(np.abs(resid).max(initial=0.0)))
            worst = mu_ineq.min()
            ties = [k for k, v in enumerate(mu_ineq) if v <= worst + 1e-12 * abs(worst)]
            drop = min(ties, key=lambda k: work[k])
            work.pop(drop)
            continue

        # ratio test against inactive inequalities
        Gp = G @ p
        inactive = np.ones(G.shape[0], dtype=bool)
        inactive[work] = False
        pn = np.linalg.norm(p)
        moving = inactive & (Gp > 1e-12 * pn * np.maximum(np.linalg.norm(G, axis=1), 1e-300))
        alpha = np.inf if ray else 1.0
        block = -1
        if moving.any():
            idx = np.flatnonzero(moving)
            ratios = np.maximum(h[idx] - G[idx] @ x, 0.0) / Gp[idx]
            best = ratios.min()
            if best < alpha:
                alpha = best
                ties = idx[ratios <= best + 1e-14 * max(1.0, best)]
                block = int(ties.min())
        if not np.isfinite(alpha):
            return QPResult(UNBOUNDED, None, -np.inf, nit)
        x = x + alpha * p
        if block >= 0:
            work.append(block)

