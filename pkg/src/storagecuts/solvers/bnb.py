"""Best-first branch and bound over a vector of binary variables.

The caller supplies ``relax(lo, hi)`` which solves the continuous relaxation
with the binaries boxed to ``[lo, hi]`` and returns ``(status, value, x)``
in minimization form.  Branching picks the most fractional binary; ties go
to the earliest one.  For short horizons the search falls back to trying
every 0/1 pattern once the node count passes ``4 * 2**n``.

An optional ``rounding(x, lo, hi)`` proposes a pattern for a fractional
node.  The pattern is solved with the binaries fixed; the result only feeds
the incumbent, and it closes the node when it matches the node bound.
"""
from __future__ import annotations

import heapq
import itertools
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .simplex import INFEASIBLE, ITER_LIMIT, OPTIMAL

INT_TOL = 1e-7
GAP_TOL = 1e-6
ENUM_MAX_BINARIES = 12


@dataclass
class BnBResult:
    status: str
    value: float
    x: Optional[np.ndarray]
    nodes: int
    gap: float
    enumerated: bool = False


def _branch_index(frac: np.ndarray) -> int:
    dist = np.minimum(frac, 1.0 - frac)
    best = dist.max()
    return int(np.flatnonzero(dist >= best - 1e-12)[0])


def enumerate_patterns(relax: Callable, n: int, nodes: int = 0) -> BnBResult:
    """Solve the relaxation at every 0/1 pattern and keep the first best one."""
    best_val, best_x = np.inf, None
    for bits in itertools.product((0.0, 1.0), repeat=n):
        b = np.array(bits)
        status, value, x = relax(b, b)
        nodes += 1
        if status == OPTIMAL and value < best_val - 1e-12:
            best_val, best_x = value, x
    if best_x is None:
        return BnBResult(INFEASIBLE, np.nan, None, nodes, np.nan, True)
    return BnBResult(OPTIMAL, best_val, best_x, nodes, 0.0, True)


def branch_and_bound(relax: Callable, u_slice: slice, n: int, node_limit: Optional[int] = None,
                     fallback: bool = True, gap_tol: float = GAP_TOL,
                     rounding: Optional[Callable] = None) -> BnBResult:
    """Minimize over binaries located at ``x[u_slice]``."""
    switch = 4 * 2 ** n if fallback and n <= ENUM_MAX_BINARIES else None
    counter = itertools.count()
    lo0, hi0 = np.zeros(n), np.ones(n)
    status, value, x = relax(lo0, hi0)
    nodes = 1
    if status != OPTIMAL:
        return BnBResult(status, np.nan, None, nodes, np.nan)
    heap = [(value, next(counter), lo0, hi0, x)]
    inc_val, inc_x = np.inf, None

    while heap:
        if switch is not None and nodes > switch:
            return enumerate_patterns(relax, n, nodes)
        if node_limit is not None and nodes >= node_limit:
            bound = heap[0][0]
            if inc_x is None:
                return BnBResult(ITER_LIMIT, np.nan, None, nodes, np.inf)
            return BnBResult(ITER_LIMIT, inc_val, inc_x, nodes, max(0.0, inc_val - bound))
        bound, _, lo, hi, x = heapq.heappop(heap)
        if bound >= inc_val - gap_tol * 1e-3:
            continue
        u = x[u_slice]
        frac = np.abs(u - np.round(u))
        if frac.max() <= INT_TOL:
            # snap the pattern and re-solve so the incumbent is exactly integral
            b = np.round(u)
            s2, v2, x2 = relax(b, b)
            nodes += 1
            if s2 == OPTIMAL and v2 < inc_val:
                inc_val, inc_x = v2, x2
            continue
        if rounding is not None:
            b = rounding(x, lo, hi)
            if b is not None:
                s2, v2, x2 = relax(b, b)
                nodes += 1
                if s2 == OPTIMAL and v2 < inc_val:
                    inc_val, inc_x = v2, x2
                if bound >= inc_val - gap_tol * 1e-3:
                    continue
        j = _branch_index(u - np.floor(u))
        for side in (0.0, 1.0):
            lo_c, hi_c = lo.copy(), hi.copy()
            lo_c[j] = hi_c[j] = side
            s_c, v_c, x_c = relax(lo_c, hi_c)
            nodes += 1
            if s_c == OPTIMAL and v_c < inc_val - gap_tol * 1e-3:
                heapq.heappush(heap, (v_c, next(counter), lo_c, hi_c, x_c))

    if inc_x is None:
        return BnBResult(INFEASIBLE, np.nan, None, nodes, np.nan)
    return BnBResult(OPTIMAL, inc_val, inc_x, nodes, 0.0)
