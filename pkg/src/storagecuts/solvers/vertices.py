"""Exhaustive vertex enumeration of the fixed-mode polytopes of ``P01``.

For a binary pattern ``u`` each period has a single free power variable
(charge when ``u_t = 1``, discharge otherwise).  The polytope in those
``T`` variables is cut out by ``4T`` rows: rating bounds, nonnegativity
and the SoC bounds of every period.  Vertices are found by solving every
``T``-subset of rows and keeping the feasible solutions.
"""
from __future__ import annotations

import itertools

import numpy as np

from ..battery import BatteryParams, effective_rates, simulate_soc

MAX_VERTEX_HORIZON = 4
DEDUP_TOL = 1e-9


class HorizonTooLarge(ValueError):
    pass


def _pattern_vertices(params: BatteryParams, u, p_ch_max: float, p_dis_max: float):
    T = params.horizon
    # SoC after period k is soc_init + sum_{j<=k} step_j x_j
    step = np.where(u == 1, params.delta * params.eta_c, -params.delta / params.eta_d)
    cap = np.where(u == 1, p_ch_max, p_dis_max)
    L = np.tril(np.ones((T, T))) * step
    rows = np.vstack([-np.eye(T), np.eye(T), L, -L])
    rhs = np.concatenate([
        np.zeros(T),
        cap,
        np.full(T, params.soc_max - params.soc_init),
        np.full(T, params.soc_init - params.soc_min),
    ])
    scale = max(1.0, np.abs(rhs).max())
    out = []
    for subset in itertools.combinations(range(4 * T), T):
        A = rows[list(subset)]
        if abs(np.linalg.det(A)) < 1e-12:
            continue
        x = np.linalg.solve(A, rhs[list(subset)])
        if (rows @ x - rhs <= 1e-9 * scale).all():
            out.append(np.maximum(x, 0.0))
    return out


def enumerate_vertices(params: BatteryParams, keep_modes: bool = False,
                       effective: bool = False, horizon_limit: int = MAX_VERTEX_HORIZON) -> list:
    """All vertices of the fixed-``u`` polytopes of ``P01`` as trajectories.

    With ``keep_modes`` every (vertex, pattern) pair is returned with its
    mode vector; otherwise vertices are deduplicated in power space and
    carry no mode.  ``effective`` swaps the ratings for the effective rates.
    """
    T = params.horizon
    if T > horizon_limit:
        raise HorizonTooLarge(f"vertex enumeration limited to T <= {horizon_limit}, got {T}")
    if effective:
        p_dis_max, p_ch_max = effective_rates(params)
    else:
        p_dis_max, p_ch_max = params.p_dis_max, params.p_ch_max
    result = []
    seen = set()
    for bits in itertools.product((0, 1), repeat=T):
        u = np.array(bits)
        for x in _pattern_vertices(params, u, p_ch_max, p_dis_max):
            p_ch = np.where(u == 1, x, 0.0)
            p_dis = np.where(u == 1, 0.0, x)
            key = tuple(np.round(np.concatenate([p_ch, p_dis]) / DEDUP_TOL).astype(np.int64))
            if keep_modes:
                key = key + bits
            if key in seen:
                continue
            seen.add(key)
            traj = simulate_soc(params, p_dis, p_ch)
            result.append(traj.with_mode(u.astype(float)) if keep_modes else traj)
    return result


def unique_power_points(vertices) -> np.ndarray:
    """Stack ``[p_ch, p_dis]`` rows, deduplicated to ``DEDUP_TOL``."""
    pts = np.array([np.concatenate([v.p_ch, v.p_dis]) for v in vertices])
    if not len(pts):
        return pts
    keys = np.round(pts / DEDUP_TOL).astype(np.int64)
    _, idx = np.unique(keys, axis=0, return_index=True)
    return pts[np.sort(idx)]
