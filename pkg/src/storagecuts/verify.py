"""Property and certificate checks for one battery, used by ``bench verify``."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .battery import BatteryParams, membership, soc_envelope
from .cuts import (
    CoefficientTable,
    facet_certificate,
    gen_all_anchor_cuts,
    gen_pozo_cuts,
    gen_u_cuts,
    gen_window_cuts,
    redundancy_filter,
    validate_cuts,
)
from .solvers.simplex import linprog
from .solvers.vertices import MAX_VERTEX_HORIZON, enumerate_vertices, unique_power_points
from .soc import cylinder_value, hull_decompose, soc_cut
from .submodular import MAX_CERT_WINDOW, WindowSpec, check_submodularity, eval_f_closed, eval_f_lp, gain


@dataclass
class Check:
    name: str
    passed: bool
    detail: str = ""
    skipped: bool = False

    def line(self) -> str:
        tag = "SKIP" if self.skipped else ("PASS" if self.passed else "FAIL")
        return f"{tag} {self.name}" + (f": {self.detail}" if self.detail else "")


def _windows(params: BatteryParams, limit: int):
    env = soc_envelope(params)
    T = params.horizon
    for t in range(1, T + 1):
        for length in range(1, min(limit, T - t + 1) + 1):
            yield (WindowSpec(t, length, float(env.soc_lo[t - 1]), params),
                   WindowSpec(t, length, float(env.soc_hi[t - 1]), params))


def check_submodular(params: BatteryParams) -> Check:
    worst = np.inf
    n = 0
    for lo_win, hi_win in _windows(params, MAX_CERT_WINDOW):
        worst = min(worst, check_submodularity(lo_win, ("f", "f_bar")).min_margin,
                    check_submodularity(hi_win, ("g", "g_bar")).min_margin)
        n += 1
    return Check("submodularity", worst >= -1e-9, f"{n} windows, min margin {worst:.3g}")


def check_closed_form(params: BatteryParams, limit: int = 5) -> Check:
    worst = 0.0
    n = 0
    for lo_win, _ in _windows(params, limit):
        for mask in range(1 << lo_win.length):
            worst = max(worst, abs(eval_f_closed(lo_win, mask) - eval_f_lp(lo_win, mask)))
            n += 1
    return Check("closed form vs LP", worst <= 1e-9, f"{n} evaluations, max error {worst:.3g}")


def check_coefficients(params: BatteryParams) -> Check:
    table = CoefficientTable(params)
    T = params.horizon
    problems = []
    for t, tau_bar in table.windows():
        win_c = WindowSpec(t, tau_bar + 1, float(table.env.soc_lo[t - 1]), params)
        win_d = WindowSpec(t, tau_bar + 1, float(table.env.soc_hi[t - 1]), params)
        for tau in range(tau_bar + 1):
            if abs(-table.rho_c(t, tau, tau_bar) - gain("f_bar", win_c, tau)) > 1e-9:
                problems.append(f"rho_c{(t, tau, tau_bar)}")
            if abs(-table.rho_d(t, tau, tau_bar) - gain("g", win_d, tau)) > 1e-9:
                problems.append(f"rho_d{(t, tau, tau_bar)}")
    for t in range(1, T + 1):
        for k in range(T - t):
            if table.c(t, k) < table.c(t, k + 1) - 1e-12 or table.d(t, k) < table.d(t, k + 1) - 1e-12:
                problems.append(f"monotone in offset at t={t}")
    return Check("coefficients", not problems, ", ".join(problems[:5]) or "rho matches gains, monotone")


def check_validity(params: BatteryParams, vertices) -> Check:
    cuts = (gen_window_cuts(params) + gen_u_cuts(params) + gen_pozo_cuts(params)
            + gen_all_anchor_cuts(params))
    rep = validate_cuts(cuts, params, vertices)
    return Check("cut validity", rep.passed,
                 f"{rep.n_cuts} cuts, {rep.n_points} vertices, max violation {rep.max_violation:.3g}")


def check_facets(params: BatteryParams, vertices) -> Check:
    """Tight-vertex counts; with soc_init at a bound, short cuts may pass on affine rank."""
    cuts = redundancy_filter(gen_window_cuts(params), params)
    certs = [facet_certificate(c, params, vertices) for c in cuts]
    short = sum(not c.passed for c in certs)
    detail = f"{len(cuts) - short}/{len(cuts)} reach 2(tau_bar+1)"
    if params.soc_init not in (params.soc_min, params.soc_max) or not short:
        return Check("facet counts", not short, detail)
    pts = unique_power_points(vertices)
    dim = int(np.linalg.matrix_rank(pts[1:] - pts[0], tol=1e-9))
    low = sum(not c.passed and c.affine_rank != dim - 1 for c in certs)
    return Check("facet counts", not low,
                 f"{detail}; soc_init at a bound, {short - low}/{short} short cuts still span a "
                 f"face of rank {dim - 1}")


def pozo_dominance(params: BatteryParams, window_cuts=None) -> float:
    """Largest violation of any baseline cut over the window-cut polytope (rating bounds kept)."""
    T = params.horizon
    window_cuts = window_cuts if window_cuts is not None else redundancy_filter(gen_window_cuts(params), params)
    A = np.array([np.concatenate(c.dense(T)[:2]) for c in window_cuts])
    b = np.array([c.rhs for c in window_cuts])
    ub = np.concatenate([np.full(T, params.p_ch_max), np.full(T, params.p_dis_max)])
    worst = -np.inf
    for cut in gen_pozo_cuts(params):
        a = np.concatenate(cut.dense(T)[:2])
        res = linprog(-a, A, b, ub=ub)
        if not res.success:
            raise RuntimeError(f"dominance LP ended {res.status}")
        worst = max(worst, -res.fun - cut.rhs)
    return float(worst)


def check_dominance(params: BatteryParams) -> Check:
    worst = pozo_dominance(params)
    return Check("baseline dominance", worst <= 1e-8, f"max violation {worst:.3g}")


def check_soc(samples: int = 1000, seed: int = 0) -> Check:
    rng = np.random.default_rng(seed)
    pd = rng.uniform(0, 5, samples)
    pc = rng.uniform(0, 5, samples)
    ps = rng.uniform(-5, 5, samples)
    q = cylinder_value(pd, pc, ps)
    ident = np.abs(q - ((pd - pc - ps) ** 2 + 4 * pd * pc)).max()
    agree = True
    for k in range(samples):
        z = q[k] + rng.uniform(-1, 1)
        lhs, rhs = soc_cut(ps[k]).norm_form(pd[k], pc[k], z)
        # the cone margin equals the epigraph margin up to a positive factor; skip near-ties
        if abs(z - q[k]) > 1e-9 * max(1.0, q[k]) and (lhs <= rhs) != (z >= q[k]):
            agree = False
        if z >= q[k]:
            h = hull_decompose(z, pd[k], pc[k], ps[k])
            combo = h.combination()
            if abs(combo[1] - pd[k]) > 1e-12 or abs(combo[2] - pc[k]) > 1e-12 or combo[0] > z + 1e-10:
                agree = False
    return Check("SOC algebra", ident <= 1e-10 * max(1.0, np.abs(q).max()) and agree,
                 f"{samples} samples, identity error {ident:.3g}")


def run_checks(params: BatteryParams) -> list:
    checks = [check_submodular(params), check_closed_form(params), check_coefficients(params)]
    if params.horizon <= MAX_VERTEX_HORIZON:
        vertices = enumerate_vertices(params, keep_modes=True)
        for v in vertices:
            if not membership(params, v, "P01"):
                checks.append(Check("vertex membership", False, "a vertex left P01"))
                break
        checks += [check_validity(params, vertices), check_facets(params, vertices)]
    else:
        for name in ("cut validity", "facet counts"):
            checks.append(Check(name, True, f"vertex enumeration needs T <= {MAX_VERTEX_HORIZON}",
                                skipped=True))
    checks += [check_dominance(params), check_soc()]
    return checks
