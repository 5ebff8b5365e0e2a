"""Storage models, relaxation presets and their solvers.

Variables are laid out as ``[p_ch (T), p_dis (T), u (T, optional)]``.  The
SoC is never a variable: when the native storage constraints are wanted,
its bounds are written as cumulative-sum rows on the powers.

Objectives:

* ``linear``: revenue ``sum(prices * (p_dis - p_ch))``, maximized by default.
* ``tracking``: ``sum((p_dis - p_ch - ps)**2)``, minimized.
* ``cylinder``: tracking plus ``4 * p_dis * p_ch``, the epigraph objective
  of the per-period SOC cuts with ``z`` substituted out.

Presets:

* ``MILP`` / ``MIQP``: the exact mixed-binary model.
* ``HCHLP``: the single-period hull baseline cuts.
* ``TLP``: redundancy-filtered window cuts.
* ``TLPu``: TLP plus u cuts, mode linking rows and ``u`` in ``[0, 1]``.
* ``TLPSOC``: TLP with the cylinder objective.

Every preset keeps the raw rating bounds on the powers.
"""
from __future__ import annotations

import time
import warnings
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .battery import BatteryParams, Trajectory, membership, simulate_soc, violation_metrics
from .cuts import (
    LinearCut,
    coefficient_table,
    gen_pozo_cuts,
    gen_u_cuts,
    gen_window_cuts,
    redundancy_filter,
)
from .solvers.bnb import branch_and_bound, enumerate_patterns
from .solvers.qp import quadprog
from .solvers.simplex import OPTIMAL, linprog

ROW_TOL = 1e-7
STRENGTHEN_U_CUTS = True

PRESETS = ("MILP", "MIQP", "HCHLP", "TLP", "TLPu", "TLPSOC")
EXACT_PRESETS = ("MILP", "MIQP")
SCHEDULING_PRESETS = ("MILP", "HCHLP", "TLP", "TLPu")
TRACKING_PRESETS = ("MIQP", "HCHLP", "TLP", "TLPu", "TLPSOC")


class ModelError(ValueError):
    pass


@dataclass(frozen=True)
class Objective:
    kind: str
    values: np.ndarray
    sense: str

    def __post_init__(self):
        if self.kind not in ("linear", "tracking", "cylinder"):
            raise ModelError(f"unknown objective kind {self.kind!r}")
        if self.sense not in ("min", "max"):
            raise ModelError("sense must be 'min' or 'max'")
        if self.kind != "linear" and self.sense != "min":
            raise ModelError("quadratic objectives are minimized")

    @classmethod
    def linear(cls, prices, sense: str = "max") -> "Objective":
        return cls("linear", np.asarray(prices, dtype=float), sense)

    @classmethod
    def tracking(cls, setpoints) -> "Objective":
        return cls("tracking", np.asarray(setpoints, dtype=float), "min")

    @classmethod
    def cylinder(cls, setpoints) -> "Objective":
        return cls("cylinder", np.asarray(setpoints, dtype=float), "min")

    @property
    def quadratic(self) -> bool:
        return self.kind != "linear"


@dataclass(frozen=True)
class Instance:
    """Prices (scheduling) or setpoints (tracking) for one horizon."""

    kind: str
    values: np.ndarray
    name: str = ""

    def __post_init__(self):
        if self.kind not in ("scheduling", "tracking"):
            raise ModelError(f"unknown instance kind {self.kind!r}")


@dataclass(frozen=True)
class RelaxationModel:
    params: BatteryParams
    objective: Objective
    cuts: tuple = ()
    has_u: bool = False
    integer_u: bool = False
    soc_chain: bool = False
    name: str = ""

    def __post_init__(self):
        T = self.params.horizon
        if self.objective.values.shape != (T,):
            raise ModelError(f"objective data must have length {T}")
        if self.integer_u and not self.has_u:
            raise ModelError("integrality needs u variables")
        for cut in self.cuts:
            if cut.coeff_u and not self.has_u:
                raise ModelError(f"cut {cut} references u but the model has none")
            if any(not 1 <= k <= T for k in cut.periods):
                raise ModelError(f"cut {cut} references a period outside 1..{T}")

    @property
    def num_periods(self) -> int:
        return self.params.horizon

    @property
    def num_vars(self) -> int:
        return (3 if self.has_u else 2) * self.num_periods

    def with_cuts(self, extra: Sequence[LinearCut]) -> "RelaxationModel":
        return replace(self, cuts=tuple(self.cuts) + tuple(extra))

    def bounds(self):
        T = self.num_periods
        p = self.params
        lb = np.zeros(self.num_vars)
        ub = np.concatenate([np.full(T, p.p_ch_max), np.full(T, p.p_dis_max)])
        if self.has_u:
            ub = np.concatenate([ub, np.ones(T)])
        return lb, ub

    def rows(self):
        """Inequality rows ``A x <= b`` (cuts, mode linking, SoC bounds)."""
        T = self.num_periods
        p = self.params
        n = self.num_vars
        blocks, rhs = [], []
        for cut in self.cuts:
            a_ch, a_dis, a_u = cut.dense(T)
            row = np.concatenate([a_ch, a_dis, a_u] if self.has_u else [a_ch, a_dis])
            blocks.append(row)
            rhs.append(cut.rhs)
        if self.has_u:
            eye = np.eye(T)
            link_c = np.zeros((T, n))
            link_c[:, :T] = eye
            link_c[:, 2 * T:] = -p.p_ch_max * eye
            link_d = np.zeros((T, n))
            link_d[:, T:2 * T] = eye
            link_d[:, 2 * T:] = p.p_dis_max * eye
            blocks += list(link_c) + list(link_d)
            rhs += [0.0] * T + [p.p_dis_max] * T
        if self.soc_chain:
            L = np.tril(np.ones((T, T)))
            chain = np.zeros((T, n))
            chain[:, :T] = p.delta * p.eta_c * L
            chain[:, T:2 * T] = -p.delta / p.eta_d * L
            blocks += list(chain) + list(-chain)
            rhs += [p.soc_max - p.soc_init] * T + [p.soc_init - p.soc_min] * T
        if not blocks:
            return np.zeros((0, n)), np.zeros(0)
        return np.array(blocks), np.array(rhs, dtype=float)

    def min_form(self):
        """``(H, g, const)`` of the objective written as a minimization."""
        T = self.num_periods
        n = self.num_vars
        v = self.objective.values
        H = np.zeros((n, n))
        g = np.zeros(n)
        const = 0.0
        kind = self.objective.kind
        if kind == "linear":
            sign = -1.0 if self.objective.sense == "max" else 1.0
            g[:T] = -sign * v
            g[T:2 * T] = sign * v
            return H, g, const
        cross = 2.0 if kind == "cylinder" else -2.0
        idx = np.arange(T)
        H[idx, idx] = 2.0
        H[T + idx, T + idx] = 2.0
        H[idx, T + idx] = cross
        H[T + idx, idx] = cross
        g[:T] = 2.0 * v
        g[T:2 * T] = -2.0 * v
        const = float(v @ v)
        return H, g, const

    def evaluate(self, x) -> float:
        """Objective in the model's own sense."""
        H, g, const = self.min_form()
        val = 0.5 * x @ H @ x + g @ x + const
        return -val if self.objective.sense == "max" else val

    def row_violation(self, x) -> float:
        A, b = self.rows()
        lb, ub = self.bounds()
        worst = max(0.0, (lb - x).max(), (x - ub).max())
        if len(b):
            worst = max(worst, (A @ x - b).max())
        if self.integer_u:
            u = x[2 * self.num_periods:]
            worst = max(worst, np.abs(u - np.round(u)).max())
        return float(worst)


@dataclass
class SolveReport:
    status: str
    objective: float
    sense: str
    trajectory: Optional[Trajectory]
    violation: tuple
    iterations: int
    wall_time_ms: float
    nodes: int = 0
    gap: float = 0.0
    row_violation: float = 0.0
    x: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL

    @property
    def min_objective(self) -> float:
        """The objective written as a minimization (revenue becomes cost)."""
        return -self.objective if self.sense == "max" else self.objective


def _trajectory(model: RelaxationModel, x) -> Trajectory:
    T = model.num_periods
    p_ch = np.maximum(x[:T], 0.0)
    p_dis = np.maximum(x[T:2 * T], 0.0)
    traj = simulate_soc(model.params, p_dis, p_ch)
    if model.has_u:
        traj = traj.with_mode(np.clip(x[2 * T:], 0.0, 1.0))
    return traj


def _report(model, status, x, iterations, started, nodes=0, gap=0.0) -> SolveReport:
    elapsed = (time.perf_counter() - started) * 1e3
    sense = model.objective.sense
    if status != OPTIMAL or x is None:
        return SolveReport(status, np.nan, sense, None, (0, 0.0), iterations, elapsed, nodes, gap)
    traj = _trajectory(model, x)
    return SolveReport(status, float(model.evaluate(x)), sense, traj, violation_metrics(traj),
                       iterations, elapsed, nodes, gap, model.row_violation(x), x)


def _solve_continuous(model: RelaxationModel, lb=None, ub=None):
    """Solve with the integrality of u dropped; returns ``(status, min-form value, x, nit)``."""
    A, b = model.rows()
    lb0, ub0 = model.bounds()
    lb = lb0 if lb is None else lb
    ub = ub0 if ub is None else ub
    H, g, const = model.min_form()
    if model.objective.quadratic:
        res = quadprog(H, g, A, b, lb=lb, ub=ub)
    else:
        res = linprog(g, A, b, lb=lb, ub=ub)
    value = res.fun + const if res.success else np.nan
    return res.status, value, res.x, res.nit


def solve_lp(model: RelaxationModel) -> SolveReport:
    if model.objective.quadratic:
        raise ModelError("solve_lp needs a linear objective")
    started = time.perf_counter()
    status, _, x, nit = _solve_continuous(model)
    return _report(model, status, x, nit, started)


def solve_qp(model: RelaxationModel) -> SolveReport:
    if not model.objective.quadratic:
        raise ModelError("solve_qp needs a tracking objective")
    started = time.perf_counter()
    status, _, x, nit = _solve_continuous(model)
    return _report(model, status, x, nit, started)


def _bb_relax(model: RelaxationModel, counter: list, strengthen: bool = True):
    T = model.num_periods
    lb0, ub0 = model.bounds()
    if strengthen:
        # valid cuts leave the integer optimum alone and prune most of the tree
        table = coefficient_table(model.params)
        cuts = redundancy_filter(gen_window_cuts(model.params, table), model.params)
        if STRENGTHEN_U_CUTS:
            cuts += gen_u_cuts(model.params, table)
        model = model.with_cuts(cuts)
    if strengthen and model.objective.kind == "tracking":
        # p_dis * p_ch = 0 wherever u is binary, so adding 4 * p_dis * p_ch leaves the
        # mixed-binary objective unchanged while tightening every node relaxation
        model = replace(model, objective=Objective.cylinder(model.objective.values))

    def relax(lo, hi):
        lb, ub = lb0.copy(), ub0.copy()
        lb[2 * T:], ub[2 * T:] = lo, hi
        status, value, x, nit = _solve_continuous(model, lb, ub)
        counter[0] += nit
        return status, value, x

    return relax


def _mode_rounding(model: RelaxationModel, tol: float = 1e-9):
    """Read the mode off a node solution that never charges and discharges at once."""
    T = model.num_periods

    def rounding(x, lo, hi):
        pc, pd = x[:T], x[T:2 * T]
        charging, discharging = pc > tol, pd > tol
        if np.any(charging & discharging):
            return None
        b = np.where(charging, 1.0, np.where(discharging, 0.0, np.round(x[2 * T:])))
        if np.any(b < lo) or np.any(b > hi):
            return None
        return b

    return rounding


def solve_bb(model: RelaxationModel, node_limit: Optional[int] = None,
             fallback: bool = True, strengthen: bool = True) -> SolveReport:
    """Global optimum over binary ``u`` by best-first branch and bound.

    With ``strengthen`` the node relaxations are tightened without moving
    the optimum: tracking models use the cylinder objective, which agrees
    with the tracking error on every mixed-binary feasible point, and linear
    models carry the filtered window cuts.  Nodes whose solution already
    keeps charge and discharge apart are closed by fixing ``u`` to match.
    """
    if not model.has_u:
        raise ModelError("branch and bound needs u variables")
    started = time.perf_counter()
    T = model.num_periods
    counter = [0]
    res = branch_and_bound(_bb_relax(model, counter, strengthen), slice(2 * T, 3 * T), T,
                           node_limit=node_limit, fallback=fallback,
                           rounding=_mode_rounding(model) if strengthen else None)
    return _report(model, res.status, res.x, counter[0], started, res.nodes, res.gap)


def solve_enumerate(model: RelaxationModel) -> SolveReport:
    """Exhaustive ``2**T`` pattern search (reference for small horizons)."""
    if not model.has_u:
        raise ModelError("pattern enumeration needs u variables")
    started = time.perf_counter()
    counter = [0]
    res = enumerate_patterns(_bb_relax(model, counter, strengthen=False), model.num_periods)
    return _report(model, res.status, res.x, counter[0], started, res.nodes, res.gap)


def solve(model: RelaxationModel, **kwargs) -> SolveReport:
    """Dispatch on integrality and objective."""
    if model.integer_u:
        return solve_bb(model, **kwargs)
    return solve_qp(model) if model.objective.quadratic else solve_lp(model)


def recheck(model: RelaxationModel, report: SolveReport):
    """Independent feasibility check of an optimal report.

    Exact models must land in ``P01``.  Relaxations are only required to
    satisfy their own rows, since their optima may charge and discharge at
    once or leave the SoC range.
    """
    if not report.optimal:
        raise ValueError("only optimal reports can be rechecked")
    if model.integer_u:
        return membership(model.params, report.trajectory, "P01")
    return model.row_violation(report.x) <= ROW_TOL


def _objective_for(preset: str, instance: Instance) -> Objective:
    if instance.kind == "scheduling":
        if preset not in SCHEDULING_PRESETS:
            raise ModelError(f"preset {preset} does not apply to scheduling instances")
        return Objective.linear(instance.values)
    if preset not in TRACKING_PRESETS:
        raise ModelError(f"preset {preset} does not apply to tracking instances")
    if preset == "TLPSOC":
        return Objective.cylinder(instance.values)
    return Objective.tracking(instance.values)


def build_preset(params: BatteryParams, preset: str, instance: Instance,
                 table=None) -> RelaxationModel:
    if preset not in PRESETS:
        raise ModelError(f"unknown preset {preset!r}")
    if len(instance.values) != params.horizon:
        raise ModelError(
            f"instance {instance.name or ''} has {len(instance.values)} periods, battery horizon is {params.horizon}"
        )
    objective = _objective_for(preset, instance)
    name = f"{preset}:{instance.name}" if instance.name else preset
    if preset in EXACT_PRESETS:
        return RelaxationModel(params, objective, (), has_u=True, integer_u=True,
                               soc_chain=True, name=name)
    if preset == "HCHLP":
        return RelaxationModel(params, objective, tuple(gen_pozo_cuts(params)), name=name)
    table = table or coefficient_table(params)
    window = redundancy_filter(gen_window_cuts(params, table), params)
    if preset == "TLPu":
        cuts = tuple(window) + tuple(gen_u_cuts(params, table))
        return RelaxationModel(params, objective, cuts, has_u=True, name=name)
    return RelaxationModel(params, objective, tuple(window), name=name)


def solve_explicit_z(model: RelaxationModel):
    """Reference solve of a cylinder model with explicit epigraph variables.

    Each period gets ``z_t`` and the norm-form cone of its SOC cut; the
    objective is ``sum(z)``.  Uses cvxpy with the Clarabel interior-point
    solver.  Returns ``(objective, p_ch, p_dis, z)``.
    """
    import cvxpy as cp

    from .soc import soc_cut

    if model.objective.kind != "cylinder" or model.has_u:
        raise ModelError("explicit-z reference needs a continuous cylinder model")
    T = model.num_periods
    A, b = model.rows()
    lb, ub = model.bounds()
    pc = cp.Variable(T)
    pd = cp.Variable(T)
    z = cp.Variable(T)
    cons = [pc >= lb[:T], pc <= ub[:T], pd >= lb[T:], pd <= ub[T:]]
    if len(b):
        cons.append(A[:, :T] @ pc + A[:, T:2 * T] @ pd <= b)
    for t in range(T):
        cut = soc_cut(model.objective.values[t])
        x = cp.hstack([pd[t], pc[t], z[t]])
        s = cut.vec_b @ x + cut.scal_c
        cons.append(cp.SOC((1 - s) / 2, cp.hstack([(s + 1) / 2, cut.mat_a @ x])))
    prob = cp.Problem(cp.Minimize(cp.sum(z)), cons)
    with warnings.catch_warnings():
        # tight tolerances often end "inaccurate" a hair short of the target; the values are still good
        warnings.simplefilter("ignore", UserWarning)
        prob.solve(solver=cp.CLARABEL, tol_gap_abs=1e-9, tol_gap_rel=1e-9, tol_feas=1e-9)
    if prob.status not in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE):
        raise RuntimeError(f"reference SOC solve ended with status {prob.status}")
    return float(prob.value), np.asarray(pc.value), np.asarray(pd.value), np.asarray(z.value)
