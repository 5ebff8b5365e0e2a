"""Set functions of extreme charging trajectories over a window of periods.

For a window ``{0..n-1}`` starting from a known SoC, ``f(omega)`` is the
largest cumulative charge when charging is allowed exactly on ``omega``
and discharging on the rest.  The optimum is greedy: charge as much as
room and rating allow on ``omega``, discharge as much as the stored energy
and rating allow elsewhere.  ``g(omega)`` is the cumulative discharge of
the same greedy schedule, so ``g`` is the charge/discharge mirror of the
complement ``f_bar(A) = f(window \\ A)``.

Subsets are bitmasks (bit ``k`` set means period ``k`` of the window is in
the set); plain iterables of ints are accepted everywhere too.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Union

import numpy as np

from .battery import BatteryParams, effective_rates
from .solvers.simplex import linprog

MAX_CERT_WINDOW = 6
SUBMODULAR_TOL = 1e-9

SetLike = Union[int, Iterable[int]]


class WindowTooLarge(ValueError):
    pass


@dataclass(frozen=True)
class WindowSpec:
    """Window of ``length`` periods starting at period ``start`` (1-based)."""

    start: int
    length: int
    soc_start: float
    params: BatteryParams

    def __post_init__(self):
        p = self.params
        if self.start < 1 or self.length < 1:
            raise ValueError("window start and length must be positive")
        if self.start + self.length - 1 > p.horizon:
            raise ValueError("window runs past the horizon")
        if not p.soc_min - 1e-12 <= self.soc_start <= p.soc_max + 1e-12:
            raise ValueError("soc_start outside [soc_min, soc_max]")

    @property
    def full(self) -> int:
        return (1 << self.length) - 1


def to_mask(omega: SetLike, length: int) -> int:
    if isinstance(omega, (int, np.integer)):
        mask = int(omega)
    else:
        mask = 0
        for k in omega:
            if not 0 <= k < length:
                raise ValueError(f"period {k} outside window of length {length}")
            mask |= 1 << int(k)
    if mask >> length:
        raise ValueError("subset mask exceeds window length")
    return mask


def greedy_schedule(win: WindowSpec, charge_mask: int):
    """Greedy extreme trajectory: returns (charge, discharge, soc) per window period."""
    p = win.params
    p_dis_e, p_ch_e = effective_rates(p)
    s = win.soc_start
    n = win.length
    ch = np.zeros(n)
    dis = np.zeros(n)
    soc = np.zeros(n)
    for k in range(n):
        if charge_mask >> k & 1:
            amount = min(max(p.soc_max - s, 0.0) / (p.delta * p.eta_c), p_ch_e)
            ch[k] = amount
            s = min(s + p.delta * p.eta_c * amount, p.soc_max)
        else:
            amount = min(max(s - p.soc_min, 0.0) * p.eta_d / p.delta, p_dis_e)
            dis[k] = amount
            s = max(s - p.delta * amount / p.eta_d, p.soc_min)
        soc[k] = s
    return ch, dis, soc


def eval_f_closed(win: WindowSpec, omega: SetLike) -> float:
    ch, _, _ = greedy_schedule(win, to_mask(omega, win.length))
    return float(ch.sum())


def eval_g(win: WindowSpec, omega: SetLike) -> float:
    """Largest cumulative discharge when charging is allowed only on ``omega``.

    Discharging is allowed on the complement, so ``g(empty)`` empties the
    storage as fast as the rating allows.
    """
    _, dis, _ = greedy_schedule(win, to_mask(omega, win.length))
    return float(dis.sum())


def _window_lp(win: WindowSpec, charge_mask: int, maximize: str) -> float:
    p = win.params
    p_dis_e, p_ch_e = effective_rates(p)
    n = win.length
    # variables [p_ch(n), p_dis(n), soc(n)]
    nv = 3 * n
    lb = np.zeros(nv)
    ub = np.zeros(nv)
    for k in range(n):
        charging = charge_mask >> k & 1
        ub[k] = p_ch_e if charging else 0.0
        ub[n + k] = 0.0 if charging else p_dis_e
        lb[2 * n + k] = p.soc_min
        ub[2 * n + k] = p.soc_max
    A_eq = np.zeros((n, nv))
    b_eq = np.zeros(n)
    for k in range(n):
        A_eq[k, 2 * n + k] = 1.0
        A_eq[k, k] = -p.delta * p.eta_c
        A_eq[k, n + k] = p.delta / p.eta_d
        if k:
            A_eq[k, 2 * n + k - 1] = -1.0
        else:
            b_eq[k] = win.soc_start
    c = np.zeros(nv)
    if maximize == "charge":
        c[:n] = -1.0
    else:
        c[n:2 * n] = -1.0
    res = linprog(c, A_eq=A_eq, b_eq=b_eq, lb=lb, ub=ub, tol=1e-11)
    if not res.success:
        raise RuntimeError(f"window LP returned {res.status}; the idle schedule should be feasible")
    return -res.fun


def eval_f_lp(win: WindowSpec, omega: SetLike) -> float:
    """Reference value of ``f`` from the window LP (independent of the greedy)."""
    return _window_lp(win, to_mask(omega, win.length), "charge")


def eval_g_lp(win: WindowSpec, omega: SetLike) -> float:
    return _window_lp(win, to_mask(omega, win.length), "discharge")


def _evaluator(fn: str, win: WindowSpec):
    full = win.full
    if fn == "f":
        return lambda m: eval_f_closed(win, m)
    if fn == "g":
        return lambda m: eval_g(win, m)
    if fn == "f_bar":
        return lambda m: eval_f_closed(win, full & ~m)
    if fn == "g_bar":
        return lambda m: eval_g(win, full & ~m)
    raise ValueError(f"unknown set function {fn!r}")


def set_value(fn: str, win: WindowSpec, subset: SetLike) -> float:
    return _evaluator(fn, win)(to_mask(subset, win.length))


def gain(fn: str, win: WindowSpec, element: int, context: SetLike = ()) -> float:
    """Marginal value ``fn(context + element) - fn(context)``."""
    mask = to_mask(context, win.length)
    if not 0 <= element < win.length:
        raise ValueError("element outside the window")
    if mask >> element & 1:
        raise ValueError(f"element {element} already in the context")
    value = _evaluator(fn, win)
    return value(mask | 1 << element) - value(mask)


def all_values(fn: str, win: WindowSpec) -> np.ndarray:
    value = _evaluator(fn, win)
    return np.array([value(m) for m in range(1 << win.length)])


@dataclass
class CertificateReport:
    """Smallest ``fn(j|A) - fn(j|B)`` over all ``A <= B``, ``j`` not in ``B``."""

    margins: dict = field(default_factory=dict)
    witnesses: dict = field(default_factory=dict)
    tol: float = SUBMODULAR_TOL

    @property
    def passed(self) -> bool:
        return all(m >= -self.tol for m in self.margins.values())

    @property
    def min_margin(self) -> float:
        return min(self.margins.values())


def submodularity_margin(values: np.ndarray, n: int):
    """Exhaustive diminishing-returns check over a table of ``2**n`` set values."""
    best = np.inf
    witness = None
    for B in range(1 << n):
        outside = [j for j in range(n) if not B >> j & 1]
        if not outside:
            continue
        A = B
        while True:
            for j in outside:
                bit = 1 << j
                margin = (values[A | bit] - values[A]) - (values[B | bit] - values[B])
                if margin < best:
                    best, witness = margin, (A, B, j)
            if A == 0:
                break
            A = (A - 1) & B
    return best, witness


def check_submodularity(win: WindowSpec, functions=("f", "g", "f_bar", "g_bar")) -> CertificateReport:
    if win.length > MAX_CERT_WINDOW:
        raise WindowTooLarge(
            f"window too large: {win.length} periods (limit {MAX_CERT_WINDOW})"
        )
    report = CertificateReport()
    for fn in functions:
        margin, witness = submodularity_margin(all_values(fn, win), win.length)
        report.margins[fn] = float(margin)
        report.witnesses[fn] = witness
    return report
