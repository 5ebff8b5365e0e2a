"""Linear valid inequalities for the storage feasible set.

All cuts live in the space of ``(p_ch, p_dis, u)`` with periods numbered
``1..T``.  Families:

* ``WindowCharge`` / ``WindowDischarge``: the multi-period window cuts
  anchored at period ``t`` and spanning ``tau_bar + 1`` periods.  Their
  single-period members become ``SingleperiodBox`` cuts when both
  time-varying rates are positive.
* ``UCharge`` / ``UDischarge``: the same bounds written with the binary
  mode variables.
* ``AnchorNoSelf`` / ``AnchorWithSelf``: on-demand cuts built from the
  submodular bound with a single anchor period ``tau_star``.
* ``PozoCharge`` / ``PozoDischarge`` and the effective-rate box cuts: the
  single-period hull baseline.
"""
from __future__ import annotations

import csv
import enum
import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .battery import BatteryParams, effective_rates, soc_envelope
from .submodular import WindowSpec, eval_f_closed

log = logging.getLogger(__name__)

VALID_TOL = 1e-8


class CutFamily(str, enum.Enum):
    WindowCharge = "WindowCharge"
    WindowDischarge = "WindowDischarge"
    UCharge = "UCharge"
    UDischarge = "UDischarge"
    AnchorNoSelf = "AnchorNoSelf"
    AnchorWithSelf = "AnchorWithSelf"
    PozoCharge = "PozoCharge"
    PozoDischarge = "PozoDischarge"
    SingleperiodBox = "SingleperiodBox"


U_FAMILIES = {CutFamily.UCharge, CutFamily.UDischarge}


@dataclass(frozen=True)
class LinearCut:
    """``sum coeff * var <= rhs`` over charge, discharge and mode variables."""

    coeff_ch: dict
    coeff_dis: dict
    rhs: float
    family: CutFamily
    coeff_u: dict = field(default_factory=dict)
    t: Optional[int] = None
    tau_bar: Optional[int] = None
    tau_star: Optional[int] = None

    sense = "<="

    def __post_init__(self):
        if not (self.coeff_ch or self.coeff_dis or self.coeff_u):
            raise ValueError("a cut needs at least one nonzero coefficient")
        if not math.isfinite(self.rhs):
            raise ValueError("cut rhs must be finite")
        if self.coeff_u and self.family not in U_FAMILIES:
            raise ValueError(f"{self.family.value} cuts carry no mode coefficients")

    @property
    def meta(self):
        return self.t, self.tau_bar, self.tau_star

    @property
    def periods(self) -> set:
        return set(self.coeff_ch) | set(self.coeff_dis) | set(self.coeff_u)

    def lhs(self, p_ch, p_dis, u=None) -> float:
        """Evaluate the left-hand side on 0-indexed profile arrays."""
        total = sum(a * p_ch[k - 1] for k, a in self.coeff_ch.items())
        total += sum(a * p_dis[k - 1] for k, a in self.coeff_dis.items())
        if self.coeff_u:
            if u is None:
                raise ValueError("cut involves mode variables but no u was given")
            total += sum(a * u[k - 1] for k, a in self.coeff_u.items())
        return float(total)

    def violation(self, p_ch, p_dis, u=None) -> float:
        return self.lhs(p_ch, p_dis, u) - self.rhs

    def dense(self, T: int):
        """Coefficient vectors ``(a_ch, a_dis, a_u)`` of length ``T``."""
        a = np.zeros((3, T))
        for row, coeffs in enumerate((self.coeff_ch, self.coeff_dis, self.coeff_u)):
            for k, v in coeffs.items():
                a[row, k - 1] = v
        return a[0], a[1], a[2]

    def key(self, digits: int = 12):
        scale = self.rhs if self.rhs > 0 else 1.0
        parts = []
        for coeffs in (self.coeff_ch, self.coeff_dis, self.coeff_u):
            parts.append(tuple(sorted((k, round(v / scale, digits)) for k, v in coeffs.items())))
        return tuple(parts) + (round(self.rhs / scale, digits),)

    def __str__(self):
        terms = []
        for name, coeffs in (("pc", self.coeff_ch), ("pd", self.coeff_dis), ("u", self.coeff_u)):
            terms += [f"{v:+.6g}*{name}[{k}]" for k, v in sorted(coeffs.items())]
        return f"{self.family.value}({' '.join(terms)} <= {self.rhs:.6g})"


def _clean(coeffs: dict, tol: float = 1e-14) -> dict:
    return {k: float(v) for k, v in coeffs.items() if abs(v) > tol}


# ---------------------------------------------------------------------------
# coefficients


def charge_coefficient(params: BatteryParams, soc_from: float, k: int) -> float:
    """Charge available in the ``k``-th period of a full-rate run from ``soc_from``."""
    _, p_ch = effective_rates(params)
    room = (params.soc_max - soc_from) / (params.delta * params.eta_c) - k * p_ch
    return min(p_ch, max(room, 0.0))


def discharge_coefficient(params: BatteryParams, soc_from: float, k: int) -> float:
    p_dis, _ = effective_rates(params)
    stock = (soc_from - params.soc_min) * params.eta_d / params.delta - k * p_dis
    return min(p_dis, max(stock, 0.0))


class CoefficientTable:
    """Window-cut coefficients for one battery.

    ``c(t, k)`` / ``d(t, k)`` use periods ``t = 1..T`` and offsets
    ``k = 0..T-t``; ``c_bar(k)`` / ``d_bar(k)`` are the empty-to-full
    variants.  ``rho_*`` are the negated single-period gains and
    ``rhobar_*`` the resulting cut coefficients (``None`` means the term is
    dropped because the period is frozen by the SoC envelope).
    """

    def __init__(self, params: BatteryParams):
        self.params = params
        self.env = soc_envelope(params)
        T = params.horizon
        self.T = T
        self._c = np.zeros((T + 1, T + 1))
        self._d = np.zeros((T + 1, T + 1))
        for t in range(1, T + 1):
            for k in range(T + 1):
                self._c[t, k] = charge_coefficient(params, self.env.soc_lo[t - 1], k)
                self._d[t, k] = discharge_coefficient(params, self.env.soc_hi[t - 1], k)
        self._cbar = np.array([charge_coefficient(params, params.soc_min, k) for k in range(T + 1)])
        self._dbar = np.array([discharge_coefficient(params, params.soc_max, k) for k in range(T + 1)])
        # prefix sums for O(1) range sums
        self._cs = np.concatenate([np.zeros((T + 1, 1)), np.cumsum(self._c, axis=1)], axis=1)
        self._ds = np.concatenate([np.zeros((T + 1, 1)), np.cumsum(self._d, axis=1)], axis=1)
        self._cbs = np.concatenate([[0.0], np.cumsum(self._cbar)])
        self._dbs = np.concatenate([[0.0], np.cumsum(self._dbar)])
        self.zero_tol = 1e-12 * max(1.0, self.env.p_ch_eff, self.env.p_dis_eff)

    def c(self, t, k):
        return float(self._c[t, k])

    def d(self, t, k):
        return float(self._d[t, k])

    def c_bar(self, k):
        return float(self._cbar[k])

    def d_bar(self, k):
        return float(self._dbar[k])

    def sum_c(self, t, lo, hi):
        """``sum_{j=lo}^{hi} c(t, j)`` (empty when ``hi < lo``)."""
        return float(self._cs[t, hi + 1] - self._cs[t, lo]) if hi >= lo else 0.0

    def sum_d(self, t, lo, hi):
        return float(self._ds[t, hi + 1] - self._ds[t, lo]) if hi >= lo else 0.0

    def rho_c(self, t, tau, tau_bar):
        eta = self.params.eta
        head = self.sum_c(t, tau, tau_bar) - float(self._cbs[tau_bar - tau])
        return max(-self.env.rate_dis(t + tau) / eta, head)

    def rho_d(self, t, tau, tau_bar):
        eta = self.params.eta
        head = self.sum_d(t, tau, tau_bar) - float(self._dbs[tau_bar - tau])
        return max(-eta * self.env.rate_ch(t + tau), head)

    def rhobar_c(self, t, tau, tau_bar):
        rho = self.rho_c(t, tau, tau_bar)
        if rho < -self.zero_tol:
            return -1.0 / self.params.eta
        if rho <= self.zero_tol:
            return 0.0
        rate = self.env.rate_dis(t + tau)
        return rho / rate if rate > self.zero_tol else None

    def rhobar_d(self, t, tau, tau_bar):
        rho = self.rho_d(t, tau, tau_bar)
        if rho < -self.zero_tol:
            return -self.params.eta
        if rho <= self.zero_tol:
            return 0.0
        rate = self.env.rate_ch(t + tau)
        return rho / rate if rate > self.zero_tol else None

    def windows(self):
        for t in range(1, self.T + 1):
            for tau_bar in range(0, self.T - t + 1):
                yield t, tau_bar


def coefficient_table(params: BatteryParams) -> CoefficientTable:
    return CoefficientTable(params)


# ---------------------------------------------------------------------------
# generators


def _window_pair(table: CoefficientTable, t: int, tau_bar: int):
    ch = {}
    dis = {}
    for tau in range(tau_bar + 1):
        ch[t + tau] = 1.0
        rb = table.rhobar_c(t, tau, tau_bar)
        if rb is None:
            log.debug("window (%d,%d): dropped frozen discharge term at period %d", t, tau_bar, t + tau)
        else:
            dis[t + tau] = rb
    charge = (ch, dis, table.sum_c(t, 0, tau_bar))
    ch = {}
    dis = {}
    for tau in range(tau_bar + 1):
        dis[t + tau] = 1.0
        rb = table.rhobar_d(t, tau, tau_bar)
        if rb is None:
            log.debug("window (%d,%d): dropped frozen charge term at period %d", t, tau_bar, t + tau)
        else:
            ch[t + tau] = rb
    discharge = (ch, dis, table.sum_d(t, 0, tau_bar))
    return charge, discharge


def gen_window_cuts(params: BatteryParams, table: Optional[CoefficientTable] = None) -> list:
    table = table or CoefficientTable(params)
    env = table.env
    cuts = []
    for t, tau_bar in table.windows():
        (cc, cd, cr), (dc, dd, dr) = _window_pair(table, t, tau_bar)
        if tau_bar == 0:
            rc, rd = env.rate_ch(t), env.rate_dis(t)
            if rc > table.zero_tol and rd > table.zero_tol:
                cuts.append(LinearCut({t: 1.0 / rc}, {t: 1.0 / rd}, 1.0,
                                      CutFamily.SingleperiodBox, t=t, tau_bar=0))
                continue
        cuts.append(LinearCut(_clean(cc), _clean(cd), cr, CutFamily.WindowCharge, t=t, tau_bar=tau_bar))
        cuts.append(LinearCut(_clean(dc), _clean(dd), dr, CutFamily.WindowDischarge, t=t, tau_bar=tau_bar))
    return cuts


def gen_u_cuts(params: BatteryParams, table: Optional[CoefficientTable] = None) -> list:
    """Window bounds written with the mode variables instead of the opposite power."""
    table = table or CoefficientTable(params)
    cuts = []
    for t, tau_bar in table.windows():
        periods = range(t, t + tau_bar + 1)
        rho_c = [table.rho_c(t, tau, tau_bar) for tau in range(tau_bar + 1)]
        rho_d = [table.rho_d(t, tau, tau_bar) for tau in range(tau_bar + 1)]
        # sum p_ch + sum rho_c (1 - u) <= sum c
        cuts.append(LinearCut(
            {k: 1.0 for k in periods}, {},
            table.sum_c(t, 0, tau_bar) - sum(rho_c),
            CutFamily.UCharge,
            coeff_u=_clean({k: -r for k, r in zip(periods, rho_c)}, table.zero_tol),
            t=t, tau_bar=tau_bar,
        ))
        cuts.append(LinearCut(
            {}, {k: 1.0 for k in periods},
            table.sum_d(t, 0, tau_bar),
            CutFamily.UDischarge,
            coeff_u=_clean(dict(zip(periods, rho_d)), table.zero_tol),
            t=t, tau_bar=tau_bar,
        ))
    return cuts


def _gain_coefficient(gain: float, rate: float, eta: float, tol: float):
    """Coefficient multiplying ``p_dis`` for a charge gain linearized over discharge power.

    Positive gains are earned at the lossy exchange rate, negative gains are
    spread over the largest discharge the period allows, zero gains add no
    term.  ``None`` flags a frozen period whose term is dropped.
    """
    if gain > tol:
        return -1.0 / eta
    if gain >= -tol:
        return 0.0
    if rate <= tol:
        return None
    return -gain / rate


def anchor_value(table: CoefficientTable, t: int, tau_bar: int, tau_star: int) -> float:
    """Cumulative charge of the window when only ``tau_star`` discharges, in closed form."""
    head = table.sum_c(t, 0, tau_star - 1)
    rest = table.sum_c(t, tau_star, tau_bar) + table.env.rate_dis(t + tau_star) / table.params.eta
    refill = float(table._cbs[tau_bar - tau_star])
    return head + min(rest, refill)


def gen_anchor_cuts(params: BatteryParams, t: int, tau_bar: int, tau_star: int,
                    table: Optional[CoefficientTable] = None) -> list:
    """The two single-anchor cuts for window ``(t, tau_bar)`` anchored at ``tau_star``."""
    T = params.horizon
    if not 1 <= tau_bar <= T - t:
        raise ValueError(f"tau_bar must lie in 1..{T - t} for t={t}")
    if not 0 <= tau_star <= tau_bar:
        raise ValueError("tau_star must lie in 0..tau_bar")
    table = table or CoefficientTable(params)
    env = table.env
    tol = table.zero_tol
    eta = params.eta
    win = WindowSpec(t, tau_bar + 1, float(env.soc_lo[t - 1]), params)
    full = win.full

    def f_bar(mask):
        return eval_f_closed(win, full & ~mask)

    star = 1 << tau_star
    base = f_bar(0)
    at_star = anchor_value(table, t, tau_bar, tau_star)
    others = [tau for tau in range(tau_bar + 1) if tau != tau_star]

    # (i): anchor in the discharging set
    ch = {t + tau: 1.0 for tau in others}
    dis = {}
    for tau in others:
        g = f_bar(star | 1 << tau) - at_star
        coef = _gain_coefficient(g, env.rate_dis(t + tau), eta, tol)
        if coef is None:
            log.debug("anchor (%d,%d,%d): frozen period %d dropped", t, tau_bar, tau_star, t + tau)
        else:
            dis[t + tau] = coef
    no_self = LinearCut(_clean(ch), _clean(dis), at_star, CutFamily.AnchorNoSelf,
                        t=t, tau_bar=tau_bar, tau_star=tau_star)

    # (ii): anchor outside the discharging set
    g_star = at_star - base
    kappa = env.rate_ch(t + tau_star) if g_star >= -tol else -g_star
    ch = {t + tau: 1.0 for tau in others}
    if kappa > tol:
        ch[t + tau_star] = 1.0 + g_star / kappa
    else:
        log.debug("anchor (%d,%d,%d): frozen anchor period", t, tau_bar, tau_star)
        ch[t + tau_star] = 1.0
    dis = {}
    for tau in others:
        g = f_bar(1 << tau) - base
        coef = _gain_coefficient(g, env.rate_dis(t + tau), eta, tol)
        if coef is not None:
            dis[t + tau] = coef
    with_self = LinearCut(_clean(ch), _clean(dis), at_star, CutFamily.AnchorWithSelf,
                          t=t, tau_bar=tau_bar, tau_star=tau_star)
    return [no_self, with_self]


def gen_all_anchor_cuts(params: BatteryParams, table: Optional[CoefficientTable] = None) -> list:
    """Every anchor cut of the horizon; exponential in practice, meant for small T."""
    table = table or CoefficientTable(params)
    cuts = []
    for t, tau_bar in table.windows():
        if tau_bar == 0:
            continue
        for tau_star in range(tau_bar + 1):
            cuts += gen_anchor_cuts(params, t, tau_bar, tau_star, table)
    return cuts


def gen_pozo_cuts(params: BatteryParams) -> list:
    """Single-period hull baseline: prefix cuts from the first period plus boxes."""
    T = params.horizon
    eta = params.eta
    p_dis_e, p_ch_e = effective_rates(params)
    rhs_c = (params.soc_max - params.soc_init) / (params.delta * params.eta_c)
    rhs_d = (params.soc_init - params.soc_min) * params.eta_d / params.delta
    cuts = []
    for tau_bar in range(T):
        ch = {k + 1: 1.0 for k in range(tau_bar + 1)}
        dis = {k + 1: -1.0 / eta for k in range(tau_bar)}
        cuts.append(LinearCut(ch, dis, rhs_c, CutFamily.PozoCharge, t=1, tau_bar=tau_bar))
        dis = {k + 1: 1.0 for k in range(tau_bar + 1)}
        ch = {k + 1: -eta for k in range(tau_bar)}
        cuts.append(LinearCut(ch, dis, rhs_d, CutFamily.PozoDischarge, t=1, tau_bar=tau_bar))
    if p_ch_e > 0 and p_dis_e > 0:
        for t in range(1, T + 1):
            cuts.append(LinearCut({t: 1.0 / p_ch_e}, {t: 1.0 / p_dis_e}, 1.0,
                                  CutFamily.SingleperiodBox, t=t, tau_bar=0))
    return cuts


# ---------------------------------------------------------------------------
# redundancy


def full_rate_span(params: BatteryParams, soc_from: float, side: str) -> int:
    """Largest ``tau_bar`` whose window runs at the full effective rate in every period.

    ``E`` is the number of periods needed to fill (or empty) the storage
    from ``soc_from``; only offsets ``k <= floor(E) - 1`` are guaranteed a
    full-rate coefficient.
    """
    p_dis_e, p_ch_e = effective_rates(params)
    if side == "charge":
        if p_ch_e <= 0:
            return 0
        periods = (params.soc_max - soc_from) / (params.delta * params.eta_c * p_ch_e)
    else:
        if p_dis_e <= 0:
            return 0
        periods = (soc_from - params.soc_min) * params.eta_d / (params.delta * p_dis_e)
    if periods <= 0:
        return 0
    return max(int(math.floor(periods + 1e-9)) - 1, 0)


def redundancy_filter(cuts: Sequence[LinearCut], params: BatteryParams) -> list:
    """Drop window cuts dominated by the single-period boxes of their window."""
    env = soc_envelope(params)
    T = params.horizon
    span_c = {t: full_rate_span(params, env.soc_lo[t - 1], "charge") for t in range(1, T + 1)}
    span_d = {t: full_rate_span(params, env.soc_hi[t - 1], "discharge") for t in range(1, T + 1)}
    kept = []
    for cut in cuts:
        if cut.family == CutFamily.WindowCharge and 1 <= cut.tau_bar <= min(T - cut.t, span_c[cut.t]):
            continue
        if cut.family == CutFamily.WindowDischarge and 1 <= cut.tau_bar <= min(T - cut.t, span_d[cut.t]):
            continue
        kept.append(cut)
    return kept


def dedupe(cuts: Iterable[LinearCut]) -> list:
    seen = set()
    out = []
    for cut in cuts:
        k = cut.key()
        if k not in seen:
            seen.add(k)
            out.append(cut)
    return out


# ---------------------------------------------------------------------------
# certification against the vertex oracle


@dataclass
class ValidityReport:
    max_violation: float
    worst_cut: Optional[LinearCut]
    n_cuts: int
    n_points: int
    tol: float = VALID_TOL

    @property
    def passed(self) -> bool:
        return self.max_violation <= self.tol


def _vertex_arrays(vertices):
    P_ch = np.array([v.p_ch for v in vertices])
    P_dis = np.array([v.p_dis for v in vertices])
    U = np.array([v.mode if v.mode is not None else np.zeros(len(v.p_ch)) for v in vertices])
    return P_ch, P_dis, U


def validate_cuts(cuts: Sequence[LinearCut], params: BatteryParams, vertices=None) -> ValidityReport:
    """Largest violation of any cut at any vertex of the fixed-mode polytopes.

    Power-only cuts are checked on every vertex; mode cuts are checked on the
    vertex paired with its integral mode pattern.
    """
    from .solvers.vertices import enumerate_vertices

    if vertices is None:
        vertices = enumerate_vertices(params, keep_modes=True)
    P_ch, P_dis, U = _vertex_arrays(vertices)
    T = params.horizon
    worst, worst_cut = -np.inf, None
    for cut in cuts:
        a_ch, a_dis, a_u = cut.dense(T)
        vals = P_ch @ a_ch + P_dis @ a_dis + U @ a_u - cut.rhs
        v = float(vals.max()) if len(vals) else -np.inf
        if v > worst:
            worst, worst_cut = v, cut
    return ValidityReport(float(worst), worst_cut, len(cuts), len(vertices))


@dataclass
class FacetCertificate:
    tight_count: int
    affine_rank: int
    required: int
    skipped: bool = False

    @property
    def passed(self) -> bool:
        return self.skipped or self.tight_count >= self.required


def facet_certificate(cut: LinearCut, params: BatteryParams, vertices=None,
                      filtered: Optional[Sequence[LinearCut]] = None) -> FacetCertificate:
    """Count distinct vertices of ``P`` on which ``cut`` is tight.

    When ``filtered`` is given and the cut is absent from it (a redundant
    window cut), the certificate is reported as skipped.
    """
    from .solvers.vertices import enumerate_vertices, unique_power_points

    tau_bar = cut.tau_bar or 0
    required = 2 * (tau_bar + 1)
    if filtered is not None and cut.key() not in {c.key() for c in filtered}:
        return FacetCertificate(0, 0, required, skipped=True)
    if vertices is None:
        vertices = enumerate_vertices(params)
    pts = unique_power_points(vertices)
    T = params.horizon
    a_ch, a_dis, _ = cut.dense(T)
    vals = pts[:, :T] @ a_ch + pts[:, T:] @ a_dis - cut.rhs
    tight = pts[np.abs(vals) <= VALID_TOL * max(1.0, abs(cut.rhs))]
    rank = 0
    if len(tight) > 1:
        rank = int(np.linalg.matrix_rank(tight[1:] - tight[0], tol=1e-9))
    return FacetCertificate(len(tight), rank, required)


# ---------------------------------------------------------------------------
# CSV export

CUT_CSV_COLUMNS = ("family", "t", "tau_bar", "tau_star", "var_kind", "period", "coeff", "rhs")


def export_cuts_csv(cuts: Sequence[LinearCut], path) -> None:
    """One row per nonzero coefficient; ``var_kind`` is ``p_ch``, ``p_dis`` or ``u``."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(CUT_CSV_COLUMNS)
        for idx, cut in enumerate(cuts):
            for kind, coeffs in (("p_ch", cut.coeff_ch), ("p_dis", cut.coeff_dis), ("u", cut.coeff_u)):
                for k in sorted(coeffs):
                    w.writerow([
                        cut.family.value,
                        "" if cut.t is None else cut.t,
                        "" if cut.tau_bar is None else cut.tau_bar,
                        "" if cut.tau_star is None else cut.tau_star,
                        kind, k, repr(coeffs[k]), repr(cut.rhs),
                    ])


def read_cuts_csv(path) -> list:
    """Inverse of :func:`export_cuts_csv`.

    Consecutive rows with equal metadata form one cut; a repeated period or
    a step back in the ``p_ch, p_dis, u`` order starts the next one.
    """
    order = {"p_ch": 0, "p_dis": 1, "u": 2}
    cuts = []
    current = None
    last = None
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            kind = row["var_kind"]
            if kind not in order:
                raise ValueError(f"unknown var_kind {kind!r}")
            meta = (row["family"], row["t"], row["tau_bar"], row["tau_star"], row["rhs"])
            pos = (order[kind], int(row["period"]))
            if current is None or current[0] != meta or pos <= last:
                if current is not None:
                    cuts.append(_cut_from_rows(*current))
                current = (meta, {"p_ch": {}, "p_dis": {}, "u": {}})
            current[1][kind][row["period"]] = float(row["coeff"])
            last = pos
    if current is not None:
        cuts.append(_cut_from_rows(*current))
    return cuts


def _cut_from_rows(meta, coeffs):
    family, t, tau_bar, tau_star, rhs = meta

    def opt(v):
        return int(v) if v != "" else None

    def keyed(d):
        return {int(k): v for k, v in d.items()}

    return LinearCut(keyed(coeffs["p_ch"]), keyed(coeffs["p_dis"]), float(rhs), CutFamily(family),
                     coeff_u=keyed(coeffs["u"]), t=opt(t), tau_bar=opt(tau_bar), tau_star=opt(tau_star))
