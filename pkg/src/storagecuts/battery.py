"""Battery parameters, feasible-set membership and SoC envelopes.

Conventions used across the package:

* Units are kW, kWh and hours.
* Periods are numbered ``1..T`` whenever they appear in cut metadata or
  exported files.  Trajectory arrays are plain numpy vectors, so period
  ``t`` lives at index ``t - 1``.
* Envelope SoC vectors are indexed by the *end* of a period, so
  ``soc_lo[k]`` is the lowest reachable SoC at the end of period ``k``
  (``k = 0`` is the initial state).
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

FEAS_TOL = 1e-8
SOC_TOL = 1e-9

PARAM_KEYS = (
    "p_dis_max",
    "p_ch_max",
    "soc_min",
    "soc_max",
    "eta_c",
    "eta_d",
    "delta",
    "soc_init",
    "horizon",
)


class ParameterError(ValueError):
    """Raised for battery descriptions that break a physical invariant."""


@dataclass(frozen=True)
class BatteryParams:
    """Physical description of a storage unit over a horizon of ``horizon`` periods."""

    p_dis_max: float
    p_ch_max: float
    soc_min: float
    soc_max: float
    eta_c: float
    eta_d: float
    delta: float
    soc_init: float
    horizon: int

    def __post_init__(self):
        if not self.soc_max > self.soc_min:
            raise ParameterError("soc_max must exceed soc_min")
        if not self.soc_min <= self.soc_init <= self.soc_max:
            raise ParameterError("soc_init must lie within [soc_min, soc_max]")
        for name in ("eta_c", "eta_d"):
            eta = getattr(self, name)
            if not 0.0 < eta <= 1.0:
                raise ParameterError(f"{name} must lie in (0, 1]")
        if not self.delta > 0:
            raise ParameterError("delta must be positive")
        if self.p_dis_max < 0 or self.p_ch_max < 0:
            raise ParameterError("power ratings must be nonnegative")
        if int(self.horizon) != self.horizon or self.horizon < 1:
            raise ParameterError("horizon must be a positive integer")
        object.__setattr__(self, "horizon", int(self.horizon))

    @property
    def capacity(self) -> float:
        return self.soc_max - self.soc_min

    @property
    def eta(self) -> float:
        """Round-trip efficiency ``eta_c * eta_d``."""
        return self.eta_c * self.eta_d

    def replace(self, **changes) -> "BatteryParams":
        values = asdict(self)
        values.update(changes)
        return BatteryParams(**values)

    def to_dict(self) -> dict:
        return {key: getattr(self, key) for key in PARAM_KEYS}

    @classmethod
    def from_dict(cls, data: dict) -> "BatteryParams":
        missing = [key for key in PARAM_KEYS if key not in data]
        if missing:
            raise ParameterError(f"missing battery fields: {', '.join(missing)}")
        extra = sorted(set(data) - set(PARAM_KEYS))
        if extra:
            raise ParameterError(f"unknown battery fields: {', '.join(extra)}")
        values = {key: float(data[key]) for key in PARAM_KEYS if key != "horizon"}
        horizon = data["horizon"]
        if isinstance(horizon, float) and not horizon.is_integer():
            raise ParameterError("horizon must be a positive integer")
        return cls(horizon=int(horizon), **values)


def load_battery(path) -> BatteryParams:
    """Read a battery parameter JSON object (the nine ``BatteryParams`` keys)."""
    with open(path, encoding="utf-8") as fh:
        return BatteryParams.from_dict(json.load(fh))


def load_battery_list(path) -> list[BatteryParams]:
    """Read batteries from either a JSON object, a JSON list or JSON lines."""
    text = Path(path).read_text(encoding="utf-8").strip()
    if not text:
        raise ParameterError(f"{path}: empty battery file")
    if text[0] == "[":
        return [BatteryParams.from_dict(item) for item in json.loads(text)]
    try:
        return [BatteryParams.from_dict(json.loads(text))]
    except json.JSONDecodeError:
        pass
    return [BatteryParams.from_dict(json.loads(line)) for line in text.splitlines() if line.strip()]


def effective_rates(params: BatteryParams) -> tuple[float, float]:
    """Return ``(p_dis_eff, p_ch_eff)``: ratings clipped by what one period can move."""
    p_dis = min(params.p_dis_max, params.eta_d * params.capacity / params.delta)
    p_ch = min(params.p_ch_max, params.capacity / (params.delta * params.eta_c))
    return p_dis, p_ch


@dataclass(frozen=True)
class EffectiveEnvelope:
    p_dis_eff: float
    p_ch_eff: float
    soc_lo: np.ndarray
    soc_hi: np.ndarray
    p_ch_eff_t: np.ndarray
    p_dis_eff_t: np.ndarray

    def rate_ch(self, t: int) -> float:
        """Time-varying charge rate of period ``t`` (1-based)."""
        return float(self.p_ch_eff_t[t - 1])

    def rate_dis(self, t: int) -> float:
        return float(self.p_dis_eff_t[t - 1])


def soc_recursion(params: BatteryParams) -> tuple[np.ndarray, np.ndarray]:
    """Lowest and highest reachable SoC at the end of periods ``0..T-1``."""
    p_dis, p_ch = effective_rates(params)
    T = params.horizon
    lo = np.empty(T)
    hi = np.empty(T)
    lo[0] = hi[0] = params.soc_init
    for k in range(1, T):
        lo[k] = max(lo[k - 1] - params.delta * p_dis / params.eta_d, params.soc_min)
        hi[k] = min(hi[k - 1] + params.delta * params.eta_c * p_ch, params.soc_max)
    return lo, hi


def soc_envelope(params: BatteryParams) -> EffectiveEnvelope:
    # imported here to keep the coefficient formulas in one place
    from .cuts import charge_coefficient, discharge_coefficient

    p_dis, p_ch = effective_rates(params)
    lo, hi = soc_recursion(params)
    T = params.horizon
    ch_t = np.array([charge_coefficient(params, lo[t - 1], 0) for t in range(1, T + 1)])
    dis_t = np.array([discharge_coefficient(params, hi[t - 1], 0) for t in range(1, T + 1)])
    for arr in (lo, hi, ch_t, dis_t):
        arr.setflags(write=False)
    return EffectiveEnvelope(p_dis, p_ch, lo, hi, ch_t, dis_t)


@dataclass(frozen=True)
class Trajectory:
    """Charge/discharge/SoC profile; ``mode`` holds the (possibly fractional) u pattern."""

    p_dis: np.ndarray
    p_ch: np.ndarray
    soc: np.ndarray
    mode: Optional[np.ndarray] = None

    @property
    def horizon(self) -> int:
        return len(self.p_ch)

    def with_mode(self, mode) -> "Trajectory":
        return Trajectory(self.p_dis, self.p_ch, self.soc, np.asarray(mode, dtype=float))


def simulate_soc(params: BatteryParams, p_dis, p_ch) -> Trajectory:
    """Run the SoC recursion for given power profiles; bounds are not enforced here."""
    p_dis = np.asarray(p_dis, dtype=float)
    p_ch = np.asarray(p_ch, dtype=float)
    T = params.horizon
    if p_dis.shape != (T,) or p_ch.shape != (T,):
        raise ValueError(f"power profiles must have length {T}")
    if (p_dis < 0).any() or (p_ch < 0).any():
        raise ValueError("power profiles must be nonnegative")
    step = params.delta * (params.eta_c * p_ch - p_dis / params.eta_d)
    soc = params.soc_init + np.cumsum(step)
    return Trajectory(p_dis, p_ch, soc)


@dataclass
class MembershipReport:
    which: str
    violations: dict = field(default_factory=dict)
    tol: float = FEAS_TOL

    @property
    def member(self) -> bool:
        return all(v <= self.limit(k) for k, v in self.violations.items())

    def limit(self, key: str) -> float:
        return SOC_TOL if key == "soc_recursion" else self.tol

    @property
    def worst(self) -> float:
        return max(self.violations.values(), default=0.0)

    def __bool__(self):
        return self.member


def membership(params: BatteryParams, traj: Trajectory, which: str = "P") -> MembershipReport:
    """Check a trajectory against ``P`` (complementarity), ``P01`` or ``PR``.

    Every constraint family is reported with its worst violation in native
    units. The SoC recursion residual is held to ``SOC_TOL``, the rest to
    ``FEAS_TOL``.
    """
    which = which.upper()
    if which not in ("P", "P01", "PR"):
        raise ValueError(f"unknown set {which!r}")
    T = params.horizon
    p_dis = np.asarray(traj.p_dis, dtype=float)
    p_ch = np.asarray(traj.p_ch, dtype=float)
    soc = np.asarray(traj.soc, dtype=float)
    if not (len(p_dis) == len(p_ch) == len(soc) == T):
        raise ValueError(f"trajectory length must equal horizon {T}")
    if which != "P" and traj.mode is None:
        raise ValueError(f"membership in {which} needs a mode vector")

    viol = {}
    viol["nonnegativity"] = float(max(0.0, -p_dis.min(), -p_ch.min(), -soc.min()))
    if which == "P":
        viol["discharge_rating"] = float(max(0.0, (p_dis - params.p_dis_max).max()))
        viol["charge_rating"] = float(max(0.0, (p_ch - params.p_ch_max).max()))
    else:
        u = np.asarray(traj.mode, dtype=float)
        viol["discharge_rating"] = float(max(0.0, (p_dis - params.p_dis_max * (1 - u)).max()))
        viol["charge_rating"] = float(max(0.0, (p_ch - params.p_ch_max * u).max()))
        viol["mode_bounds"] = float(max(0.0, -u.min(), (u - 1).max()))
        if which == "P01":
            viol["mode_integrality"] = float(np.abs(u - np.round(u)).max())
    viol["soc_bounds"] = float(max(0.0, (params.soc_min - soc).max(), (soc - params.soc_max).max()))
    prev = np.concatenate(([params.soc_init], soc[:-1]))
    residual = soc - prev - params.delta * (params.eta_c * p_ch - p_dis / params.eta_d)
    viol["soc_recursion"] = float(np.abs(residual).max())
    if which == "P":
        viol["complementarity"] = float(np.abs(p_dis * p_ch).max())
    return MembershipReport(which, viol)


def violation_metrics(traj: Trajectory, threshold: float = 1e-4) -> tuple[int, float]:
    """Number of periods with ``p_ch * p_dis > threshold`` and the total product."""
    prod = np.asarray(traj.p_ch, dtype=float) * np.asarray(traj.p_dis, dtype=float)
    return int((prod > threshold).sum()), float(prod.sum())


def charging_mode(traj: Trajectory) -> np.ndarray:
    """u pattern that marks charging periods with 1 and everything else with 0."""
    return (np.asarray(traj.p_ch) > 0).astype(float)
