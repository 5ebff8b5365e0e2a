"""Second-order-cone description of the per-period hull for setpoint tracking.

For a setpoint ``ps`` the tracking error of a single period, lifted with an
epigraph variable ``z``, is exact on the two curves where only one of the
powers is nonzero.  The convex hull of those curves over ``p_dis, p_ch >= 0``
is the epigraph of the parabolic cylinder

    q(p_dis, p_ch) = (p_dis - p_ch - ps)**2 + 4 * p_dis * p_ch

which is second-order-cone representable.  Internally solvers use the smooth
quadratic ``z >= q``; the norm form below is kept for export.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

# monomial order of the exported quadratic coefficients
QUAD_TERMS = ("p_dis^2", "p_ch^2", "p_dis*p_ch", "p_dis", "p_ch", "1")
SOC_CSV_COLUMNS = ("period", "setpoint") + tuple(f"coef[{m}]" for m in QUAD_TERMS)
EPIGRAPH_TOL = 1e-10


def cylinder_value(p_dis, p_ch, setpoint):
    """``q`` in expanded form; broadcasts over arrays."""
    pd = np.asarray(p_dis, dtype=float)
    pc = np.asarray(p_ch, dtype=float)
    ps = np.asarray(setpoint, dtype=float)
    q = pd * pd + pc * pc + 2 * pd * pc - 2 * pd * ps + 2 * pc * ps + ps * ps
    return q if q.ndim else float(q)


def quadratic_coefficients(setpoint: float) -> tuple:
    """Coefficients of ``q`` in the order of ``QUAD_TERMS``."""
    ps = float(setpoint)
    return (1.0, 1.0, 2.0, -2.0 * ps, 2.0 * ps, ps * ps)


@dataclass(frozen=True)
class SocCutData:
    """``z >= q`` written as ``||((b'x + 1 + c)/2, Ax)|| <= (1 - b'x - c)/2`` with ``x = (p_dis, p_ch, z)``."""

    setpoint: float
    mat_a: np.ndarray
    vec_b: np.ndarray
    scal_c: float

    def norm_form(self, p_dis: float, p_ch: float, z: float) -> tuple:
        """Return ``(lhs, rhs)`` of the norm constraint at a point."""
        x = np.array([p_dis, p_ch, z], dtype=float)
        s = float(self.vec_b @ x) + self.scal_c
        lhs = float(np.linalg.norm(np.concatenate(([(s + 1.0) / 2.0], self.mat_a @ x))))
        return lhs, (1.0 - s) / 2.0

    def satisfied(self, p_dis: float, p_ch: float, z: float, tol: float = 0.0) -> bool:
        lhs, rhs = self.norm_form(p_dis, p_ch, z)
        return lhs <= rhs + tol


def soc_cut(setpoint: float) -> SocCutData:
    ps = float(setpoint)
    A = np.zeros((3, 3))
    A[0, :2] = 1.0
    b = np.array([-2.0 * ps, 2.0 * ps, -1.0])
    for arr in (A, b):
        arr.setflags(write=False)
    return SocCutData(ps, A, b, ps * ps)


@dataclass(frozen=True)
class HullDecomposition:
    """``lam * point_d + (1 - lam) * point_c`` with both points ordered ``(z, p_dis, p_ch)``."""

    lam: float
    point_d: tuple
    point_c: tuple

    def combination(self) -> np.ndarray:
        return self.lam * np.array(self.point_d) + (1 - self.lam) * np.array(self.point_c)


def hull_decompose(z: float, p_dis: float, p_ch: float, setpoint: float) -> HullDecomposition:
    """Write a point of the cylinder epigraph as a mix of one pure-discharge and one pure-charge point."""
    if p_dis < 0 or p_ch < 0:
        raise ValueError("powers must be nonnegative")
    q = cylinder_value(p_dis, p_ch, setpoint)
    if z < q - EPIGRAPH_TOL * max(1.0, abs(q)):
        raise ValueError(f"point lies below the cylinder (z={z}, q={q})")
    ps = float(setpoint)
    p0 = float(p_dis) + float(p_ch)
    lam = 1.0 if p0 == 0 else p_dis / p0
    point_d = ((p0 - ps) ** 2, p0, 0.0)
    point_c = ((p0 + ps) ** 2, 0.0, p0)
    return HullDecomposition(lam, point_d, point_c)


def aggregate_cylinder_check(traj, setpoints, z=None) -> float:
    """Sum of per-period cylinder values; must not exceed ``sum(z)`` for feasible ``z``."""
    q = cylinder_value(traj.p_dis, traj.p_ch, setpoints)
    total = float(np.sum(q))
    if z is not None:
        z = np.asarray(z, dtype=float)
        if (z < q - EPIGRAPH_TOL * np.maximum(1.0, np.abs(q))).any():
            raise ValueError("z is below the cylinder in some period")
        if total > float(z.sum()) + EPIGRAPH_TOL * max(1.0, abs(total)):
            raise AssertionError("aggregate cylinder exceeds sum of epigraph variables")
    return total


def export_soc_cuts_csv(setpoints, path) -> None:
    """One row per period: period (1-based), setpoint and the six coefficients of ``q``."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(SOC_CSV_COLUMNS)
        for t, ps in enumerate(np.asarray(setpoints, dtype=float), start=1):
            writer.writerow([t, repr(float(ps))] + [repr(c) for c in quadratic_coefficients(ps)])


def _pencil_member(lam: float, setpoint: float) -> tuple:
    # quadratic form diag(1, 1, 0) with off-diagonal lam/2, plus the linear and constant parts
    M = np.array([[1.0, lam / 2, 0.0], [lam / 2, 1.0, 0.0], [0.0, 0.0, 0.0]])
    b = soc_cut(setpoint).vec_b
    return (M[0, 0], M[1, 1], M[0, 1] + M[1, 0], b[0], b[1], setpoint * setpoint)


def _probe_coefficients(setpoint: float) -> tuple:
    # exact for quadratics evaluated on small integers
    f = lambda d, c: cylinder_value(d, c, setpoint)
    f0 = f(0, 0)
    dd = (f(1, 0) + f(-1, 0)) / 2 - f0
    cc = (f(0, 1) + f(0, -1)) / 2 - f0
    dc = f(1, 1) - f(1, 0) - f(0, 1) + f0
    d1 = (f(1, 0) - f(-1, 0)) / 2
    c1 = (f(0, 1) - f(0, -1)) / 2
    return (dd, cc, dc, d1, c1, f0)


for _ps in (-2.0, 0.0, 1.0, 3.0):
    assert _pencil_member(2.0, _ps) == _probe_coefficients(_ps) == quadratic_coefficients(_ps), \
        "cylinder is not the lambda=2 member of the pencil"
del _ps
