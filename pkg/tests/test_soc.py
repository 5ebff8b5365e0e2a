import csv

import numpy as np
import pytest

from storagecuts.battery import Trajectory
from storagecuts.soc import (
    QUAD_TERMS,
    SOC_CSV_COLUMNS,
    aggregate_cylinder_check,
    cylinder_value,
    export_soc_cuts_csv,
    hull_decompose,
    quadratic_coefficients,
    soc_cut,
)


@pytest.mark.parametrize("args,expected", [((0, 0, 1), 1.0), ((1, 1, 1), 5.0), ((2, 0, 1), 1.0)])
def test_cylinder_examples(args, expected):
    assert cylinder_value(*args) == expected


def test_cylinder_identity(rng):
    pd, pc, ps = rng.uniform(-5, 5, (3, 10_000))
    assert np.allclose(cylinder_value(pd, pc, ps), (pd - pc - ps) ** 2 + 4 * pd * pc, rtol=0, atol=1e-12)


def test_intersection_with_axis_planes(rng):
    p, ps = rng.uniform(0, 5, (2, 200))
    assert np.allclose(cylinder_value(p, 0.0, ps), (p - ps) ** 2)
    assert np.allclose(cylinder_value(0.0, p, ps), (p + ps) ** 2)


def test_cylinder_is_convex():
    # Hessian in (p_dis, p_ch) is [[2, 2], [2, 2]]
    assert np.linalg.eigvalsh(np.array([[2.0, 2.0], [2.0, 2.0]])).min() >= 0


def test_soc_cut_data():
    cut = soc_cut(1.0)
    assert np.array_equal(cut.vec_b, [-2.0, 2.0, -1.0]) and cut.scal_c == 1.0
    assert np.array_equal(cut.mat_a, [[1, 1, 0], [0, 0, 0], [0, 0, 0]])
    with pytest.raises(ValueError):
        cut.vec_b[0] = 0.0


def test_zero_setpoint_reduces_to_square(rng):
    cut = soc_cut(0.0)
    pd, pc = rng.uniform(0, 3, (2, 100))
    assert np.allclose(cylinder_value(pd, pc, 0.0), (pd + pc) ** 2)
    for d, c in zip(pd, pc):
        z = (d + c) ** 2
        assert cut.satisfied(d, c, z + 1e-9) and not cut.satisfied(d, c, z - 1e-3)


def test_norm_form_matches_epigraph(rng):
    for _ in range(2000):
        ps = rng.uniform(-5, 5)
        d, c = rng.uniform(0, 5, 2)
        z = cylinder_value(d, c, ps) + rng.uniform(-3, 3)
        lhs, rhs = soc_cut(ps).norm_form(d, c, z)
        q = cylinder_value(d, c, ps)
        # rhs^2 - lhs^2 = z - q, and rhs >= 0 on the epigraph
        assert rhs * rhs - lhs * lhs == pytest.approx(z - q, abs=1e-10 * max(1.0, abs(z), q))
        assert (lhs <= rhs) == (z >= q)


def test_quadratic_coefficients_reproduce_value(rng):
    for _ in range(50):
        ps, d, c = rng.uniform(-4, 4, 3)
        mono = (d * d, c * c, d * c, d, c, 1.0)
        assert np.dot(quadratic_coefficients(ps), mono) == pytest.approx(cylinder_value(d, c, ps))
    assert len(QUAD_TERMS) == 6


def test_hull_examples():
    h = hull_decompose(5.0, 1.0, 1.0, 1.0)
    assert h.lam == 0.5 and h.combination() == pytest.approx([5.0, 1.0, 1.0])
    h = hull_decompose(1.0, 2.0, 0.0, 1.0)
    assert h.lam == 1.0 and h.point_d == (1.0, 2.0, 0.0)
    h = hull_decompose(1.0, 0.0, 0.0, 1.0)
    assert h.lam == 1.0 and h.combination() == pytest.approx([1.0, 0.0, 0.0])


def test_hull_certificate_random(rng):
    for _ in range(2000):
        ps = rng.uniform(-5, 5)
        d, c = rng.uniform(0, 5, 2)
        z = cylinder_value(d, c, ps) + rng.exponential(1.0)
        h = hull_decompose(z, d, c, ps)
        combo = h.combination()
        assert 0 <= h.lam <= 1
        assert combo[1:] == pytest.approx([d, c], abs=1e-12)
        assert combo[0] <= z + 1e-10
        zd, p0d, _ = h.point_d
        zc, _, p0c = h.point_c
        assert zd == pytest.approx((p0d - ps) ** 2) and zc == pytest.approx((p0c + ps) ** 2)


def test_hull_rejects_bad_points():
    with pytest.raises(ValueError, match="below"):
        hull_decompose(0.5, 1.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        hull_decompose(5.0, -1.0, 1.0, 1.0)


def test_aggregate_check(rng):
    T = 6
    pd, pc, ps = rng.uniform(0, 3, T), rng.uniform(0, 3, T), rng.uniform(-3, 3, T)
    traj = Trajectory(pd, pc, np.zeros(T))
    q = cylinder_value(pd, pc, ps)
    assert aggregate_cylinder_check(traj, ps, z=q) == pytest.approx(q.sum())
    slack = q.copy()
    slack[2] += 1.0
    assert aggregate_cylinder_check(traj, ps, z=slack) < slack.sum()
    low = q.copy()
    low[0] -= 0.1
    with pytest.raises(ValueError):
        aggregate_cylinder_check(traj, ps, z=low)


def test_export_csv(tmp_path):
    path = tmp_path / "soc.csv"
    export_soc_cuts_csv([1.0, -0.5], path)
    rows = list(csv.reader(path.open()))
    assert tuple(rows[0]) == SOC_CSV_COLUMNS
    assert rows[1][:2] == ["1", "1.0"]
    assert [float(v) for v in rows[1][2:]] == list(quadratic_coefficients(1.0))
    assert [float(v) for v in rows[2][2:]] == list(quadratic_coefficients(-0.5))
