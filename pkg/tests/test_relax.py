import numpy as np
import pytest

from conftest import b1, rand_battery
from storagecuts.cuts import CutFamily, LinearCut, gen_all_anchor_cuts, gen_u_cuts, gen_window_cuts
from storagecuts.relax import (
    ModelError,
    Objective,
    Instance,
    RelaxationModel,
    build_preset,
    recheck,
    solve,
    solve_bb,
    solve_enumerate,
    solve_explicit_z,
    solve_lp,
    solve_qp,
)
from storagecuts.solvers.simplex import INFEASIBLE, ITER_LIMIT


def scheduling(p, prices):
    return Instance("scheduling", np.asarray(prices, dtype=float))


def tracking(p, setpoints):
    return Instance("tracking", np.asarray(setpoints, dtype=float))


def test_arbitrage_example():
    p = b1(horizon=2)
    rep = solve(build_preset(p, "MILP", scheduling(p, [-10, 50])))
    assert rep.optimal and rep.objective == pytest.approx(300)
    assert rep.trajectory.p_ch == pytest.approx([5, 0]) and rep.trajectory.p_dis == pytest.approx([0, 5])
    assert rep.min_objective == pytest.approx(-300)


def test_equal_prices_with_losses_do_nothing():
    p = b1(horizon=4, eta_c=0.9, eta_d=0.9)
    for preset in ("MILP", "TLPu"):
        assert solve(build_preset(p, preset, scheduling(p, [20.0] * 4))).objective == pytest.approx(0, abs=1e-9)


def test_max_charge_over_relaxed_set():
    p = b1()
    model = RelaxationModel(p, Objective.linear([-1.0, 0.0, 0.0]), has_u=True, soc_chain=True)
    assert solve_lp(model).objective == pytest.approx(5)


def test_contradictory_bounds_infeasible():
    p = b1()
    cut = LinearCut({1: -1.0}, {}, -20.0, CutFamily.WindowCharge)
    assert solve_lp(RelaxationModel(p, Objective.linear([1.0, 1.0, 1.0]), (cut,))).status == INFEASIBLE
    model = RelaxationModel(p, Objective.linear([1.0, 1.0, 1.0]), (cut,), has_u=True, integer_u=True, soc_chain=True)
    assert solve(model).status == INFEASIBLE


def test_zero_setpoints_track_perfectly():
    p = b1(horizon=3, soc_init=2.5)
    for preset in ("MIQP", "HCHLP", "TLP", "TLPu", "TLPSOC"):
        rep = solve(build_preset(p, preset, tracking(p, [0.0] * 3)))
        assert rep.objective == pytest.approx(0, abs=1e-9)
        assert rep.trajectory.p_ch == pytest.approx(0, abs=1e-7)


def test_reachable_setpoints_track_perfectly():
    p = b1(horizon=3, soc_init=2.5)
    rep = solve(build_preset(p, "MIQP", tracking(p, [2.0, -3.0, 0.0])))
    assert rep.objective == pytest.approx(0, abs=1e-9)
    assert rep.trajectory.soc == pytest.approx([0.5, 3.5, 3.5])


def test_relaxation_sandwich(rng):
    for _ in range(15):
        T = int(rng.integers(2, 7))
        p = rand_battery(rng, T)
        inst = scheduling(p, rng.uniform(-60, 90, T))
        vals = [solve(build_preset(p, k, inst)).min_objective for k in ("HCHLP", "TLP", "TLPu", "MILP")]
        assert all(a <= b + 1e-6 for a, b in zip(vals, vals[1:])), vals


def test_soc_objective_dominates_hull_baseline(rng):
    for _ in range(10):
        T = int(rng.integers(2, 6))
        p = rand_battery(rng, T)
        inst = tracking(p, rng.uniform(-6, 6, T))
        hch = solve(build_preset(p, "HCHLP", inst)).objective
        soc = solve(build_preset(p, "TLPSOC", inst)).objective
        exact = solve(build_preset(p, "MIQP", inst)).objective
        assert hch <= soc + 1e-7 <= exact + 2e-7


def test_valid_cuts_leave_milp_optimum(rng):
    for _ in range(8):
        T = int(rng.integers(2, 5))
        p = rand_battery(rng, T)
        model = build_preset(p, "MILP", scheduling(p, rng.uniform(-60, 90, T)))
        cuts = gen_window_cuts(p) + gen_u_cuts(p) + gen_all_anchor_cuts(p)
        base = solve_bb(model, strengthen=False).objective
        assert solve_bb(model.with_cuts(cuts), strengthen=False).objective == pytest.approx(base, abs=1e-6)


def test_bnb_agrees_with_enumeration(rng):
    for kind in ("MILP", "MIQP"):
        for _ in range(8):
            T = int(rng.integers(2, 6))
            p = rand_battery(rng, T)
            vals = rng.uniform(-60, 90, T) if kind == "MILP" else rng.uniform(-6, 6, T)
            inst = scheduling(p, vals) if kind == "MILP" else tracking(p, vals)
            model = build_preset(p, kind, inst)
            ref = solve_enumerate(model).objective
            assert solve_bb(model).objective == pytest.approx(ref, abs=1e-6)
            assert solve_bb(model, fallback=False, strengthen=False).objective == pytest.approx(ref, abs=1e-6)


def test_bnb_node_limit_reports_iter_limit(rng):
    p = rand_battery(rng, 6)
    model = build_preset(p, "MIQP", tracking(p, rng.uniform(-6, 6, 6)))
    assert solve_bb(model, node_limit=1, strengthen=False).status == ITER_LIMIT


def test_recheck(rng):
    p = rand_battery(rng, 4)
    inst = scheduling(p, rng.uniform(-60, 90, 4))
    exact = build_preset(p, "MILP", inst)
    assert recheck(exact, solve(exact)).member
    relaxed = build_preset(p, "TLP", inst)
    assert recheck(relaxed, solve(relaxed))
    with pytest.raises(ValueError):
        bad = build_preset(p, "TLP", inst).with_cuts([LinearCut({1: -1.0}, {}, -1e3, CutFamily.WindowCharge)])
        recheck(bad, solve(bad))


def test_explicit_z_matches_cylinder_qp(rng):
    pytest.importorskip("cvxpy")
    for _ in range(5):
        p = rand_battery(rng, 4)
        model = build_preset(p, "TLPSOC", tracking(p, rng.uniform(-6, 6, 4)))
        obj, *_ = solve_explicit_z(model)
        assert obj == pytest.approx(solve_qp(model).objective, abs=1e-6)


def test_model_errors():
    p = b1()
    with pytest.raises(ModelError):
        build_preset(p, "MIQP", scheduling(p, [1.0, 2.0, 3.0]))
    with pytest.raises(ModelError):
        build_preset(p, "MILP", tracking(p, [1.0, 2.0, 3.0]))
    with pytest.raises(ModelError):
        build_preset(p, "TLP", scheduling(p, [1.0, 2.0]))
    with pytest.raises(ModelError):
        build_preset(p, "LP", scheduling(p, [1.0, 2.0, 3.0]))
    with pytest.raises(ModelError):
        RelaxationModel(p, Objective.linear([1.0, 2.0, 3.0]), integer_u=True)
    with pytest.raises(ModelError):
        RelaxationModel(p, Objective.linear([1.0, 2.0, 3.0]), (LinearCut({4: 1.0}, {}, 1.0, CutFamily.WindowCharge),))
    with pytest.raises(ModelError):
        Objective("tracking", np.zeros(3), "max")
    with pytest.raises(ModelError):
        Instance("pricing", np.zeros(3))
    with pytest.raises(ModelError):
        solve_bb(build_preset(p, "TLP", scheduling(p, [1.0, 2.0, 3.0])))
