"""Randomized properties driven by hypothesis."""
import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import rand_battery
from storagecuts.battery import membership, simulate_soc
from storagecuts.cuts import gen_all_anchor_cuts, gen_pozo_cuts, gen_u_cuts, gen_window_cuts
from storagecuts.relax import Instance, build_preset, solve
from storagecuts.soc import cylinder_value, hull_decompose

seeds = st.integers(min_value=0, max_value=2**32 - 1)


def random_member(rng, params):
    """A point of P: one mode per period, power drawn within what the SoC allows."""
    T = params.horizon
    pc, pd, u = np.zeros(T), np.zeros(T), np.zeros(T)
    s = params.soc_init
    for t in range(T):
        if rng.random() < 0.5:
            room = max(0.0, (params.soc_max - s) / (params.delta * params.eta_c))
            pc[t] = min(params.p_ch_max, room) * rng.choice([rng.random(), 1.0])
            s += params.delta * params.eta_c * pc[t]
            u[t] = 1.0
        else:
            room = max(0.0, (s - params.soc_min) * params.eta_d / params.delta)
            pd[t] = min(params.p_dis_max, room) * rng.choice([rng.random(), 1.0])
            s -= params.delta * pd[t] / params.eta_d
    return pc, pd, u


@settings(max_examples=60, deadline=None)
@given(seed=seeds, horizon=st.integers(1, 6))
def test_members_satisfy_every_cut(seed, horizon):
    rng = np.random.default_rng(seed)
    p = rand_battery(rng, horizon)
    cuts = gen_window_cuts(p) + gen_u_cuts(p) + gen_pozo_cuts(p) + gen_all_anchor_cuts(p)
    for _ in range(5):
        pc, pd, u = random_member(rng, p)
        assert membership(p, simulate_soc(p, pd, pc).with_mode(u), "P01").member
        scale = max(1.0, p.p_ch_max, p.p_dis_max)
        assert all(c.violation(pc, pd, u) <= 1e-8 * scale for c in cuts)


@settings(max_examples=25, deadline=None)
@given(seed=seeds, horizon=st.integers(2, 6))
def test_scheduling_sandwich(seed, horizon):
    rng = np.random.default_rng(seed)
    p = rand_battery(rng, horizon)
    inst = Instance("scheduling", rng.uniform(-80, 80, horizon))
    vals = [solve(build_preset(p, k, inst)).min_objective for k in ("HCHLP", "TLP", "TLPu", "MILP")]
    assert all(a <= b + 1e-6 for a, b in zip(vals, vals[1:]))


@settings(max_examples=200, deadline=None)
@given(d=st.floats(0, 50), c=st.floats(0, 50), ps=st.floats(-50, 50), slack=st.floats(0, 100))
def test_cylinder_epigraph_points_decompose(d, c, ps, slack):
    q = cylinder_value(d, c, ps)
    assert q >= (d - c - ps) ** 2 - 1e-9 * max(1.0, q)
    h = hull_decompose(q + slack, d, c, ps)
    combo = h.combination()
    assert abs(combo[1] - d) <= 1e-9 * max(1.0, d) and abs(combo[2] - c) <= 1e-9 * max(1.0, c)
    assert combo[0] <= q + slack + 1e-9 * max(1.0, q + slack)
