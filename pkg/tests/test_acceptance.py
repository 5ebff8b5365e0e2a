"""Acceptance suite: one PASS/FAIL/SKIP line per criterion.

Run ``pytest tests/test_acceptance.py -v`` (lines appear in the summary) or
``python3 tests/test_acceptance.py`` (lines printed as they finish).
Criterion 9 needs converted public datasets; point ``STORAGECUTS_PUBLIC_DATA``
at the directory written by ``scripts/fetch_public_data.py``.
"""
import glob
import json
import os
import shutil
import time
from importlib import resources
from pathlib import Path

import numpy as np
import pytest

from conftest import rand_battery
from storagecuts.bench import ExperimentConfig, load_report, load_series, run_benchmark
from storagecuts.cli import main as bench_main
from storagecuts.cuts import gen_all_anchor_cuts, gen_u_cuts, gen_window_cuts, redundancy_filter, facet_certificate
from storagecuts.relax import EXACT_PRESETS, Instance, build_preset, solve, solve_enumerate, solve_explicit_z, solve_qp
from storagecuts.soc import cylinder_value, hull_decompose, soc_cut
from storagecuts.solvers.vertices import enumerate_vertices, unique_power_points
from storagecuts.submodular import WindowSpec, check_submodularity, eval_f_closed, eval_f_lp
from storagecuts.cuts import validate_cuts
from storagecuts.verify import pozo_dominance

RESULTS = []
DATA = Path(str(resources.files("storagecuts") / "data"))


def record(number, name, passed, detail, elapsed, limit=None, skipped=False):
    tag = "SKIP" if skipped else ("PASS" if passed else "FAIL")
    budget = f", limit {limit:g} s" if limit else ""
    line = f"CRITERION {number} {tag} {name}: {detail} [{elapsed:.1f} s{budget}]"
    RESULTS.append(line)
    print(line)
    if skipped:
        pytest.skip(detail)
    assert passed, line


def test_c1_submodularity():
    rng = np.random.default_rng(101)
    t0 = time.perf_counter()
    worst, windows = np.inf, 0
    for _ in range(200):
        T = int(rng.integers(1, 7))
        p = rand_battery(rng, T)
        length = int(rng.integers(1, min(5, T) + 1))
        start = int(rng.integers(1, T - length + 2))
        s_start = float(rng.choice([p.soc_min, p.soc_max, rng.uniform(p.soc_min, p.soc_max)]))
        rep = check_submodularity(WindowSpec(start, length, s_start, p))
        worst = min(worst, rep.min_margin)
        windows += 1
    elapsed = time.perf_counter() - t0
    record(1, "submodularity certificate", worst >= -1e-9 and elapsed < 60,
           f"{windows} windows, f/g/f_bar/g_bar, min margin {worst:.3g}", elapsed, 60)


def test_c2_closed_form_vs_lp():
    rng = np.random.default_rng(202)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(1000):
        T = int(rng.integers(1, 7))
        p = rand_battery(rng, T)
        length = int(rng.integers(1, T + 1))
        start = int(rng.integers(1, T - length + 2))
        win = WindowSpec(start, length, float(rng.uniform(p.soc_min, p.soc_max)), p)
        mask = int(rng.integers(0, 1 << length))
        worst = max(worst, abs(eval_f_closed(win, mask) - eval_f_lp(win, mask)))
    elapsed = time.perf_counter() - t0
    record(2, "closed form vs LP", worst <= 1e-9 and elapsed < 120,
           f"1000 draws, max error {worst:.3g}", elapsed, 120)


def test_c3_cut_validity():
    rng = np.random.default_rng(303)
    t0 = time.perf_counter()
    worst, n_cuts, n_points = -np.inf, 0, 0
    for k in range(50):
        p = rand_battery(rng, (2, 3, 4)[k % 3])
        cuts = gen_window_cuts(p) + gen_u_cuts(p) + gen_all_anchor_cuts(p)
        rep = validate_cuts(cuts, p, enumerate_vertices(p, keep_modes=True))
        worst = max(worst, rep.max_violation)
        n_cuts += rep.n_cuts
        n_points += rep.n_points
    elapsed = time.perf_counter() - t0
    record(3, "cut validity", worst <= 1e-8 and elapsed < 600,
           f"{n_cuts} window/anchor/u cuts over {n_points} vertex-mode pairs, max violation {worst:.3g}",
           elapsed, 600)


def test_c4_facet_certificates():
    rng = np.random.default_rng(404)
    t0 = time.perf_counter()
    misses, total = 0, 0
    for k in range(100):
        p = rand_battery(rng, (2, 3, 4)[k % 3], interior=True)
        vertices = enumerate_vertices(p)
        for cut in redundancy_filter(gen_window_cuts(p), p):
            total += 1
            misses += not facet_certificate(cut, p, vertices).passed
    # soc_init at a bound freezes period 1 and drops one dimension; report those separately
    short, rank_ok = 0, 0
    for k in range(60):
        p = rand_battery(rng, (2, 3, 4)[k % 3])
        if p.soc_init not in (p.soc_min, p.soc_max):
            continue
        vertices = enumerate_vertices(p)
        pts = unique_power_points(vertices)
        dim = int(np.linalg.matrix_rank(pts[1:] - pts[0], tol=1e-9))
        for cut in redundancy_filter(gen_window_cuts(p), p):
            cert = facet_certificate(cut, p, vertices)
            if not cert.passed:
                short += 1
                rank_ok += cert.affine_rank == dim - 1
    elapsed = time.perf_counter() - t0
    record(4, "facet certificates", misses == 0,
           f"{total - misses}/{total} non-redundant cuts tight at >= 2(tau_bar+1) vertices "
           f"(100 batteries, soc_init interior); soc_init at a bound: {short} cuts reach only "
           f"2 tau_bar+1, {rank_ok}/{short} of them span a face of rank dim-1", elapsed)


def test_c5_dominance():
    rng = np.random.default_rng(505)
    t0 = time.perf_counter()
    worst = max(pozo_dominance(rand_battery(rng, int(rng.integers(1, 9)))) for _ in range(100))
    elapsed = time.perf_counter() - t0
    record(5, "baseline dominance", worst <= 1e-8, f"100 batteries, max LP violation {worst:.3g}", elapsed)


def _negative_price_window(rng, prices, T):
    series = prices[int(rng.integers(len(prices)))]
    starts = [s for s in range(len(series) - T + 1) if (series[s:s + T] < 0).any()]
    s = int(rng.choice(starts)) if starts else 0
    return series[s:s + T]


def test_c6_relaxation_sandwich():
    rng = np.random.default_rng(606)
    prices = [load_series(f) for f in sorted(glob.glob(str(DATA / "prices" / "*.csv")))]
    t0 = time.perf_counter()
    worst_order, worst_enum = -np.inf, 0.0
    for _ in range(200):
        T = int(rng.integers(2, 11))
        p = rand_battery(rng, T)
        inst = Instance("scheduling", _negative_price_window(rng, prices, T))
        vals = [solve(build_preset(p, k, inst)).min_objective for k in ("HCHLP", "TLP", "TLPu", "MILP")]
        worst_order = max(worst_order, *(a - b for a, b in zip(vals, vals[1:])))
        ref = solve_enumerate(build_preset(p, "MILP", inst)).min_objective
        worst_enum = max(worst_enum, abs(ref - vals[-1]))
    elapsed = time.perf_counter() - t0
    record(6, "relaxation sandwich", worst_order <= 1e-6 and worst_enum <= 1e-6,
           f"200 instances T<=10, max order breach {worst_order:.3g}, B&B vs 2^T enumeration {worst_enum:.3g}",
           elapsed)


def test_c7_soc_algebra():
    rng = np.random.default_rng(707)
    t0 = time.perf_counter()
    pd, pc, ps = rng.uniform(0, 10, 100_000), rng.uniform(0, 10, 100_000), rng.uniform(-5, 5, 100_000)
    q = cylinder_value(pd, pc, ps)
    ident = float(np.abs(q - ((pd - pc - ps) ** 2 + 4 * pd * pc)).max() / max(1.0, np.abs(q).max()))
    worst_margin, disagree = 0.0, 0
    for k in range(100_000):
        z = q[k] + rng.uniform(-2, 2)
        lhs, rhs = soc_cut(ps[k]).norm_form(pd[k], pc[k], z)
        worst_margin = max(worst_margin, abs((rhs * rhs - lhs * lhs) - (z - q[k])) / max(1.0, abs(z), q[k]))
        disagree += (lhs <= rhs) != (z >= q[k])
    bad_hull = 0
    for k in range(10_000):
        z = q[k] + rng.exponential(1.0)
        combo = hull_decompose(z, pd[k], pc[k], ps[k]).combination()
        bad_hull += abs(combo[1] - pd[k]) > 1e-12 or abs(combo[2] - pc[k]) > 1e-12 or combo[0] > z + 1e-10
    elapsed = time.perf_counter() - t0
    record(7, "SOC algebra", ident <= 1e-12 and worst_margin <= 1e-10 and not disagree and not bad_hull,
           f"identity {ident:.2g}, norm-form margin {worst_margin:.2g}, {disagree} sign disagreements, "
           f"{bad_hull}/10000 hull failures", elapsed)


def test_c8_explicit_z_equivalence():
    rng = np.random.default_rng(808)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(20):
        p = rand_battery(rng, 4)
        model = build_preset(p, "TLPSOC", Instance("tracking", rng.uniform(-6, 6, 4)))
        obj, *_ = solve_explicit_z(model)
        worst = max(worst, abs(obj - solve_qp(model).objective))
    elapsed = time.perf_counter() - t0
    record(8, "explicit-z vs cylinder QP", worst <= 1e-7, f"20 T=4 instances, max gap {worst:.3g}", elapsed)


SCHEDULING_REF = {"HCHLP": (2.71, 24.98), "TLP": (1.73, 11.67), "TLPu": (0.75, 5.76)}
TRACKING_REF = {"HCHLP": (15.76, 104.44), "TLPSOC": (0.08, 0.04)}


def _compare(rows, table, rel):
    by = {r.formulation: r for r in rows}
    out, ok = [], True
    for name, (pct, prod) in table.items():
        r = by.get(name)
        if r is None:
            return False, f"preset {name} missing from report"
        good = abs(r.pct_hours_violated - pct) <= rel * pct and abs(r.mean_comp_product - prod) <= rel * prod
        ok &= good
        out.append(f"{name} {r.pct_hours_violated:.2f}% / {r.mean_comp_product:.2f} kW^2 (ref {pct}% / {prod})")
    return ok, "; ".join(out)


def test_c9_reference_numbers(tmp_path):
    t0 = time.perf_counter()
    root = os.environ.get("STORAGECUTS_PUBLIC_DATA")
    if not root:
        record(9, "reference-number reproduction", False,
               "needs the public datasets; set STORAGECUTS_PUBLIC_DATA (see scripts/fetch_public_data.py)",
               time.perf_counter() - t0, skipped=True)
    results = {}
    for name in ("scheduling", "tracking"):
        cfg = ExperimentConfig.from_json(Path(root) / f"{name}.json")
        cfg.timing = False
        results[name], _ = run_benchmark(cfg)
    ok1, d1 = _compare(results["scheduling"], SCHEDULING_REF, 0.15)
    by = {r.formulation: r.pct_hours_violated for r in results["scheduling"]}
    order = by.get("HCHLP", 0) > by.get("TLP", 0) > by.get("TLPu", 0)
    ok2, d2 = _compare(results["tracking"], TRACKING_REF, 0.25)
    record(9, "reference-number reproduction", ok1 and ok2 and order,
           f"scheduling ordering {'holds' if order else 'broken'}: {d1}. Tracking: {d2}. Timing not compared",
           time.perf_counter() - t0)


def _bundled(tmp_path):
    shutil.copytree(DATA, tmp_path / "data")
    return tmp_path / "data" / "configs"


def test_c10_bundled_smoke(tmp_path, monkeypatch, capsys):
    configs = _bundled(tmp_path)
    monkeypatch.chdir(tmp_path)
    t0 = time.perf_counter()
    codes = [bench_main(["run", "--config", str(configs / f"{n}.json")]) for n in ("scheduling", "tracking")]
    elapsed = time.perf_counter() - t0
    exact_hours = [r.pct_hours_violated for n in ("scheduling", "tracking")
                   for r in load_report(tmp_path / "reports" / f"{n}.csv") if r.formulation in EXACT_PRESETS]
    failures = sum(r.n_failures for n in ("scheduling", "tracking")
                   for r in load_report(tmp_path / "reports" / f"{n}.csv"))
    snapshots = []
    for _ in range(2):
        for n in ("scheduling", "tracking"):
            bench_main(["run", "--config", str(configs / f"{n}.json"), "--no-timing",
                        "--output", f"again/{n}.csv"])
        snapshots.append([(tmp_path / "again" / f).read_bytes() for f in
                          ("scheduling.csv", "scheduling.records.csv", "tracking.csv", "tracking.records.csv")])
    same_records = all((tmp_path / "reports" / f"{n}.records.csv").read_bytes()
                       == (tmp_path / "again" / f"{n}.records.csv").read_bytes() for n in ("scheduling", "tracking"))
    capsys.readouterr()
    deterministic = snapshots[0] == snapshots[1] and same_records
    record(10, "bundled-data smoke run", codes == [0, 0] and elapsed < 300 and deterministic
           and failures == 0 and all(h == 0 for h in exact_hours),
           f"timed run {elapsed:.0f} s, exit codes {codes}, {failures} failures, exact-preset violated hours "
           f"{exact_hours}, reruns {'byte-identical' if deterministic else 'differ'}", elapsed, 300)


def test_full_sweep_tlp_beats_hchlp(tmp_path):
    """The full 20-battery, 10-price sweep: TLP rows show strictly fewer violated hours."""
    configs = _bundled(tmp_path)
    data = json.loads((configs / "scheduling.json").read_text())
    data.update(battery_files=["../batteries.jsonl"], presets=["HCHLP", "TLP"], timing=False,
                output=str(tmp_path / "full.csv"))
    rows, records = run_benchmark(ExperimentConfig.from_dict(data, base_dir=configs))
    by = {r.formulation: r for r in rows}
    assert by["HCHLP"].n_instances == 200 and not any(r.n_failures for r in rows)
    assert by["TLP"].pct_hours_violated < by["HCHLP"].pct_hours_violated


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
