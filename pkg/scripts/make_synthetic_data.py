#!/usr/bin/env python3
"""Regenerate the bundled synthetic datasets under src/storagecuts/data.

* prices/price_XX.csv: 10 day-ahead price curves (EUR/MWh, 24 hours) with a
  midday solar dip that goes negative.
* netdemand/netdemand_XX.csv: 20 household net-demand profiles in kW
  (demand minus a 35 kW PV array), negative around noon on sunny days.
* batteries.jsonl: 20 battery configurations, one JSON object per line.
* batteries_bench.jsonl: every fourth battery, the subset the bundled
  configs sweep so a timed run fits on one core.
* configs/scheduling.json, configs/tracking.json: bundled experiments.

The output is fully determined by the seed.
"""
from __future__ import annotations

import argparse
import json
from pathlib import Path

import numpy as np

HOURS = 24
PV_KW = 35.0
BENCH_STRIDE = 4

CONFIGS = {
    "scheduling": {
        "battery_files": ["../batteries_bench.jsonl"],
        "instance_files": ["../prices/price_*.csv"],
        "problem": "scheduling",
        "presets": ["MILP", "HCHLP", "TLP", "TLPu"],
        "threshold": 1e-4,
        "output": "reports/scheduling.csv",
        "parallelism": 1,
        "format": "csv",
        "timing": True,
    },
    "tracking": {
        "battery_files": ["../batteries_bench.jsonl"],
        "instance_files": ["../netdemand/netdemand_0[1-4].csv"],
        "problem": "tracking",
        "presets": ["MIQP", "HCHLP", "TLP", "TLPSOC"],
        "threshold": 1e-4,
        "output": "reports/tracking.csv",
        "parallelism": 1,
        "format": "csv",
        "timing": True,
    },
}


def price_curve(rng: np.random.Generator) -> np.ndarray:
    h = np.arange(HOURS)
    base = rng.uniform(55, 90)
    peaks = 35 * np.exp(-((h - 8) / 2.0) ** 2) + 45 * np.exp(-((h - 19) / 2.5) ** 2)
    dip_depth = rng.uniform(base + 30, base + 120)
    dip = dip_depth * np.exp(-((h - 13) / rng.uniform(3.0, 5.0)) ** 2)
    noise = rng.normal(0, 6, HOURS)
    return np.round(base + peaks - dip + noise, 2)


def pv_per_unit(rng: np.random.Generator) -> np.ndarray:
    h = np.arange(HOURS)
    bell = np.clip(np.sin(np.pi * (h - 5.5) / 14.0), 0, None) ** 1.5
    clouds = np.clip(1 - rng.uniform(0, 0.6) * rng.random(HOURS), 0, 1)
    return bell * clouds * rng.uniform(0.5, 1.0)


def demand_profile(rng: np.random.Generator) -> np.ndarray:
    h = np.arange(HOURS)
    base = rng.uniform(0.3, 1.0)
    morning = rng.uniform(1, 4) * np.exp(-((h - 7.5) / 1.5) ** 2)
    evening = rng.uniform(2, 7) * np.exp(-((h - 19) / 2.0) ** 2)
    return base + morning + evening + rng.exponential(0.4, HOURS)


def battery(rng: np.random.Generator) -> dict:
    cap = float(np.round(rng.uniform(5, 40), 2))
    floor = float(np.round(rng.choice([0.0, 0.1 * cap]), 3))
    c_rate = rng.uniform(0.5, 2.0)
    return {
        "p_dis_max": float(np.round(cap * c_rate * rng.uniform(0.8, 1.2), 2)),
        "p_ch_max": float(np.round(cap * c_rate * rng.uniform(0.8, 1.2), 2)),
        "soc_min": floor,
        "soc_max": cap,
        "eta_c": float(np.round(rng.uniform(0.85, 0.98), 3)),
        "eta_d": float(np.round(rng.uniform(0.85, 0.98), 3)),
        "delta": 1.0,
        "soc_init": float(np.round(rng.uniform(floor, cap), 3)),
        "horizon": HOURS,
    }


def write_series(path: Path, values) -> None:
    lines = ["t,value"] + [f"{t},{v:.4f}" for t, v in enumerate(values, start=1)]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=Path,
                    default=Path(__file__).resolve().parents[1] / "src" / "storagecuts" / "data")
    ap.add_argument("--seed", type=int, default=20240602)
    args = ap.parse_args(argv)
    rng = np.random.default_rng(args.seed)

    (args.out / "prices").mkdir(parents=True, exist_ok=True)
    (args.out / "netdemand").mkdir(parents=True, exist_ok=True)
    for k in range(1, 11):
        write_series(args.out / "prices" / f"price_{k:02d}.csv", price_curve(rng))
    for k in range(1, 21):
        net = demand_profile(rng) - PV_KW * pv_per_unit(rng)
        write_series(args.out / "netdemand" / f"netdemand_{k:02d}.csv", net)
    lines = [json.dumps(battery(rng), sort_keys=True) + "\n" for _ in range(20)]
    (args.out / "batteries.jsonl").write_text("".join(lines), encoding="utf-8")
    (args.out / "batteries_bench.jsonl").write_text("".join(lines[::BENCH_STRIDE]), encoding="utf-8")
    (args.out / "configs").mkdir(exist_ok=True)
    for name, cfg in CONFIGS.items():
        (args.out / "configs" / f"{name}.json").write_text(json.dumps(cfg, indent=2) + "\n", encoding="utf-8")


if __name__ == "__main__":
    main()
