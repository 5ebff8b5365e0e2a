#!/usr/bin/env python3
"""Convert the public price, PV and battery datasets into bench inputs.

The raw files are downloaded by hand (the ENTSO-e Transparency Platform
needs a login; the household PV/battery database is a public repository).
This script only converts them:

  prices     ENTSO-e day-ahead export(s) -> prices/price_YYYY-MM-DD.csv
  netdemand  wide demand and per-unit PV tables -> netdemand/netdemand_XXX.csv
  batteries  battery table -> batteries.jsonl
  configs    write scheduling.json / tracking.json for the converted data

Afterwards point STORAGECUTS_PUBLIC_DATA at the output directory so the
acceptance suite runs the full-scale comparison.
"""
from __future__ import annotations

import argparse
import csv
import json
import re
from collections import defaultdict
from datetime import datetime
from pathlib import Path

import numpy as np

HOURS = 24
PV_KW = 35.0
DK1_NEGATIVE_DAYS = (
    "2023-07-02", "2024-01-01", "2024-06-02", "2024-06-08", "2024-06-09",
    "2024-06-15", "2024-06-16", "2024-06-28", "2024-07-04", "2024-07-07",
)
BATTERY_KEYS = ("p_dis_max", "p_ch_max", "soc_min", "soc_max", "eta_c", "eta_d", "delta", "soc_init")


def write_series(path: Path, values) -> None:
    lines = ["t,value"] + [f"{t},{v:.6g}" for t, v in enumerate(values, start=1)]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _find_column(header, pattern: str) -> int:
    for k, name in enumerate(header):
        if re.search(pattern, name, re.IGNORECASE):
            return k
    raise SystemExit(f"no column matching {pattern!r} in {header}")


def convert_prices(files, out: Path, days, time_col: str, price_col: str) -> None:
    """Hourly rows keyed by the start of the delivery interval (``dd.mm.yyyy HH:MM - ...``)."""
    by_day = defaultdict(list)
    for path in files:
        with open(path, encoding="utf-8-sig", newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            ti, pi = _find_column(header, time_col), _find_column(header, price_col)
            for row in reader:
                start = row[ti].split(" - ")[0].split(" (")[0].strip()
                try:
                    stamp = datetime.strptime(start, "%d.%m.%Y %H:%M")
                    price = float(row[pi])
                except ValueError:
                    continue
                by_day[stamp.date().isoformat()].append((stamp.hour, price))
    (out / "prices").mkdir(parents=True, exist_ok=True)
    for day in days:
        rows = sorted(by_day.get(day, []))
        if len(rows) < HOURS:
            raise SystemExit(f"{day}: {len(rows)} hourly prices found, need {HOURS}")
        hourly = {}
        for hour, price in rows:
            hourly.setdefault(hour, price)  # DST repeat keeps the first hour
        values = [hourly[h] for h in range(HOURS)]
        write_series(out / "prices" / f"price_{day}.csv", values)
    print(f"wrote {len(days)} price vectors")


def _wide_rows(path) -> np.ndarray:
    """Rows of a table holding one day per row; the last 24 numeric cells are the hours."""
    out = []
    with open(path, encoding="utf-8-sig", newline="") as fh:
        for row in csv.reader(fh):
            nums = []
            for cell in row:
                try:
                    nums.append(float(cell))
                except ValueError:
                    pass
            if len(nums) >= HOURS:
                out.append(nums[-HOURS:])
    return np.array(out)


def convert_netdemand(demand, pv, out: Path, count: int, pv_kw: float) -> None:
    d, p = _wide_rows(demand), _wide_rows(pv)
    n = min(count, len(p))
    if len(d) == 0 or n == 0:
        raise SystemExit("no 24-hour rows found")
    (out / "netdemand").mkdir(parents=True, exist_ok=True)
    for k in range(n):
        write_series(out / "netdemand" / f"netdemand_{k + 1:03d}.csv", d[k % len(d)] - pv_kw * p[k])
    print(f"wrote {n} net-demand profiles")


def convert_batteries(path, out: Path, mapping: dict) -> None:
    lines = []
    with open(path, encoding="utf-8-sig", newline="") as fh:
        for row in csv.DictReader(fh):
            item = {key: float(row[mapping.get(key, key)]) for key in BATTERY_KEYS}
            item["horizon"] = HOURS
            lines.append(json.dumps(item, sort_keys=True))
    out.mkdir(parents=True, exist_ok=True)
    (out / "batteries.jsonl").write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"wrote {len(lines)} batteries")


def write_configs(out: Path) -> None:
    common = {"battery_files": ["batteries.jsonl"], "threshold": 1e-4, "parallelism": 1,
              "format": "csv", "timing": True}
    configs = {
        "scheduling": dict(common, instance_files=["prices/price_*.csv"], problem="scheduling",
                           presets=["MILP", "HCHLP", "TLP", "TLPu"], output="reports/scheduling.csv"),
        "tracking": dict(common, instance_files=["netdemand/netdemand_*.csv"], problem="tracking",
                         presets=["MIQP", "HCHLP", "TLPSOC"], output="reports/tracking.csv"),
    }
    for name, cfg in configs.items():
        (out / f"{name}.json").write_text(json.dumps(cfg, indent=2) + "\n", encoding="utf-8")
    print("wrote scheduling.json and tracking.json")


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=Path, default=Path("public_data"))
    sub = ap.add_subparsers(dest="cmd", required=True)
    p = sub.add_parser("prices")
    p.add_argument("files", nargs="+", type=Path)
    p.add_argument("--days", nargs="+", default=list(DK1_NEGATIVE_DAYS))
    p.add_argument("--time-col", default=r"MTU")
    p.add_argument("--price-col", default=r"price")
    p = sub.add_parser("netdemand")
    p.add_argument("--demand", required=True, type=Path)
    p.add_argument("--pv", required=True, type=Path, help="per-unit PV, one day per row")
    p.add_argument("--count", type=int, default=200)
    p.add_argument("--pv-kw", type=float, default=PV_KW)
    p = sub.add_parser("batteries")
    p.add_argument("table", type=Path)
    p.add_argument("--map", nargs="*", default=[], metavar="KEY=COLUMN")
    sub.add_parser("configs")
    args = ap.parse_args(argv)

    if args.cmd == "prices":
        convert_prices(args.files, args.out, args.days, args.time_col, args.price_col)
    elif args.cmd == "netdemand":
        convert_netdemand(args.demand, args.pv, args.out, args.count, args.pv_kw)
    elif args.cmd == "batteries":
        convert_batteries(args.table, args.out, dict(m.split("=", 1) for m in args.map))
    else:
        write_configs(args.out)


if __name__ == "__main__":
    main()
