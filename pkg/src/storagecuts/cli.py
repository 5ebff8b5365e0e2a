"""``bench`` command line: run sweeps, export cuts, verify a battery.

Exit codes: 0 success, 1 bad config or input, 2 an instance or check failed.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .battery import ParameterError, load_battery_list
from .bench import ConfigError, ExperimentConfig, SeriesError, emit_records, emit_report, load_series, run_benchmark
from .cuts import export_cuts_csv, gen_pozo_cuts, gen_u_cuts, gen_window_cuts, redundancy_filter
from .soc import export_soc_cuts_csv

EXIT_OK, EXIT_CONFIG, EXIT_FAILED = 0, 1, 2

log = logging.getLogger("storagecuts")


def _battery(path, index: int, horizon=None):
    try:
        items = load_battery_list(path)
        params = items[index]
        if horizon is not None:
            params = params.replace(horizon=horizon)
    except (OSError, ParameterError, json.JSONDecodeError) as exc:
        raise ConfigError(f"{path}: {exc}") from None
    except IndexError:
        raise ConfigError(f"{path}: no battery at index {index}") from None
    return params


def cmd_run(args) -> int:
    cfg = ExperimentConfig.from_json(args.config)
    if args.output:
        cfg.output = args.output
    if args.format:
        cfg.format = args.format
    if args.no_timing:
        cfg.timing = False
    if args.parallelism:
        cfg.parallelism = args.parallelism
    cfg.__post_init__()
    rows, records = run_benchmark(cfg)
    out = emit_report(rows, cfg.output, cfg.format, cfg.threshold)
    detail = emit_records(records, out.with_name(out.stem + ".records.csv"))
    for r in records:
        if not r.ok:
            log.error("battery %d, %s, %s: %s", r.battery, r.instance, r.preset, r.error)
    failures = sum(not r.ok for r in records)
    print(f"wrote {out} and {detail} ({len(records)} solves, {failures} failures)")
    return EXIT_FAILED if failures else EXIT_OK


FAMILIES = {"window": gen_window_cuts, "u": gen_u_cuts, "pozo": gen_pozo_cuts}


def cmd_cuts(args) -> int:
    params = _battery(args.battery, args.index, args.horizon)
    cuts = FAMILIES[args.family](params)
    if args.family == "window" and not args.no_filter:
        cuts = redundancy_filter(cuts, params)
    export_cuts_csv(cuts, args.out)
    print(f"wrote {len(cuts)} {args.family} cuts to {args.out}")
    return EXIT_OK


def cmd_soc_cuts(args) -> int:
    try:
        setpoints = load_series(args.series)
    except (OSError, SeriesError) as exc:
        raise ConfigError(str(exc)) from None
    export_soc_cuts_csv(setpoints, args.out)
    print(f"wrote {len(setpoints)} cylinder cuts to {args.out}")
    return EXIT_OK


def cmd_verify(args) -> int:
    from .verify import run_checks

    params = _battery(args.battery, args.index, args.horizon)
    checks = run_checks(params)
    for c in checks:
        print(c.line())
    return EXIT_OK if all(c.passed for c in checks) else EXIT_FAILED


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="bench", description="Storage cut generation and relaxation benchmarks.")
    ap.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="sweep a JSON experiment config and write a report")
    p.add_argument("--config", required=True, type=Path)
    p.add_argument("--output", help="report path (overrides the config)")
    p.add_argument("--format", choices=("csv", "markdown"))
    p.add_argument("--parallelism", type=int)
    p.add_argument("--no-timing", action="store_true", help="solve once and omit time columns")
    p.set_defaults(func=cmd_run)

    def battery_args(p):
        p.add_argument("--battery", required=True, type=Path, help="JSON, JSON list or JSON lines")
        p.add_argument("--index", type=int, default=0, help="battery to use from a multi-battery file")
        p.add_argument("--horizon", type=int, help="override the battery horizon")

    p = sub.add_parser("cuts", help="export a linear cut family as CSV")
    battery_args(p)
    p.add_argument("--family", required=True, choices=sorted(FAMILIES))
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--no-filter", action="store_true", help="keep redundant window cuts")
    p.set_defaults(func=cmd_cuts)

    p = sub.add_parser("soc-cuts", help="export per-period cylinder cuts for a setpoint series")
    p.add_argument("--series", required=True, type=Path)
    p.add_argument("--out", required=True, type=Path)
    p.set_defaults(func=cmd_soc_cuts)

    p = sub.add_parser("verify", help="run the property and certificate checks")
    battery_args(p)
    p.set_defaults(func=cmd_verify)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
