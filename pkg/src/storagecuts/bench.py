"""Experiment harness: sweep batteries and instances over model presets.

A config is a JSON object::

    {
      "battery_files": ["batteries.jsonl"],
      "instance_files": ["prices/*.csv"],
      "problem": "scheduling",
      "presets": ["MILP", "HCHLP", "TLP", "TLPu"],
      "threshold": 1e-4,
      "output": "reports/scheduling.csv",
      "parallelism": 1,
      "format": "csv",
      "timing": true
    }

Input paths are resolved against the config file's directory and may be
glob patterns (expanded in sorted order).  The output path is resolved
against the working directory.

Rows aggregate over every (battery, instance) pair.  The share of violated
hours counts periods with ``p_ch * p_dis`` above the threshold over all
simulated hours; the mean product is the per-instance total
``sum(p_ch * p_dis)`` averaged over instances; the time delta is the
percentage reduction of the mean solve time against the exact preset.
Timings are the median of three solves and are the only nondeterministic
output; with ``timing`` off every solve runs once and the time columns
read ``n/a``, so reports are byte-identical across reruns.
"""
from __future__ import annotations

import csv
import glob
import json
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Optional

import numpy as np

from .battery import ParameterError, load_battery_list, violation_metrics
from .relax import (
    EXACT_PRESETS,
    SCHEDULING_PRESETS,
    TRACKING_PRESETS,
    Instance,
    build_preset,
    solve,
)

PROBLEMS = {"scheduling": SCHEDULING_PRESETS, "tracking": TRACKING_PRESETS}
DEFAULT_THRESHOLD = 1e-4
TIMING_REPEATS = 3
NA = "n/a"


class ConfigError(ValueError):
    pass


class SeriesError(ValueError):
    pass


# ---------------------------------------------------------------------------
# inputs


def load_series(path, horizon: Optional[int] = None) -> np.ndarray:
    """Read a ``t,value`` CSV with contiguous 1-based periods."""
    path = Path(path)
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or [c.strip() for c in rows[0]] != ["t", "value"]:
        raise SeriesError(f"{path}: header must be 't,value'")
    values = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != 2:
            raise SeriesError(f"{path}:{lineno}: malformed row {row!r}")
        try:
            t = int(row[0])
            v = float(row[1])
        except ValueError:
            raise SeriesError(f"{path}:{lineno}: malformed row {row!r}") from None
        if not np.isfinite(v):
            raise SeriesError(f"{path}:{lineno}: non-finite value")
        expected = len(values) + 1
        if t != expected:
            if t > expected:
                raise SeriesError(f"{path}: gap at period {expected}")
            raise SeriesError(f"{path}:{lineno}: period {t} out of order")
        values.append(v)
    if not values:
        raise SeriesError(f"{path}: no data rows")
    if horizon is not None and len(values) != horizon:
        raise SeriesError(f"{path}: {len(values)} periods, battery horizon is {horizon}")
    return np.array(values)


@dataclass
class ExperimentConfig:
    battery_files: list
    instance_files: list
    problem: str
    presets: list
    output: str
    threshold: float = DEFAULT_THRESHOLD
    parallelism: int = 1
    format: str = "csv"
    timing: bool = True
    base_dir: Path = field(default=Path("."), repr=False)

    def __post_init__(self):
        if self.problem not in PROBLEMS:
            raise ConfigError(f"problem must be one of {sorted(PROBLEMS)}")
        if not self.presets:
            raise ConfigError("at least one preset is needed")
        bad = [p for p in self.presets if p not in PROBLEMS[self.problem]]
        if bad:
            raise ConfigError(f"presets {bad} do not apply to {self.problem} problems")
        if len(set(self.presets)) != len(self.presets):
            raise ConfigError("duplicate presets")
        if not self.threshold > 0:
            raise ConfigError("threshold must be positive")
        if int(self.parallelism) < 1:
            raise ConfigError("parallelism must be at least 1")
        if self.format not in ("csv", "markdown"):
            raise ConfigError("format must be 'csv' or 'markdown'")
        if not self.battery_files or not self.instance_files:
            raise ConfigError("battery_files and instance_files must be nonempty")

    @classmethod
    def from_dict(cls, data: dict, base_dir=".") -> "ExperimentConfig":
        known = {f.name for f in fields(cls)} - {"base_dir"}
        extra = sorted(set(data) - known)
        if extra:
            raise ConfigError(f"unknown config fields: {', '.join(extra)}")
        missing = [k for k in ("battery_files", "instance_files", "problem", "presets", "output")
                   if k not in data]
        if missing:
            raise ConfigError(f"missing config fields: {', '.join(missing)}")
        return cls(**data, base_dir=Path(base_dir))

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        path = Path(path)
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"{path}: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: config must be a JSON object")
        return cls.from_dict(data, base_dir=path.resolve().parent)

    def _expand(self, patterns) -> list:
        out = []
        for pattern in patterns:
            full = self.base_dir / pattern
            hits = sorted(glob.glob(str(full)))
            if not hits:
                raise ConfigError(f"no file matches {pattern!r}")
            out += [Path(h) for h in hits]
        return out

    def batteries(self) -> list:
        out = []
        for path in self._expand(self.battery_files):
            try:
                out += load_battery_list(path)
            except (ParameterError, json.JSONDecodeError, OSError) as exc:
                raise ConfigError(f"{path}: {exc}") from None
        return out

    def instances(self) -> list:
        kind = self.problem
        out = []
        for path in self._expand(self.instance_files):
            try:
                out.append(Instance(kind, load_series(path), path.stem))
            except (SeriesError, OSError) as exc:
                raise ConfigError(str(exc)) from None
        return out


# ---------------------------------------------------------------------------
# sweep


@dataclass
class Record:
    battery: int
    instance: str
    preset: str
    status: str
    objective: float
    hours: int
    violated_hours: int
    comp_product: float
    time_ms: float
    error: str = ""

    @property
    def ok(self) -> bool:
        return self.status == "optimal"


def _run_one(args) -> list:
    bi, params, inst, presets, threshold, repeats = args
    out = []
    for preset in presets:
        try:
            model = build_preset(params, preset, inst)
            times = []
            for _ in range(repeats):
                rep = solve(model)
                times.append(rep.wall_time_ms)
            if not rep.optimal:
                out.append(Record(bi, inst.name, preset, rep.status, np.nan, params.horizon,
                                  0, np.nan, np.nan, f"solver status {rep.status}"))
                continue
            count, total = violation_metrics(rep.trajectory, threshold)
            out.append(Record(bi, inst.name, preset, rep.status, rep.objective, params.horizon,
                              count, total, statistics.median(times)))
        except Exception as exc:  # a failed instance must not abort the sweep
            out.append(Record(bi, inst.name, preset, "error", np.nan, params.horizon,
                              0, np.nan, np.nan, f"{type(exc).__name__}: {exc}"))
    return out


def sweep(config: ExperimentConfig) -> list:
    """Solve every (battery, instance, preset) triple; returns records in input order."""
    batteries = config.batteries()
    instances = config.instances()
    for b in batteries:
        for inst in instances:
            if len(inst.values) != b.horizon:
                raise ConfigError(f"instance {inst.name} has {len(inst.values)} periods, "
                                  f"battery horizon is {b.horizon}")
    repeats = TIMING_REPEATS if config.timing else 1
    jobs = [(bi, b, inst, list(config.presets), config.threshold, repeats)
            for bi, b in enumerate(batteries) for inst in instances]
    if int(config.parallelism) > 1:
        with ProcessPoolExecutor(max_workers=int(config.parallelism)) as pool:
            chunks = list(pool.map(_run_one, jobs))
    else:
        chunks = [_run_one(job) for job in jobs]
    return [rec for chunk in chunks for rec in chunk]


@dataclass
class BenchRow:
    formulation: str
    pct_hours_violated: float
    mean_comp_product: float
    delta_time_pct: Optional[float]
    mean_obj: float
    n_instances: int
    n_hours: int
    n_failures: int
    mean_time_ms: Optional[float]


REPORT_COLUMNS = tuple(f.name for f in fields(BenchRow))
DISPLAY_NAMES = {"HCHLP": "HCH-LP", "TLPu": "TLP+u", "TLPSOC": "TLP+SOC"}


def aggregate(records: list, presets, timing: bool = True) -> list:
    rows = []
    mean_time = {}
    for preset in presets:
        recs = [r for r in records if r.preset == preset]
        good = [r for r in recs if r.ok]
        hours = sum(r.hours for r in good)
        mean_time[preset] = float(np.mean([r.time_ms for r in good])) if good and timing else None
        rows.append(BenchRow(
            formulation=preset,
            pct_hours_violated=100.0 * sum(r.violated_hours for r in good) / hours if hours else float("nan"),
            mean_comp_product=float(np.mean([r.comp_product for r in good])) if good else float("nan"),
            delta_time_pct=None,
            mean_obj=float(np.mean([r.objective for r in good])) if good else float("nan"),
            n_instances=len(recs),
            n_hours=hours,
            n_failures=len(recs) - len(good),
            mean_time_ms=mean_time[preset],
        ))
    exact = next((p for p in presets if p in EXACT_PRESETS), None)
    if timing and exact is not None and mean_time.get(exact):
        base = mean_time[exact]
        for row in rows:
            if row.mean_time_ms is not None:
                row.delta_time_pct = 100.0 * (base - row.mean_time_ms) / base
    return rows


def run_benchmark(config: ExperimentConfig):
    """Returns ``(rows, records)``."""
    records = sweep(config)
    return aggregate(records, config.presets, config.timing), records


# ---------------------------------------------------------------------------
# reports


def _fmt(value) -> str:
    if value is None:
        return NA
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, str):
        return value
    return f"{float(value):.10g}"


def emit_report(rows, path, fmt: str = "csv", threshold: float = DEFAULT_THRESHOLD) -> Path:
    if not rows:
        raise ValueError("no rows to report")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if fmt == "csv":
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(REPORT_COLUMNS)
            for row in rows:
                writer.writerow([_fmt(getattr(row, c)) for c in REPORT_COLUMNS])
    elif fmt == "markdown":
        head = ("| Formulation | #[p_c p_d > %g] (%%) | p_c . p_d (kW^2) | Delta Time (%%, this solver) |"
                % threshold)
        lines = [head, "|---|---:|---:|---:|"]
        for row in rows:
            name = DISPLAY_NAMES.get(row.formulation, row.formulation)
            delta = NA if row.delta_time_pct is None else f"{row.delta_time_pct:.2f}"
            lines.append(f"| {name} | {row.pct_hours_violated:.2f} | {row.mean_comp_product:.2f} | {delta} |")
        lines.append("")
        lines.append(f"Instances per row: {rows[0].n_instances}; failures: "
                     + ", ".join(f"{r.formulation}={r.n_failures}" for r in rows))
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    else:
        raise ValueError(f"unknown report format {fmt!r}")
    return path


def _parse(value: str, kind):
    if value == NA:
        return None
    return kind(value)


def load_report(path) -> list:
    """Parse a CSV report written by ``emit_report``."""
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != REPORT_COLUMNS:
            raise ValueError(f"{path}: unexpected report columns {header}")
        rows = []
        for rec in reader:
            d = dict(zip(header, rec))
            rows.append(BenchRow(
                formulation=d["formulation"],
                pct_hours_violated=float(d["pct_hours_violated"]),
                mean_comp_product=float(d["mean_comp_product"]),
                delta_time_pct=_parse(d["delta_time_pct"], float),
                mean_obj=float(d["mean_obj"]),
                n_instances=int(d["n_instances"]),
                n_hours=int(d["n_hours"]),
                n_failures=int(d["n_failures"]),
                mean_time_ms=_parse(d["mean_time_ms"], float),
            ))
    return rows


RECORD_COLUMNS = ("battery", "instance", "preset", "status", "objective", "hours",
                  "violated_hours", "comp_product", "error")


def emit_records(records, path) -> Path:
    """Per-instance detail (no timings, so the file is deterministic)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(RECORD_COLUMNS)
        for r in records:
            writer.writerow([_fmt(getattr(r, c)) for c in RECORD_COLUMNS])
    return path
