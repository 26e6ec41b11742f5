"""Command line interface: ``vaporqed {run,validate,plotdata,report}``.

Results layout (all paths relative to the output directory)::

    manifest.yaml          written once by the coordinator after all points
    point_000/summary.yaml per-point summary (scalars, warnings, error)
    point_000/<series>.dat columnar text, '#' header lines

Exit codes: 0 success, 1 config error, 2 runtime error, 3 partial sweep
failure.  ``VAPORQED_WORKERS`` sets the worker-pool size (default 1).
"""

from __future__ import annotations

import argparse
import datetime as _dt
import math
import os
import sys
import time
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import yaml

from . import __version__
from .config import RunConfig, config_from_dict, config_hash, dump_config, load_config, plan_points
from .errors import ConfigError
from .experiments import PointResult, Series, run_point

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME, EXIT_PARTIAL = 0, 1, 2, 3
MANIFEST = "manifest.yaml"
WORKERS_ENV = "VAPORQED_WORKERS"


@dataclass
class PointRecord:
    index: int
    overrides: dict
    status: str
    summary: dict = field(default_factory=dict)
    series: dict[str, Series] = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)
    error: Optional[str] = None

    @property
    def directory(self) -> str:
        return f"point_{self.index:03d}"


@dataclass
class ResultRecord:
    config: RunConfig
    points: list[PointRecord]
    version: str = __version__
    started: str = ""
    finished: str = ""
    wall_seconds: float = 0.0

    @property
    def config_hash(self) -> str:
        return config_hash(self.config)

    @property
    def failed(self) -> list[PointRecord]:
        return [p for p in self.points if p.status != "ok"]


# -- serialisation helpers --------------------------------------------------------------


def _plain(value):
    """Convert numpy scalars/arrays to YAML-safe Python values."""
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return _plain(value.tolist())
    if isinstance(value, np.generic):
        return value.item()
    return value


def _series_text(series: Series, header: list[str]) -> str:
    lines = [f"# {h}" for h in header]
    cols = " ".join(series.columns)
    if series.units:
        cols += "   [" + ", ".join(series.units) + "]"
    lines.append(f"# columns: {cols}")
    for row in np.atleast_2d(series.data):
        lines.append(" ".join(repr(float(x)) for x in row))
    return "\n".join(lines) + "\n"


def _read_series(path: Path) -> Series:
    columns: tuple[str, ...] = ()
    units: tuple[str, ...] = ()
    for line in path.read_text().splitlines():
        if line.startswith("# columns:"):
            spec = line[len("# columns:"):].strip()
            if "[" in spec:
                spec, unit_part = spec.split("[", 1)
                units = tuple(u.strip() for u in unit_part.rstrip("]").split(","))
            columns = tuple(spec.split())
    data = np.loadtxt(path, comments="#", ndmin=2)
    return Series(columns, data, units)


def _run_and_persist(args) -> PointRecord:
    index, overrides, point_cfg_data, out_dir, cfg_hash = args
    point_cfg = RunConfig.model_validate(point_cfg_data)
    record = PointRecord(index, overrides, "ok")
    pdir = Path(out_dir) / record.directory
    pdir.mkdir(parents=True, exist_ok=True)
    try:
        result: PointResult = run_point(point_cfg)
        record.summary = _plain(result.summary)
        record.series = result.series
        record.warnings = result.warnings
    except Exception as exc:  # one point's failure must not abort the sweep
        record.status = "failed"
        record.error = f"{type(exc).__name__}: {exc}"
        record.summary = {"traceback": traceback.format_exc()}
    for name, series in record.series.items():
        header = [f"vaporqed {__version__} series {name}", f"point {index} overrides {overrides}", f"config_sha256 {cfg_hash}"]
        (pdir / f"{name}.dat").write_text(_series_text(series, header))
    doc = {"index": index, "overrides": _plain(overrides), "status": record.status, "error": record.error,
           "warnings": record.warnings, "summary": record.summary, "series": sorted(record.series)}
    (pdir / "summary.yaml").write_text(yaml.safe_dump(doc, sort_keys=False))
    return record


def _worker_count(n_points: int) -> int:
    raw = os.environ.get(WORKERS_ENV)
    if raw is None:
        return 1
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from None
    return max(1, min(n, n_points))


def run(config: RunConfig, output_dir: Optional[str] = None) -> ResultRecord:
    """Execute every sweep point, persist per-point outputs and write the manifest."""
    out = Path(output_dir or config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    planned = plan_points(config)
    cfg_hash = config_hash(config)
    jobs = [(i, ov, pc.model_dump(mode="json"), str(out), cfg_hash) for i, (ov, pc) in enumerate(planned)]
    started = _dt.datetime.now(_dt.timezone.utc).isoformat()
    t0 = time.perf_counter()
    workers = _worker_count(len(jobs))
    if workers == 1:
        points = [_run_and_persist(job) for job in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            points = list(pool.map(_run_and_persist, jobs))
    record = ResultRecord(
        config=config,
        points=points,
        started=started,
        finished=_dt.datetime.now(_dt.timezone.utc).isoformat(),
        wall_seconds=time.perf_counter() - t0,
    )
    _write_manifest(record, out)
    return record


def _write_manifest(record: ResultRecord, out: Path) -> None:
    doc = {
        "format": "vaporqed-results/1",
        "software_version": record.version,
        "config_sha256": record.config_hash,
        "started": record.started,
        "finished": record.finished,
        "wall_seconds": record.wall_seconds,
        "config": record.config.model_dump(mode="json"),
        "points": [
            {"index": p.index, "directory": p.directory, "overrides": _plain(p.overrides), "status": p.status,
             "error": p.error, "summary": {k: v for k, v in p.summary.items() if k != "traceback"},
             "series": sorted(p.series)}
            for p in record.points
        ],
    }
    (out / MANIFEST).write_text(yaml.safe_dump(doc, sort_keys=False))


def load_record(result_dir) -> ResultRecord:
    result_dir = Path(result_dir)
    manifest = yaml.safe_load((result_dir / MANIFEST).read_text())
    config = config_from_dict(manifest["config"])
    points = []
    for entry in manifest["points"]:
        pdir = result_dir / entry["directory"]
        series = {name: _read_series(pdir / f"{name}.dat") for name in entry["series"]}
        points.append(PointRecord(entry["index"], entry["overrides"], entry["status"], entry["summary"], series,
                                  error=entry.get("error")))
    return ResultRecord(config, points, manifest["software_version"], manifest["started"], manifest["finished"],
                        manifest["wall_seconds"])


# -- plot data --------------------------------------------------------------------------

SUMMARY_SERIES = ("frequency_vs_sqrt_n2", "discrepancy_vs_detuning")


def available_series(record: ResultRecord) -> list[str]:
    names = set(SUMMARY_SERIES)
    for p in record.points:
        names.update(p.series)
        names.update(f"sweep:{k}" for k, v in p.summary.items() if isinstance(v, (int, float)))
    return sorted(names)


def _summary_table(record: ResultRecord, what: str) -> Series:
    ok = [p for p in record.points if p.status == "ok"]
    if what == "frequency_vs_sqrt_n2":
        rows = [(p.summary["n2"], math.sqrt(p.summary["n2"]), p.summary["measured_frequency"],
                 p.summary["analytic_frequency"], p.summary["frequency_uncertainty"])
                for p in ok if "n2" in p.summary and "measured_frequency" in p.summary]
        cols = ("n2", "sqrt_n2", "measured_omega", "analytic_omega", "uncertainty")
    elif what == "discrepancy_vs_detuning":
        rows = [(p.summary["detuning"], p.summary["discrepancy"]) for p in ok if "discrepancy" in p.summary]
        cols = ("detuning", "discrepancy")
    else:
        key = what.split(":", 1)[1]
        axes = [a.parameter for a in record.config.sweep]
        rows = [tuple(float(p.overrides[a]) for a in axes) + (float(p.summary[key]),) for p in ok if key in p.summary]
        cols = tuple(axes) + (key,)
    if not rows:
        raise KeyError(f"series {what!r} has no data in this record")
    return Series(cols, np.array(sorted(rows), dtype=float))


def emit_plotdata(record: ResultRecord, what: str, point: int = 0) -> str:
    """Columnar text for a per-point series or a sweep summary.

    Unknown names raise ``KeyError`` listing the available series.
    """
    names = available_series(record)
    if what not in names:
        raise KeyError(f"unknown series {what!r}; available: {', '.join(names)}")
    if what in SUMMARY_SERIES or what.startswith("sweep:"):
        series = _summary_table(record, what)
    else:
        matches = [p for p in record.points if p.index == point]
        if not matches or what not in matches[0].series:
            have = sorted(matches[0].series) if matches else []
            raise KeyError(f"point {point} has no series {what!r}; available there: {', '.join(have)}")
        series = matches[0].series[what]
    header = [
        f"vaporqed {record.version} plotdata {what}",
        f"config_sha256 {record.config_hash}",
        "units: times in 1/(angular frequency unit), frequencies in the config's angular frequency unit",
    ]
    return _series_text(series, header)


def format_report(record: ResultRecord) -> str:
    keys = ("measured_frequency", "analytic_frequency", "relative_error", "discrepancy", "absorbed_max",
            "leakage_max", "validity_pass", "charge_commutator_max")
    lines = [f"experiment: {record.config.experiment}   points: {len(record.points)}   "
             f"failed: {len(record.failed)}   config_sha256: {record.config_hash[:12]}"]
    for p in record.points:
        parts = [f"[{p.index:03d}] {p.status:6s}"]
        if p.overrides:
            parts.append(" ".join(f"{k}={v}" for k, v in p.overrides.items()))
        for k in keys:
            if k in p.summary:
                v = p.summary[k]
                parts.append(f"{k}={v:.6g}" if isinstance(v, float) else f"{k}={v}")
        if p.error:
            parts.append(f"error={p.error}")
        lines.append("  ".join(parts))
    return "\n".join(lines)


# -- entry point ------------------------------------------------------------------------


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="vaporqed", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"vaporqed {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    p = sub.add_parser("run", help="run an experiment or sweep")
    p.add_argument("config")
    p.add_argument("-o", "--output", help="output directory (overrides output_dir)")
    p = sub.add_parser("validate", help="check a config without running it")
    p.add_argument("config")
    p.add_argument("--dump", action="store_true", help="print the config with defaults applied")
    p = sub.add_parser("plotdata", help="emit columnar plot data from a results directory")
    p.add_argument("results")
    p.add_argument("series")
    p.add_argument("--point", type=int, default=0)
    p.add_argument("-o", "--output", help="write to file instead of stdout")
    p = sub.add_parser("report", help="print a summary table of a results directory")
    p.add_argument("results")
    return ap


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "validate":
            cfg = load_config(args.config)
            print(f"ok: {cfg.experiment}, {len(plan_points(cfg))} planned run(s)")
            if args.dump:
                print(dump_config(cfg), end="")
            return EXIT_OK
        if args.command == "run":
            cfg = load_config(args.config)
            record = run(cfg, args.output)
            print(format_report(record))
            if len(record.failed) == len(record.points):
                return EXIT_RUNTIME
            return EXIT_PARTIAL if record.failed else EXIT_OK
        if args.command == "plotdata":
            text = emit_plotdata(load_record(args.results), args.series, args.point)
            if args.output:
                Path(args.output).write_text(text)
            else:
                sys.stdout.write(text)
            return EXIT_OK
        if args.command == "report":
            print(format_report(load_record(args.results)))
            return EXIT_OK
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except KeyError as exc:
        print(f"error: {exc.args[0] if exc.args else exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
