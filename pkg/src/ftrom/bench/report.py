"""CSV tables and plot-ready curve files."""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Iterable, Sequence

from .experiments import Failure, RunReport, ScenarioRun

REPORT_HEADER = ("scenario", "method", "rank", "sample_fraction", "offline_err", "online_err", "proj_err",
                 "t_fom_s", "t_rom_s", "speedup")
TIMING_COLUMNS = ("t_fom_s", "t_rom_s", "speedup")
FAILURE_HEADER = ("scenario", "method", "rank", "sample_fraction", "stage", "error")


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        if math.isnan(v):
            return ""
        return repr(v)
    return str(v)


def report_rows(reports: Iterable[RunReport], include_timing: bool = True) -> list:
    cols = [c for c in REPORT_HEADER if include_timing or c not in TIMING_COLUMNS]
    rows = []
    for r in sorted(reports, key=lambda r: (r.scenario, r.method, r.rank, r.sample_fraction)):
        rows.append([_fmt(getattr(r, c)) for c in cols])
    return [cols] + rows


def write_csv(path, rows: Sequence[Sequence]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        for row in rows:
            w.writerow(row)
    return path


def write_report(reports: Iterable[RunReport], path, include_timing: bool = True) -> Path:
    return write_csv(path, report_rows(reports, include_timing))


def write_failures(failures: Iterable[Failure], path) -> Path:
    rows = [FAILURE_HEADER] + [[_fmt(getattr(f, c)) for c in FAILURE_HEADER] for f in failures]
    return write_csv(path, rows)


def error_vs_rank_rows(reports: Iterable[RunReport]) -> list:
    head = ["scenario", "method", "sample_fraction", "rank", "offline_err", "online_err", "proj_err"]
    rows = [head]
    for r in sorted(reports, key=lambda r: (r.scenario, r.method, r.sample_fraction, r.rank)):
        rows.append([r.scenario, r.method, _fmt(r.sample_fraction), r.rank,
                     _fmt(r.offline_err), _fmt(r.online_err), _fmt(r.proj_err)])
    return rows


def error_vs_cpu_rows(reports: Iterable[RunReport]) -> list:
    head = ["scenario", "method", "rank", "sample_fraction", "t_rom_s", "online_err", "t_fom_s", "evals_per_rhs"]
    rows = [head]
    for r in sorted(reports, key=lambda r: (r.scenario, r.method, r.rank, r.sample_fraction)):
        if math.isnan(r.t_rom_s):
            continue
        rows.append([r.scenario, r.method, r.rank, _fmt(r.sample_fraction), _fmt(r.t_rom_s),
                     _fmt(r.online_err), _fmt(r.t_fom_s), _fmt(r.extra.get("evals_per_rhs"))])
    return rows


def curve_rows(points: Sequence[dict]) -> list:
    if not points:
        return [[]]
    head = list(points[0].keys())
    return [head] + [[_fmt(p[k]) for k in head] for p in points]


def write_run(run: ScenarioRun, out_dir) -> dict:
    """Write ``report.csv``, ``failures.csv`` and plot-ready curve files.

    Returns the written paths keyed by name.
    """
    out = Path(out_dir)
    sid = run.scenario.id
    paths = {"report": write_report(run.reports, out / f"{sid}_report.csv")}
    if run.failures:
        paths["failures"] = write_failures(run.failures, out / f"{sid}_failures.csv")
    if run.reports:
        paths["error_vs_rank"] = write_csv(out / f"{sid}_error_vs_rank.csv", error_vs_rank_rows(run.reports))
        cpu = error_vs_cpu_rows(run.reports)
        if len(cpu) > 1:
            paths["error_vs_cpu"] = write_csv(out / f"{sid}_error_vs_cpu.csv", cpu)
    for name, pts in run.curves.items():
        paths[name] = write_csv(out / f"{sid}_{name}.csv", curve_rows(pts))
    extras = {f"{r.method}/r{r.rank}/mp{r.sample_fraction:g}": r.extra for r in run.reports}
    (out / f"{sid}_details.json").write_text(json.dumps(extras, indent=1, sort_keys=True, default=_json_default))
    paths["details"] = out / f"{sid}_details.json"
    return paths


def _json_default(v):
    if hasattr(v, "tolist"):
        return v.tolist()
    return str(v)
