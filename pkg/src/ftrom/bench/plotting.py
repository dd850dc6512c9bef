"""Static figures for the report (Agg backend, files only)."""
from __future__ import annotations

import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .experiments import ScenarioRun  # noqa: E402

STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "legend.fontsize": 8,
    "lines.linewidth": 1.2,
    "lines.markersize": 4,
    "figure.dpi": 120,
    "savefig.bbox": "tight",
}
MARKERS = {"pod": "s", "ftr": "o", "ftr_alm": "^"}


def _finite(xs, ys):
    pts = [(x, y) for x, y in zip(xs, ys) if y is not None and not math.isnan(y) and y > 0]
    return [p[0] for p in pts], [p[1] for p in pts]


def plot_error_vs_rank(run: ScenarioRun, path):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(4.2, 3.0))
        groups = {}
        for r in run.reports:
            groups.setdefault((r.method, r.sample_fraction), []).append(r)
        for (method, frac), reps in sorted(groups.items()):
            reps.sort(key=lambda r: r.rank)
            ranks = [r.rank for r in reps]
            tag = method if frac >= 1 else f"{method} Mp/M={frac:g}"
            for attr, ls in (("offline_err", "-"), ("online_err", "--")):
                x, y = _finite(ranks, [getattr(r, attr) for r in reps])
                if x:
                    ax.semilogy(x, y, ls, marker=MARKERS.get(method, "x"), label=f"{tag} {attr.split('_')[0]}")
        ax.set_xlabel("rank r")
        ax.set_ylabel("relative error")
        ax.set_title(run.scenario.id)
        ax.grid(True, which="both", alpha=0.3)
        if ax.lines:
            ax.legend()
        fig.savefig(path)
        plt.close(fig)
    return Path(path)


def plot_error_vs_cpu(run: ScenarioRun, path):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(4.2, 3.0))
        t_fom = None
        for r in sorted(run.reports, key=lambda r: (r.method, r.sample_fraction, r.rank)):
            if math.isnan(r.t_rom_s) or math.isnan(r.online_err):
                continue
            ax.loglog(r.t_rom_s, r.online_err, MARKERS.get(r.method, "x"), color=f"C{int(10 * r.sample_fraction) % 10}")
            ax.annotate(f"({r.rank})", (r.t_rom_s, r.online_err), fontsize=6)
            if not math.isnan(r.t_fom_s):
                t_fom = r.t_fom_s
        if t_fom is not None:
            ax.axvline(t_fom, ls="--", color="k", label="FOM")
            ax.legend()
        ax.set_xlabel("wall time [s]")
        ax.set_ylabel("online error")
        ax.set_title(f"{run.scenario.id}: error vs time")
        ax.grid(True, which="both", alpha=0.3)
        fig.savefig(path)
        plt.close(fig)
    return Path(path)


def plot_curve(points, x, y, path, logx=False, logy=False, title="", step=False):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(4.2, 3.0))
        xs = [p[x] for p in points]
        ys = [p[y] for p in points]
        if step:
            ax.step(xs, ys, where="post")
        else:
            ax.plot(xs, ys, "o-")
        if logx:
            ax.set_xscale("log")
        if logy:
            ax.set_yscale("log")
        ax.set_xlabel(x)
        ax.set_ylabel(y)
        ax.set_title(title)
        ax.grid(True, which="both", alpha=0.3)
        fig.savefig(path)
        plt.close(fig)
    return Path(path)


def plot_run(run: ScenarioRun, out_dir, fmt: str = "png") -> dict:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    sid = run.scenario.id
    paths = {}
    if run.reports:
        paths["error_vs_rank"] = plot_error_vs_rank(run, out / f"{sid}_error_vs_rank.{fmt}")
        if any(not math.isnan(r.t_rom_s) for r in run.reports):
            paths["error_vs_cpu"] = plot_error_vs_cpu(run, out / f"{sid}_error_vs_cpu.{fmt}")
    if run.curves.get("pod_decay"):
        paths["pod_decay"] = plot_curve(run.curves["pod_decay"], "width_ratio", "beta", out / f"{sid}_decay.{fmt}",
                                        logx=True, title="POD error decay rate")
    if run.curves.get("topo_components"):
        paths["topo_components"] = plot_curve(run.curves["topo_components"], "t", "components",
                                              out / f"{sid}_components.{fmt}", title="connected components",
                                              step=True)
    if run.curves.get("pod_offline"):
        paths["pod_offline"] = plot_curve(run.curves["pod_offline"], "rank", "offline_err",
                                          out / f"{sid}_pod_offline.{fmt}", logy=True, title="POD offline error")
    return paths
