"""Command line entry point ``ftrom``.

Examples
--------
::

    ftrom generate rd1d --out results
    ftrom decompose moving_disk --method ftr --rank 3
    ftrom rom rd1d --rank 4 --sample-fraction 0.2
    ftrom koopman moving_disk --rank 4
    ftrom report topo_merge --out results
    ftrom bench rd1d --rank 4 --sample-fraction 0.2
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from ..errors import FTRError
from . import io
from .experiments import Workspace, run_scenario
from .plotting import plot_run
from .report import write_csv, write_run
from .scenarios import SCENARIO_IDS, resolve
from .timing import measure_speedup

log = logging.getLogger("ftrom")


def _scenario(args):
    overrides = {"seed": args.seed}
    if getattr(args, "rank", None):
        overrides["rom"] = {"ranks": list(args.rank)}
    if getattr(args, "sample_fraction", None):
        overrides.setdefault("rom", {})["sample_fractions"] = list(args.sample_fraction)
    if getattr(args, "method", None):
        overrides["methods"] = list(args.method)
    scn = resolve(args.scenario, full=args.full, overrides=overrides)
    np.random.seed(scn.seed)
    return scn


def cmd_generate(args) -> int:
    scn = _scenario(args)
    out = Path(args.out)
    which = ("all",) if scn.id == "topo_merge" else ("train", "test")
    ws = Workspace(out)
    for w in which:
        for k, tr in enumerate(ws.trajectories(scn, w)):
            path = io.save_snapshots(tr, out / f"{scn.id}_{w}_{k}.ftrs")
            print(f"{path}  {tr.states.shape[0]} x {tr.n_times}  mu={tr.mu}")
    return 0


def cmd_decompose(args) -> int:
    scn = _scenario(args)
    ws = Workspace(args.out)
    rows = [["scenario", "method", "rank", "offline_err"]]
    for method in scn.methods:
        for r in scn.rom.ranks:
            _, _, err, notes = ws.decomposition(scn, method, r)
            rows.append([scn.id, method, r, repr(float(err))])
            print(f"{scn.id} {method} r={r}: offline error {err:.4e} {notes}")
    write_csv(Path(args.out) / f"{scn.id}_decomposition.csv", rows)
    return 0


def _run_and_write(scn, args, plots: bool) -> int:
    ws = Workspace(args.out)
    run = run_scenario(scn, workspace=ws)
    paths = write_run(run, args.out)
    if plots:
        paths.update(plot_run(run, args.out))
    for r in run.reports:
        print(f"{r.scenario} {r.method} r={r.rank} Mp/M={r.sample_fraction:g}: offline {r.offline_err:.4e} "
              f"online {r.online_err:.4e} proj {r.proj_err:.4e}")
    for f in run.failures:
        print(f"FAILED {f.scenario} {f.method} r={f.rank} at {f.stage}: {f.error}", file=sys.stderr)
    for name, p in sorted(paths.items()):
        print(f"wrote {name}: {p}")
    return 0 if run.ok else 1


def cmd_rom(args) -> int:
    scn = _scenario(args)
    if scn.id not in ("rd1d", "ard2d", "advect1d"):
        print(f"no intrusive ROM for scenario {scn.id}", file=sys.stderr)
        return 2
    return _run_and_write(scn, args, plots=False)


def cmd_koopman(args) -> int:
    scn = _scenario(args)
    if scn.id != "moving_disk":
        print("Koopman forecasting is set up for the moving_disk scenario", file=sys.stderr)
        return 2
    return _run_and_write(scn, args, plots=False)


def cmd_report(args) -> int:
    ids = SCENARIO_IDS if args.scenario == "all" else (args.scenario,)
    code = 0
    for sid in ids:
        args.scenario = sid
        code |= _run_and_write(_scenario(args), args, plots=True)
    return code


def cmd_bench(args) -> int:
    scn = _scenario(args)
    ws = Workspace(args.out)
    rows = [["scenario", "method", "rank", "sample_fraction", "t_fom_s", "t_rom_s", "speedup",
             "fom_evals_per_rhs", "rom_evals_per_rhs", "fom_nfev", "rom_nfev", "unreliable"]]
    for method in [m for m in scn.methods if m != "pod"] or ["ftr"]:
        for r in scn.rom.ranks:
            for frac in scn.rom.sample_fractions:
                res = measure_speedup(scn, r, frac, repeats=args.repeats, method=method, workspace=ws)
                rows.append([scn.id, method, r, frac, repr(res.t_fom), repr(res.t_rom), repr(res.speedup),
                             res.fom_evals_per_rhs, res.rom_evals_per_rhs, res.fom_nfev, res.rom_nfev,
                             int(res.unreliable)])
                print(f"{scn.id} {method} r={r} Mp/M={frac:g}: FOM {res.t_fom:.3f}s ROM {res.t_rom:.3f}s "
                      f"speedup {res.speedup:.1f} evals/rhs {res.rom_evals_per_rhs:.0f} of {res.fom_evals_per_rhs:.0f}"
                      + (" (unreliable timing)" if res.unreliable else ""))
    path = write_csv(Path(args.out) / f"{scn.id}_speedup.csv", rows)
    print(f"wrote {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", default="results", help="output directory (default: results)")
    common.add_argument("--full", action="store_true", help="full-size ard2d grid and parameter sweep")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("-v", "--verbose", action="count", default=0)

    sweep = argparse.ArgumentParser(add_help=False)
    sweep.add_argument("--rank", type=int, nargs="+", help="reduced ranks")
    sweep.add_argument("--method", nargs="+", choices=["pod", "ftr", "ftr_alm"])
    sweep.add_argument("--sample-fraction", type=float, nargs="+", dest="sample_fraction",
                       help="hyper-reduction sample fractions M_p/M (1 = full sampling)")

    scen_help = f"scenario id ({', '.join(SCENARIO_IDS)}) or a YAML config file"
    p = argparse.ArgumentParser(prog="ftrom", description="Front transport reduction experiments")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("generate", parents=[common], help="write snapshot files")
    s.add_argument("scenario", help=scen_help)
    s.set_defaults(func=cmd_generate)

    s = sub.add_parser("decompose", parents=[common, sweep], help="POD/FTR decompositions of the training data")
    s.add_argument("scenario", help=scen_help)
    s.set_defaults(func=cmd_decompose)

    s = sub.add_parser("rom", parents=[common, sweep], help="online ROM errors on the test set")
    s.add_argument("scenario", help=scen_help)
    s.set_defaults(func=cmd_rom)

    s = sub.add_parser("koopman", parents=[common, sweep], help="Fourier-Koopman forecasts")
    s.add_argument("scenario", nargs="?", default="moving_disk", help=scen_help)
    s.set_defaults(func=cmd_koopman)

    s = sub.add_parser("report", parents=[common, sweep], help="full tables and figures")
    s.add_argument("scenario", help=scen_help + ", or 'all'")
    s.set_defaults(func=cmd_report)

    s = sub.add_parser("bench", parents=[common, sweep], help="FOM vs ROM wall-time speedup")
    s.add_argument("scenario", help=scen_help)
    s.add_argument("--repeats", type=int, default=3)
    s.set_defaults(func=cmd_bench)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except FTRError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
