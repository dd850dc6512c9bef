"""Wall-clock comparison of FOM and ROM runs."""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..fom import analytic_rd_solution, ard_initial_condition, integrate
from ..rom import HyperReductionConfig, fit_initial_condition, simulate_rom
from .experiments import Workspace, _interp_guess, fom_problem, reduced_map
from .scenarios import Scenario


@dataclass
class SpeedupResult:
    t_fom: float
    t_rom: float
    speedup: float
    fom_evals_per_rhs: float
    rom_evals_per_rhs: float
    fom_nfev: int
    rom_nfev: int
    unreliable: bool = False
    samples: dict = field(default_factory=dict)


def _median_time(fn, repeats):
    times, out = [], None
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return float(np.median(times)), times, out


def measure_speedup(scn: Scenario, rank: int, sample_fraction: float, repeats: int = 3,
                    method: str = "ftr", mu=None, workspace: Optional[Workspace] = None) -> SpeedupResult:
    """Median wall times of the FOM and the ROM at one test parameter.

    Pointwise right-hand-side evaluations per call are recorded as a
    machine-independent cost measure. ``unreliable`` is set when the timer
    resolution exceeds 1% of a measured time.
    """
    if repeats < 3:
        raise ValueError("repeats must be >= 3")
    if scn.id not in ("rd1d", "ard2d"):
        raise ValueError(f"speedup is only defined for rd1d and ard2d, not {scn.id}")
    ws = Workspace() if workspace is None else workspace
    mu = scn.params.test[0] if mu is None else mu
    prob = fom_problem(scn, mu)
    g = prob.grid
    if scn.id == "ard2d":
        q0 = ard_initial_condition(g)
    else:
        q0 = analytic_rd_solution(g.axis(0), 0.0, mu)
    t_eval = np.linspace(0.0, scn.fom.T, scn.fom.n_t)

    basis, amps, _, _ = ws.decomposition(scn, method, rank)
    rmap = reduced_map(scn, method, basis)
    train = ws.trajectories(scn, "train")
    n0 = np.cumsum([0] + [t.n_times for t in train])[:-1]
    if method == "pod":
        a0 = basis.T @ q0
    else:
        a0 = fit_initial_condition(rmap, q0, _interp_guess([t.mu for t in train], amps[n0], mu))
    cfg = None if sample_fraction >= 1.0 else HyperReductionConfig(sample_fraction)

    t_fom, fom_samples, fom_tr = _median_time(
        lambda: integrate(prob, q0, (0.0, scn.fom.T), t_eval=t_eval, rtol=scn.fom.rtol, atol=scn.fom.atol), repeats)
    t_rom, rom_samples, rom_res = _median_time(
        lambda: simulate_rom(rmap, prob, a0, t_eval, cfg=cfg, rtol=scn.rom.rtol, atol=scn.rom.atol), repeats)

    res = time.get_clock_info("perf_counter").resolution
    unreliable = res > 0.01 * min(min(fom_samples), min(rom_samples))
    return SpeedupResult(
        t_fom, t_rom, t_fom / t_rom,
        fom_evals_per_rhs=float(g.size),
        rom_evals_per_rhs=rom_res.evals_per_rhs(),
        fom_nfev=int(fom_tr.info["nfev"]),
        rom_nfev=int(rom_res.nfev),
        unreliable=bool(unreliable),
        samples={"fom": fom_samples, "rom": rom_samples},
    )
