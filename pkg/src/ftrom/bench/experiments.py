"""Experiment driver: data, decompositions, ROMs and error tables per scenario."""
from __future__ import annotations

import hashlib
import json
import logging
import time
import traceback
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy import ndimage

from ..decomp import LowRankField, decay_rate_fit, ftr_alm, ftr_threshold, pod, pod_errors, projection_error, relative_error
from ..fom import (
    Trajectory,
    VortexPairSpec,
    advection_exact,
    analytic_rd_solution,
    advection_grid,
    advection_trajectory,
    ard_2d,
    ard_grid,
    ard_initial_condition,
    disk_grid,
    integrate,
    moving_disk_snapshots,
    rd_grid,
    rd_trajectory,
    reaction_diffusion_1d,
    sine_velocity,
    topo_grid,
    topo_merge_snapshots,
)
from ..koopman import fit as koopman_fit
from ..koopman import forecast
from ..rom import (
    HyperReductionConfig,
    ReducedMap,
    build_reduced_advection,
    fit_initial_condition,
    ftr_map,
    pod_map,
    simulate_rom,
)
from . import io
from .scenarios import Scenario

log = logging.getLogger(__name__)

NAN = float("nan")


@dataclass
class RunReport:
    scenario: str
    method: str
    rank: int
    sample_fraction: float
    offline_err: float = NAN
    online_err: float = NAN
    proj_err: float = NAN
    t_fom_s: float = NAN
    t_rom_s: float = NAN
    speedup: float = NAN
    extra: dict = field(default_factory=dict)

    @property
    def key(self):
        return (self.scenario, self.method, self.rank, self.sample_fraction)


@dataclass
class Failure:
    scenario: str
    method: str
    rank: int
    sample_fraction: float
    stage: str
    error: str


@dataclass
class ScenarioRun:
    scenario: Scenario
    reports: list = field(default_factory=list)
    failures: list = field(default_factory=list)
    curves: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return not self.failures


def train_test_split(traj: Trajectory, mode: str = "every_other"):
    """Even columns (0-based) for training, odd columns for testing."""
    if mode != "every_other":
        raise ValueError(f"unknown split mode {mode!r}")
    if traj.n_times < 2:
        raise ValueError("need at least two snapshots to split")
    tr = Trajectory(traj.times[0::2], traj.states[:, 0::2], traj.mu, traj.grid, dict(traj.info))
    te = Trajectory(traj.times[1::2], traj.states[:, 1::2], traj.mu, traj.grid, dict(traj.info))
    return tr, te


# --- data -------------------------------------------------------------------

def _grid(scn: Scenario):
    n, p = scn.fom.grid, scn.fom.params
    if scn.id == "moving_disk":
        return disk_grid(n)
    if scn.id == "topo_merge":
        return topo_grid(n)
    if scn.id == "advect1d":
        return advection_grid(n, p.get("half_width", 20.0))
    if scn.id == "rd1d":
        return rd_grid(n, p.get("half_width", 15.0))
    if scn.id == "ard2d":
        return ard_grid(n)
    raise ValueError(f"scenario {scn.id} has no grid")


def _vortex(scn: Scenario) -> VortexPairSpec:
    p = scn.fom.params
    return VortexPairSpec(omega0=p.get("omega0", 0.05), r0=p.get("r0", 5e-4), c=p.get("c", 0.1),
                          tau_decay=3.0 * scn.fom.T)


def fom_problem(scn: Scenario, mu):
    g = _grid(scn)
    if scn.id == "rd1d":
        return reaction_diffusion_1d(g, float(mu))
    if scn.id == "ard2d":
        return ard_2d(g, float(mu), _vortex(scn), kappa=scn.fom.params.get("kappa", 1e-3))
    raise ValueError(f"scenario {scn.id} has no FOM to integrate")


def _fom_run(scn: Scenario, mu):
    prob = fom_problem(scn, mu)
    q0 = ard_initial_condition(prob.grid) if scn.id == "ard2d" else analytic_rd_solution(prob.grid.axis(0), 0.0, mu)
    t0 = time.perf_counter()
    tr = integrate(prob, q0, (0.0, scn.fom.T), n_save=scn.fom.n_t, rtol=scn.fom.rtol, atol=scn.fom.atol)
    tr.info["wall_s"] = time.perf_counter() - t0
    return tr


def generate(scn: Scenario, which: str) -> list:
    """Trajectories for the ``"train"`` or ``"test"`` parameter set.

    Single-trajectory scenarios (disk, topology) return one trajectory for
    ``"all"``; the disk split is :func:`train_test_split`.
    """
    g = _grid(scn) if scn.id != "pod_decay" else None
    n_t, T = scn.fom.n_t, scn.fom.T
    if scn.id == "moving_disk":
        tr = moving_disk_snapshots(n_t=n_t, grid=g, R=scn.fom.params.get("R", 0.22), lam=scn.front.lam)
        if which == "all":
            return [tr]
        train, test = train_test_split(tr)
        return [train if which == "train" else test]
    if scn.id == "topo_merge":
        return [topo_merge_snapshots(n_t=n_t, grid=g, lam=scn.front.lam, offset=scn.fom.params.get("offset", 0.9))]
    mus = scn.params.train if which == "train" else scn.params.test
    if scn.id == "advect1d":
        out = []
        for mu in mus:
            if mu == "sine":
                _, disp = sine_velocity(T, scn.fom.params.get("amp", 5.0))
                t = np.linspace(0.0, T, n_t)
                out.append(Trajectory(t, advection_exact(g, disp(t)), "sine", g))
            else:
                out.append(advection_trajectory(float(mu), g, T, n_t))
        return out
    if scn.id == "rd1d":
        return [rd_trajectory(float(mu), g, T, n_t) for mu in mus]
    if scn.id == "ard2d":
        return [_fom_run(scn, mu) for mu in mus]
    raise ValueError(f"scenario {scn.id} has no trajectories")


class Workspace:
    """Caches trajectories (FTRS files) and decompositions (npz) under ``root``.

    With ``root=None`` everything is kept in memory only.
    """

    def __init__(self, root=None):
        self.root = None if root is None else Path(root)
        self._traj: dict = {}
        self._models: dict = {}

    @staticmethod
    def _hash(*parts) -> str:
        return hashlib.sha1(json.dumps(parts, sort_keys=True, default=str).encode()).hexdigest()[:10]

    def _tag(self, scn: Scenario) -> str:
        d = scn.to_dict()
        return self._hash(d["id"], d["fom"], d["params"], d["front"])

    def _model_tag(self, scn: Scenario) -> str:
        return self._hash(self._tag(scn), scn.to_dict()["decomposition"])

    def trajectories(self, scn: Scenario, which: str) -> list:
        key = (self._tag(scn), which)
        if key in self._traj:
            return self._traj[key]
        trajs = None
        if self.root is not None:
            trajs = self._load_trajs(scn, which)
        if trajs is None:
            trajs = generate(scn, which)
            if self.root is not None:
                self._save_trajs(scn, which, trajs)
        self._traj[key] = trajs
        return trajs

    def _traj_dir(self, scn):
        return self.root / "snapshots" / f"{scn.id}-{self._tag(scn)}"

    def _save_trajs(self, scn, which, trajs):
        d = self._traj_dir(scn)
        meta = []
        for k, tr in enumerate(trajs):
            io.save_snapshots(tr, d / f"{which}_{k}.ftrs")
            meta.append({"mu": tr.mu, "wall_s": tr.info.get("wall_s")})
        (d / f"{which}.json").write_text(json.dumps(meta))

    def _load_trajs(self, scn, which):
        d = self._traj_dir(scn)
        meta_path = d / f"{which}.json"
        if not meta_path.exists():
            return None
        meta = json.loads(meta_path.read_text())
        g = _grid(scn)
        out = []
        for k, m in enumerate(meta):
            tr = io.load_snapshots(d / f"{which}_{k}.ftrs")
            info = {} if m.get("wall_s") is None else {"wall_s": m["wall_s"]}
            out.append(Trajectory(tr.times, tr.states, m["mu"], g, info))
        return out

    def fom_reference(self, scn: Scenario, mu) -> Trajectory:
        """FOM trajectory for a test parameter whose reference data is analytic (timing, FOM-referenced error)."""
        key = (self._tag(scn), "fom", float(mu))
        if key not in self._traj:
            self._traj[key] = _fom_run(scn, mu)
        return self._traj[key]

    def snapshot_matrix(self, scn: Scenario, which: str = "train") -> np.ndarray:
        which = "all" if scn.id == "topo_merge" else which
        return np.hstack([t.states for t in self.trajectories(scn, which)])

    def decomposition(self, scn: Scenario, method: str, r: int):
        """``(basis, amplitudes (N, r), offline_err, notes)`` for the training matrix."""
        key = (self._model_tag(scn), method, int(r))
        if key in self._models:
            return self._models[key]
        path = None
        if self.root is not None:
            path = self.root / "models" / f"{scn.id}-{self._model_tag(scn)}-{method}-r{r}.npz"
            if path.exists():
                z = np.load(path, allow_pickle=False)
                out = (z["basis"], z["amplitudes"], float(z["offline_err"]), json.loads(str(z["notes"])))
                self._models[key] = out
                return out
        Q = self.snapshot_matrix(scn, "train")
        out = decompose(scn, method, r, Q, self)
        self._models[key] = out
        if path is not None:
            path.parent.mkdir(parents=True, exist_ok=True)
            np.savez(path, basis=out[0], amplitudes=out[1], offline_err=out[2], notes=json.dumps(out[3]))
        return out


def decompose(scn: Scenario, method: str, r: int, Q: np.ndarray, ws: Optional[Workspace] = None):
    dc = scn.decomposition
    f = scn.front.build()
    if method == "pod":
        U, A = pod(Q, r)
        return U, A.T, relative_error(Q, U @ A), {}
    if method == "ftr":
        lr, rep = ftr_threshold(Q, f, r, tau=dc.tau, max_iter=dc.max_iter, tol=dc.tol, momentum=dc.momentum,
                                init=dc.init)
        return lr.basis, lr.amplitudes, rep.rel_error, {"iterations": rep.iterations, "wall_s": rep.wall_time}
    if method == "ftr_alm":
        key = ("alm", ws._model_tag(scn)) if ws is not None else None
        if ws is not None and key in ws._models:
            lr_full, rep = ws._models[key]
        else:
            lr_full, rep = ftr_alm(Q, f, lambda_reg=dc.lambda_reg, mu0=dc.mu0, rho=dc.rho,
                                   err_tol=dc.alm_err_tol, max_iter=dc.alm_max_iter)
            if ws is not None:
                ws._models[key] = (lr_full, rep)
        lr = LowRankField.from_dense(lr_full.field(), min(r, lr_full.rank))
        err = relative_error(Q, f(lr.field()))
        return lr.basis, lr.amplitudes, err, {"numerical_rank": lr_full.rank, "iterations": rep.iterations}
    raise ValueError(f"unknown method {method!r}")


def reduced_map(scn: Scenario, method: str, basis) -> ReducedMap:
    g = _grid(scn)
    if method == "pod":
        return pod_map(basis, g)
    return ftr_map(LowRankField(basis, np.zeros((1, basis.shape[1]))), scn.front.build(), g)


# --- per-scenario evaluation ------------------------------------------------

def _interp_guess(train_mus, amps0, mu):
    """Linear interpolation (clamped) of initial amplitudes over the training parameters."""
    order = np.argsort(train_mus)
    m = np.asarray(train_mus, dtype=float)[order]
    A = np.asarray(amps0)[order]
    return np.array([np.interp(float(mu), m, A[:, k]) for k in range(A.shape[1])])


def _koopman_eval(scn, method, rmap, amps, ws):
    train = ws.trajectories(scn, "train")[0]
    test = ws.trajectories(scn, "test")[0]
    model = koopman_fit(amps, train.times, scn.koopman.p, sweep_resolution=scn.koopman.sweep_resolution)
    pred = forecast(model, test.times)
    online = relative_error(test.states, rmap.decode(pred))
    if method == "pod":
        proj = relative_error(test.states, rmap.basis @ (rmap.basis.T @ test.states))
    else:
        proj = projection_error(test.states, rmap, a_guess=pred.T)
    return online, proj, {"koopman": model.to_record()}


def _advection_eval(scn, method, rmap, amps, ws):
    test = ws.trajectories(scn, "test")[0]
    u, _ = sine_velocity(scn.fom.T, scn.fom.params.get("amp", 5.0))
    q0 = test.states[:, 0]
    if method == "pod":
        a0 = rmap.basis.T @ q0
    else:
        a0 = fit_initial_condition(rmap, q0, amps[0])
    op = build_reduced_advection(rmap.basis, rmap.grid, u)
    t0 = time.perf_counter()
    res = simulate_rom(rmap, None, a0, test.times, rtol=scn.rom.rtol, atol=scn.rom.atol, operator=op)
    t_rom = time.perf_counter() - t0
    online = relative_error(test.states, res.states(rmap))
    if method == "pod":
        proj = relative_error(test.states, rmap.basis @ (rmap.basis.T @ test.states))
    else:
        proj = projection_error(test.states, rmap, a_guess=res.amplitudes.T)
    return online, proj, {"t_rom_s": t_rom}


def _parametric_eval(scn, method, rmap, amps, ws, frac):
    """Online and projection errors pooled over all test parameters."""
    train = ws.trajectories(scn, "train")
    tests = ws.trajectories(scn, "test")
    n0 = np.cumsum([0] + [t.n_times for t in train])[:-1]
    amps0 = amps[n0]
    cfg = None if frac >= 1.0 else HyperReductionConfig(frac)
    ref, pred, pred_fom, fom_refs, proj_pred = [], [], [], [], []
    t_rom, t_fom, evals, nfev = [], [], [], []
    for tr in tests:
        q0 = tr.states[:, 0]
        prob = fom_problem(scn, tr.mu)
        if method == "pod":
            a0 = rmap.basis.T @ q0
        else:
            a0 = fit_initial_condition(rmap, q0, _interp_guess([t.mu for t in train], amps0, tr.mu))
        res = simulate_rom(rmap, prob, a0, tr.times, cfg=cfg, rtol=scn.rom.rtol, atol=scn.rom.atol)
        t_rom.append(res.wall_time)
        evals.append(res.evals_per_rhs())
        nfev.append(res.nfev)
        S = res.states(rmap)
        ref.append(tr.states)
        pred.append(S)
        if method == "pod":
            proj_pred.append(rmap.basis @ (rmap.basis.T @ tr.states))
        else:
            _, det = projection_error(tr.states, rmap, a_guess=res.amplitudes.T, return_details=True)
            proj_pred.append(det["fit"])
        if scn.id == "rd1d":
            fom = ws.fom_reference(scn, tr.mu)
            fom_refs.append(fom.states)
            pred_fom.append(S)
            t_fom.append(fom.info["wall_s"])
        else:
            t_fom.append(tr.info.get("wall_s", NAN))
    R, P = np.hstack(ref), np.hstack(pred)
    online = relative_error(R, P)
    proj = relative_error(R, np.hstack(proj_pred))
    extra = {
        "t_rom_s": float(np.mean(t_rom)),
        "t_fom_s": float(np.mean(t_fom)),
        "evals_per_rhs": float(np.mean(evals)),
        "nfev": int(np.sum(nfev)),
        "per_test_online": [relative_error(a, b) for a, b in zip(ref, pred)],
    }
    if fom_refs:
        extra["online_err_fom"] = relative_error(np.hstack(fom_refs), np.hstack(pred_fom))
    return online, proj, extra


def _evaluate(scn, method, r, frac, ws) -> RunReport:
    basis, amps, offline, notes = ws.decomposition(scn, method, r)
    rep = RunReport(scn.id, method, int(r), float(frac), offline_err=float(offline), extra=dict(notes))
    rmap = reduced_map(scn, method, basis)
    if scn.id == "moving_disk":
        rep.online_err, rep.proj_err, extra = _koopman_eval(scn, method, rmap, amps, ws)
    elif scn.id == "advect1d":
        rep.online_err, rep.proj_err, extra = _advection_eval(scn, method, rmap, amps, ws)
        rep.t_rom_s = extra.pop("t_rom_s")
    elif scn.id in ("rd1d", "ard2d"):
        rep.online_err, rep.proj_err, extra = _parametric_eval(scn, method, rmap, amps, ws, frac)
        rep.t_rom_s = extra.pop("t_rom_s")
        rep.t_fom_s = extra.pop("t_fom_s")
        rep.speedup = rep.t_fom_s / rep.t_rom_s
    else:
        extra = {}
    rep.extra.update(extra)
    return rep


def _grid_points(scn: Scenario, methods, ranks, fractions):
    for method in methods:
        for r in ranks:
            fr = fractions if (method != "pod" and scn.id in ("rd1d", "ard2d")) else [1.0]
            for frac in fr:
                yield method, int(r), float(frac)


def run_scenario(scn: Scenario, methods: Optional[Sequence[str]] = None, ranks: Optional[Sequence[int]] = None,
                 sample_fractions: Optional[Sequence[float]] = None, workspace: Optional[Workspace] = None) -> ScenarioRun:
    """Run every requested (method, rank, sample fraction) combination.

    Failures are recorded per combination and do not stop the sweep.
    Hyper-reduction only applies to FTR maps on rd1d and ard2d.
    """
    ws = Workspace() if workspace is None else workspace
    methods = list(scn.methods if methods is None else methods)
    ranks = list(scn.rom.ranks if ranks is None else ranks)
    fractions = list(scn.rom.sample_fractions if sample_fractions is None else sample_fractions)
    run = ScenarioRun(scn)
    if scn.id == "pod_decay":
        rows = []
        n_max = scn.fom.params.get("n_max")
        for ratio in scn.params.train:
            try:
                beta = decay_rate_fit(float(ratio), M=scn.fom.grid, n_t=scn.fom.n_t, n_max=n_max)
                rows.append({"width_ratio": float(ratio), "beta": beta})
            except Exception as exc:
                run.failures.append(Failure(scn.id, "pod", 0, 1.0, "decay_fit", f"{type(exc).__name__}: {exc}"))
        run.curves["pod_decay"] = rows
        return run
    for method, r, frac in _grid_points(scn, methods, ranks, fractions):
        try:
            rep = _evaluate(scn, method, r, frac, ws)
            run.reports.append(rep)
            log.info("%s %s r=%d Mp/M=%.2f offline=%.3e online=%.3e", scn.id, method, r, frac,
                     rep.offline_err, rep.online_err)
        except Exception as exc:
            log.warning("%s %s r=%d failed: %s", scn.id, method, r, exc)
            log.debug(traceback.format_exc())
            run.failures.append(Failure(scn.id, method, r, frac, "evaluate", f"{type(exc).__name__}: {exc}"))
    if scn.id == "topo_merge":
        tr = ws.trajectories(scn, "all")[0]
        counts = [int(ndimage.label((tr.states[:, j] > 0.5).reshape(tr.grid.shape))[1]) for j in range(tr.n_times)]
        run.curves["topo_components"] = [{"t": float(t), "components": c} for t, c in zip(tr.times, counts)]
    if scn.id in ("moving_disk", "topo_merge", "rd1d", "advect1d", "ard2d"):
        try:
            Q = ws.snapshot_matrix(scn, "train")
            rmax = int(min(max(ranks), min(Q.shape)))
            run.curves["pod_offline"] = [{"rank": k + 1, "offline_err": float(e)}
                                         for k, e in enumerate(pod_errors(Q, rmax))]
        except Exception as exc:
            run.failures.append(Failure(scn.id, "pod", 0, 1.0, "pod_curve", f"{type(exc).__name__}: {exc}"))
    return run
