"""Intrusive reduced-order models on the FTR manifold ``q = f(Psi a)``."""
from __future__ import annotations

import time
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.linalg

from .errors import DetectionError
from .fom.fd import PointStencil, fd_derivative
from .fom.grid import Grid
from .fom.integrate import dopri5
from .fom.problems import FomProblem, rhs, rhs_at
from .front import FrontFunction
from .linalg import solve_least_squares

# Tangent directions with singular value below SATURATION_FLOOR * f'(0) are
# damped (Tikhonov, orthonormal basis): there q is within rounding of 0 or 1
# and the FOM right-hand side carries no resolvable signal.
SATURATION_FLOOR = 1e-8


@dataclass(frozen=True)
class ReducedMap:
    """Decoder ``g(a) = f(Psi a)`` (``kind="ftr"``) or ``Psi a`` (``"pod_linear"``)."""

    basis: np.ndarray
    front: Optional[FrontFunction] = None
    grid: Optional[Grid] = field(default=None, repr=False, compare=False)

    @property
    def kind(self) -> str:
        return "pod_linear" if self.front is None else "ftr"

    @property
    def rank(self) -> int:
        return self.basis.shape[1]

    def levelset(self, a):
        return self.basis @ np.asarray(a, dtype=float)

    def decode(self, a):
        phi = self.levelset(a)
        return phi if self.front is None else self.front(phi)

    def jacobian(self, a):
        if self.front is None:
            return self.basis
        d = self.front.derivative(self.levelset(a))
        return d[:, None] * self.basis


def ftr_map(lowrank, front: FrontFunction, grid: Optional[Grid] = None) -> ReducedMap:
    return ReducedMap(lowrank.basis, front, grid)


def pod_map(U, grid: Optional[Grid] = None) -> ReducedMap:
    return ReducedMap(np.asarray(U, dtype=float), None, grid)


def decode(rmap: ReducedMap, a):
    return rmap.decode(a)


def jacobian(rmap: ReducedMap, a):
    return rmap.jacobian(a)


# --- Galerkin projection ----------------------------------------------------

def manifold_galerkin_rhs(rmap: ReducedMap, fom: FomProblem, a, t: float, F: Optional[Callable] = None):
    """``da/dt = J_g(a)^+ F(g(a), t)`` by least squares.

    ``F`` overrides the FOM right-hand side; it is called as ``F(q, t)``.
    """
    q = rmap.decode(a)
    Fq = rhs(fom, q, t) if F is None else F(q, t)
    if rmap.front is None:
        return solve_least_squares(rmap.basis, Fq)
    J = rmap.jacobian(a)
    beta = saturation_damping(rmap.front)
    A = np.vstack([J, beta * np.eye(rmap.rank)])
    return solve_least_squares(A, np.concatenate([Fq, np.zeros(rmap.rank)]))


def saturation_damping(front: FrontFunction, row_fraction: float = 1.0) -> float:
    """Absolute Tikhonov scale for the manifold Galerkin least squares."""
    return SATURATION_FLOOR * float(front.derivative(0.0)) * np.sqrt(row_fraction)


@dataclass
class HyperReductionConfig:
    """Adaptive sampling of the points nearest to the front.

    ``resample_interval=None`` refreshes the sample set after every
    accepted time step; otherwise whenever that much time has elapsed.
    """

    sample_fraction: float = 0.2
    halo: int = 3
    resample_interval: Optional[float] = None
    tikhonov: float = 1e-10
    cond_limit: float = 1e12

    def __post_init__(self):
        if not 0 < self.sample_fraction <= 1:
            raise ValueError("sample_fraction must lie in (0, 1]")
        if self.halo != 3:
            raise ValueError("the 6th-order stencil needs a halo of 3 cells")

    def n_samples(self, M: int, r: int) -> int:
        return int(min(M, max(round(self.sample_fraction * M), 10 * r)))


@dataclass
class SampleSet:
    """Selected points ``idx`` and the stencil over their halo."""

    idx: np.ndarray
    stencil: PointStencil
    xy: Optional[np.ndarray] = None

    @property
    def support(self) -> np.ndarray:
        return self.stencil.support


def hyper_select(rmap: ReducedMap, a, cfg: HyperReductionConfig, n_samples: Optional[int] = None,
                 return_stencil: bool = False):
    """Indices of the ``M_p`` smallest ``|Psi a|`` and their halo-extended set.

    Ties are broken by ascending index. Returns ``(P, P_hat)``, both sorted.
    """
    if rmap.front is None:
        raise ValueError("hyper-reduction needs an FTR map")
    if rmap.grid is None:
        raise ValueError("hyper-reduction needs the map's grid")
    M = rmap.basis.shape[0]
    Mp = cfg.n_samples(M, rmap.rank) if n_samples is None else int(n_samples)
    if Mp > M:
        raise ValueError(f"M_p = {Mp} exceeds M = {M}")
    phi = np.abs(rmap.levelset(a))
    P = np.sort(np.argsort(phi, kind="stable")[:Mp])
    st = PointStencil(rmap.grid, P)
    if return_stencil:
        return P, st
    return P, st.support


def _sample_set(rmap, a, cfg):
    P, st = hyper_select(rmap, a, cfg, return_stencil=True)
    return SampleSet(P, st)


def _solve_normal(J, b, cfg, flags, beta: float = 0.0):
    G = J.T @ J + beta ** 2 * np.eye(J.shape[1])
    rhs_ = J.T @ b
    if np.linalg.cond(G) > cfg.cond_limit:
        G = G + cfg.tikhonov * np.trace(G) * np.eye(G.shape[0])
        flags["regularized"] = flags.get("regularized", 0) + 1
    try:
        return scipy.linalg.solve(G, rhs_, assume_a="pos")
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgWarning):
        flags["regularized"] = flags.get("regularized", 0) + 1
        G = G + cfg.tikhonov * max(np.trace(G), 1e-300) * np.eye(G.shape[0])
        return scipy.linalg.solve(G, rhs_)


def hyper_rhs(rmap: ReducedMap, fom: FomProblem, a, t: float, cfg: HyperReductionConfig,
              sample: Optional[SampleSet] = None, flags: Optional[dict] = None):
    """Hyper-reduced Galerkin right-hand side.

    Solves ``(P J)^T (P J) da = (P J)^T P F`` where ``F`` is evaluated
    pointwise on the halo-extended sample set only.
    """
    if sample is None:
        sample = _sample_set(rmap, a, cfg)
    flags = {} if flags is None else flags
    st = sample.stencil
    a = np.asarray(a, dtype=float)
    phi_s = rmap.basis[st.support] @ a
    q_s = rmap.front(phi_s)
    if fom.kind == "ard_2d" and sample.xy is None:
        sample.xy = fom.grid.points()[st.support]
    F = rhs_at(fom, st, q_s, t, sample.xy)
    J = rmap.front.derivative(phi_s[st.center])[:, None] * rmap.basis[sample.idx]
    flags["evals"] = flags.get("evals", 0) + st.support.size
    beta = saturation_damping(rmap.front, sample.idx.size / rmap.basis.shape[0])
    return _solve_normal(J, F, cfg, flags, beta)


# --- linear Galerkin for pure advection -------------------------------------

@dataclass(frozen=True)
class ReducedOperator:
    """``components[k] = Psi^T L_k Psi`` with ``L_k`` the derivative along axis ``k``."""

    components: tuple
    velocity: Optional[Callable] = None

    @property
    def rank(self) -> int:
        return self.components[0].shape[0]


def build_reduced_advection(basis, grid: Grid, velocity: Optional[Callable] = None) -> ReducedOperator:
    """Precompute ``Psi^T L_k Psi`` for each axis with the 6th-order stencil.

    ``velocity(t)`` returns the uniform advection speed (a scalar in 1D,
    a sequence per axis otherwise).
    """
    basis = np.asarray(basis, dtype=float)
    comps = tuple(basis.T @ fd_derivative(basis, grid, k, 1) for k in range(grid.ndim))
    return ReducedOperator(comps, velocity)


def ftr_linear_galerkin_step(op: ReducedOperator, a, t: float, velocity: Optional[Callable] = None):
    """``da/dt = -sum_k u_k(t) L_r^(k) a`` for ``q_t = -u . grad q``."""
    vel = op.velocity if velocity is None else velocity
    u = np.atleast_1d(0.0 if vel is None else vel(t))
    out = np.zeros_like(np.asarray(a, dtype=float))
    for uk, Lk in zip(u, op.components):
        out -= uk * (Lk @ a)
    return out


# --- initial condition fit --------------------------------------------------

def linear_guess(rmap: ReducedMap, q, clip: float = 1e-3):
    """Cheap starting amplitudes: project ``f^{-1}(q)`` onto the basis."""
    q = np.asarray(q, dtype=float)
    if rmap.front is None:
        return rmap.basis.T @ q
    return rmap.basis.T @ rmap.front.inverse(q, clip)


def fit_initial_condition(rmap: ReducedMap, q0, a_guess, max_iter: int = 50, tol: float = 1e-9,
                          return_info: bool = False):
    """Gauss-Newton fit ``min_a ||q0 - g(a)||_2``.

    Steps that increase the residual are halved (up to 30 times). Stops
    when the step norm drops below ``tol (1 + ||a||)``. Returns the best
    iterate found.
    """
    q0 = np.asarray(q0, dtype=float)
    a = np.array(a_guess, dtype=float)
    if not np.all(np.isfinite(a)):
        raise ValueError("a_guess must be finite")
    r = q0 - rmap.decode(a)
    res = float(r @ r)
    best_a, best_res = a.copy(), res
    converged = False
    n_up = 0
    it = 0
    for it in range(1, max_iter + 1):
        J = rmap.jacobian(a)
        step = solve_least_squares(J, r)
        s = 1.0
        for _ in range(30):
            a_try = a + s * step
            r_try = q0 - rmap.decode(a_try)
            res_try = float(r_try @ r_try)
            if res_try <= res:
                break
            s *= 0.5
        else:
            n_up += 1
        a, r, res = a_try, r_try, res_try
        if res < best_res:
            best_a, best_res = a.copy(), res
            n_up = 0
        if np.linalg.norm(s * step) < tol * (1.0 + np.linalg.norm(a)):
            converged = True
            break
        if n_up >= 5:
            break
    if return_info:
        return best_a, {"converged": converged, "iterations": it, "residual": np.sqrt(best_res)}
    return best_a


# --- front scales -----------------------------------------------------------

def _front_position_1d(x, q, level):
    """Right-most crossing of ``level``, linearly interpolated."""
    s = q - level
    cross = np.nonzero(np.sign(s[:-1]) * np.sign(s[1:]) < 0)[0]
    if cross.size == 0:
        return np.nan
    i = cross[-1]
    return x[i] - s[i] * (x[i + 1] - x[i]) / (s[i + 1] - s[i])


def characteristic_scales(traj, kappa: float = 1.0, front_level: float = 0.5):
    """Front speed ``c*``, width ``l_f = kappa / c*`` and time ``t_f = l_f / c*``.

    1D: the right-most level crossing is tracked. 2D: the radius of the
    equivalent disk ``sqrt(area / pi)`` of ``{q > level}`` is tracked.
    """
    grid = traj.grid
    if traj.n_times < 2:
        raise DetectionError("need at least two snapshots")
    if grid is None or grid.ndim == 1:
        x = grid.axis(0) if grid is not None else np.arange(traj.states.shape[0], dtype=float)
        pos = np.array([_front_position_1d(x, traj.states[:, j], front_level) for j in range(traj.n_times)])
    else:
        cell = np.prod(grid.spacing)
        area = cell * np.count_nonzero(traj.states > front_level, axis=0)
        pos = np.sqrt(area / np.pi)
    ok = np.isfinite(pos)
    if ok.sum() < 2:
        raise DetectionError("no level crossing found")
    c, _ = np.polyfit(traj.times[ok], pos[ok], 1)
    c = abs(float(c))
    if c < 1e-12:
        raise DetectionError("front does not move")
    lf = kappa / c
    return c, lf, lf / c


# --- ROM time integration ---------------------------------------------------

@dataclass
class RomResult:
    times: np.ndarray
    amplitudes: np.ndarray
    wall_time: float
    nfev: int
    n_accepted: int
    evals: int = 0
    flags: dict = field(default_factory=dict)
    steps: list = field(default_factory=list)

    def states(self, rmap: ReducedMap) -> np.ndarray:
        return rmap.decode(self.amplitudes)

    def evals_per_rhs(self) -> float:
        return self.evals / max(self.nfev, 1)

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("t,a_norm,regularized,rhs_evals,wall_s\n")
            for row in self.steps:
                fh.write(",".join(f"{v:.10g}" for v in row) + "\n")


def simulate_rom(rmap: ReducedMap, fom: Optional[FomProblem], a0, t_eval, cfg: Optional[HyperReductionConfig] = None,
                 rtol: float = 1e-6, atol: float = 1e-8, operator: Optional[ReducedOperator] = None,
                 record_steps: bool = False) -> RomResult:
    """Integrate the reduced system with the same Dormand-Prince scheme as the FOM.

    Exactly one of the right-hand sides is used: ``operator`` (linear
    advection Galerkin), ``cfg`` (hyper-reduced manifold Galerkin) or the
    full manifold Galerkin projection.
    """
    t_eval = np.asarray(t_eval, dtype=float)
    a0 = np.asarray(a0, dtype=float)
    flags: dict = {}
    steps: list = []
    t_start = time.perf_counter()
    if operator is not None:
        fun = lambda t, a: ftr_linear_galerkin_step(operator, a, t)
        on_step = None
    elif cfg is not None:
        state = {"sample": _sample_set(rmap, a0, cfg), "t_last": t_eval[0]}

        def fun(t, a):
            return hyper_rhs(rmap, fom, a, t, cfg, state["sample"], flags)

        def on_step(t, a):
            if cfg.resample_interval is None or t - state["t_last"] >= cfg.resample_interval:
                state["sample"] = _sample_set(rmap, a, cfg)
                state["t_last"] = t
            if record_steps:
                steps.append((t, np.linalg.norm(a), flags.get("regularized", 0), flags.get("evals", 0),
                              time.perf_counter() - t_start))
    else:
        M = rmap.basis.shape[0]

        def fun(t, a):
            flags["evals"] = flags.get("evals", 0) + M
            return manifold_galerkin_rhs(rmap, fom, a, t)

        on_step = None
    if record_steps and on_step is None:
        def on_step(t, a):
            steps.append((t, np.linalg.norm(a), flags.get("regularized", 0), flags.get("evals", 0),
                          time.perf_counter() - t_start))
    res = dopri5(fun, (t_eval[0], t_eval[-1]), a0, t_eval=t_eval, rtol=rtol, atol=atol, on_step=on_step)
    wall = time.perf_counter() - t_start
    if flags.get("regularized"):
        warnings.warn(f"{flags['regularized']} regularized least-squares solves during ROM integration")
    return RomResult(res.t, res.y, wall, res.nfev, res.n_accepted, flags.get("evals", 0), flags, steps)
