"""Trajectories, FOM time integration, and analytic snapshot generators."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..front import FrontFunction, tanh_front
from .grid import Grid, grid1d, grid2d
from .integrate import dopri5
from .problems import FomProblem, rhs


@dataclass
class Trajectory:
    """States ``states[:, j]`` at ``times[j]`` for parameter ``mu``."""

    times: np.ndarray
    states: np.ndarray
    mu: Optional[float] = None
    grid: Optional[Grid] = field(default=None, repr=False)
    info: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.states = np.asarray(self.states, dtype=float)
        if self.states.ndim != 2 or self.states.shape[1] != self.times.size:
            raise ValueError(f"states {self.states.shape} do not match {self.times.size} times")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")

    @property
    def n_times(self) -> int:
        return self.times.size


def integrate(problem: FomProblem, q0, t_span, n_save: int = 101, rtol: float = 1e-6,
              atol: float = 1e-8, t_eval=None) -> Trajectory:
    """Solve the FOM with Dormand-Prince 5(4), sampling ``n_save`` equispaced instants."""
    if t_eval is None:
        t_eval = np.linspace(t_span[0], t_span[1], n_save)
    q0 = np.asarray(q0, dtype=float)
    if q0.shape != (problem.grid.size,):
        raise ValueError(f"q0 shape {q0.shape} does not match grid size {problem.grid.size}")
    res = dopri5(lambda t, q: rhs(problem, q, t), t_span, q0, t_eval=t_eval, rtol=rtol, atol=atol)
    mu = problem.delta if problem.kind == "reaction_diffusion_1d" else problem.gamma
    return Trajectory(res.t, res.y, mu, problem.grid,
                      {"nfev": res.nfev, "n_accepted": res.n_accepted, "n_rejected": res.n_rejected})


# --- 1D reaction-diffusion --------------------------------------------------

def rd_front() -> FrontFunction:
    """Increasing front used when decomposing reaction-diffusion data.

    The physical profile ``(1 - tanh x) / 2`` equals ``f(-x)`` for this
    ``f``, so only the sign of the level set changes.
    """
    return tanh_front(1.0)


def analytic_rd_solution(x, t, delta):
    """Traveling-pulse solution ``(1 - tanh((|x| - 2t/delta - 2)/delta)) / 2``.

    Solves ``q_t = q_xx - (8/delta^2) q^2 (q - 1)``.
    """
    xi = (np.abs(x) - 2.0 * t / delta - 2.0) / delta
    return 0.5 * (1.0 - np.tanh(xi))


def rd_grid(M: int = 4000, half_width: float = 15.0) -> Grid:
    return grid1d(-half_width, half_width, M)


def rd_trajectory(delta: float, grid: Optional[Grid] = None, T: float = 1.0, n_t: int = 101) -> Trajectory:
    """Analytic reaction-diffusion trajectory on ``n_t`` instants of ``[0, T]``."""
    grid = rd_grid() if grid is None else grid
    t = np.linspace(0.0, T, n_t)
    x = grid.axis(0)
    Q = analytic_rd_solution(x[:, None], t[None, :], delta)
    return Trajectory(t, Q, delta, grid)


# --- 1D advection -----------------------------------------------------------

def advection_front() -> FrontFunction:
    """Increasing mirror of the advected profile ``(1 - tanh(2.5 x)) / 2``."""
    return tanh_front(0.4)


def advection_profile(x):
    return 0.5 * (1.0 - np.tanh(2.5 * (np.abs(x) - 2.0)))


def advection_grid(M: int = 1000, half_width: float = 20.0) -> Grid:
    return grid1d(-half_width, half_width, M)


def advection_exact(grid: Grid, displacement) -> np.ndarray:
    """Initial profile transported by ``displacement`` with periodic wrap.

    ``displacement`` may be an array; the result has one column per entry.
    """
    a, b = grid.extents[0]
    L = b - a
    x = grid.axis(0)[:, None] - np.atleast_1d(displacement)[None, :]
    x = a + np.mod(x - a, L)
    return advection_profile(x)


def advection_trajectory(u_const: float, grid: Optional[Grid] = None, T: float = 2.5, n_t: int = 101) -> Trajectory:
    """Snapshots for constant speed ``u_const`` (exact characteristics)."""
    grid = advection_grid() if grid is None else grid
    t = np.linspace(0.0, T, n_t)
    return Trajectory(t, advection_exact(grid, u_const * t), u_const, grid)


def sine_velocity(T: float = 2.5, amp: float = 5.0):
    """``u(t) = amp sin(2 pi t / T)`` and its displacement ``int_0^t u``."""
    w = 2.0 * np.pi / T

    def u(t):
        return amp * np.sin(w * t)

    def disp(t):
        return amp / w * (1.0 - np.cos(w * np.asarray(t)))

    return u, disp


# --- moving disk ------------------------------------------------------------

def disk_grid(n: int = 129, L: float = 1.0) -> Grid:
    return grid2d((0.0, L), (0.0, L), n, periodic=False)


def moving_disk_levelset(grid: Optional[Grid] = None, n_t: int = 200, R: float = 0.22, L: float = 1.0):
    """Level set ``(|x - x0(t)|^2 - R^2) / (2R)`` of a disk circling the box center.

    ``x0(t) = L (1/2 + cos(2 pi t)/4, 1/2 + sin(2 pi t)/4)`` at
    ``t = j / n_t``, ``j = 1..n_t``. Returns ``(times, phi)`` with ``phi``
    of shape ``(grid.size, n_t)``.
    """
    grid = disk_grid(L=L) if grid is None else grid
    t = np.arange(1, n_t + 1) / n_t
    x0 = L * (0.5 + 0.25 * np.cos(2 * np.pi * t))
    y0 = L * (0.5 + 0.25 * np.sin(2 * np.pi * t))
    X, Y = (m.ravel()[:, None] for m in grid.mesh())
    phi = ((X - x0) ** 2 + (Y - y0) ** 2 - R**2) / (2 * R)
    return t, phi


def moving_disk_snapshots(n_t: int = 200, grid: Optional[Grid] = None, R: float = 0.22,
                          lam: float = 0.01, L: float = 1.0) -> Trajectory:
    """Disk of radius ``R`` moving on a circle, ``q = f(phi)``.

    ``q ~ 0`` inside the disk and ``q ~ 1`` outside.
    """
    grid = disk_grid(L=L) if grid is None else grid
    t, phi = moving_disk_levelset(grid, n_t, R, L)
    f = tanh_front(lam)
    return Trajectory(t, f(phi), None, grid, {"front": f, "levelset": phi})


# --- topology change --------------------------------------------------------

TOPO_AMPLITUDES = (1.0, 1.4, 1.2)
TOPO_DECAYS = (0.1, 0.3, 0.5)
TOPO_CENTERS = ((7.5, 3.5), (2.5, 5.0), (5.0, 7.6))


def topo_grid(n: int = 256, L: float = 10.0) -> Grid:
    return grid2d((0.0, L), (0.0, L), n, periodic=False)


def topo_merge_levelset(grid: Optional[Grid] = None, n_t: int = 101, T: float = 0.5, offset: float = 0.9):
    """Sum of three Gaussian bumps shifted upward in time.

    ``phi(x, t) = sum_k A_k exp(-s_k |x - x_k|^2) + t - offset``. The
    superlevel set ``{phi > 0}`` starts as three blobs and merges into one.
    """
    grid = topo_grid() if grid is None else grid
    t = np.linspace(0.0, T, n_t)
    X, Y = (m.ravel() for m in grid.mesh())
    psi = np.zeros_like(X)
    for a, s, (cx, cy) in zip(TOPO_AMPLITUDES, TOPO_DECAYS, TOPO_CENTERS):
        psi += a * np.exp(-s * ((X - cx) ** 2 + (Y - cy) ** 2))
    return t, psi[:, None] + t[None, :] - offset


def topo_merge_snapshots(n_t: int = 101, grid: Optional[Grid] = None, lam: float = 0.1,
                         offset: float = 0.9, T: float = 0.5) -> Trajectory:
    grid = topo_grid() if grid is None else grid
    t, phi = topo_merge_levelset(grid, n_t, T, offset)
    f = tanh_front(lam)
    return Trajectory(t, f(phi), None, grid, {"front": f, "levelset": phi})


# --- 1D traveling front for the POD decay study ------------------------------

def traveling_front_snapshots(width_ratio: float, M: int = 1000, n_t: int = 500, L: float = 1.0) -> Trajectory:
    """Front ``(1 + tanh((x - L t) / l_f)) / 2`` moving across ``[0, L]``.

    ``l_f = width_ratio * L``; ``n_t`` instants on ``[0, 1)``.
    """
    x = np.linspace(0.0, L, M)
    t = np.arange(n_t) / n_t
    lf = width_ratio * L
    Q = 0.5 * (1.0 + np.tanh((x[:, None] - L * t[None, :]) / lf))
    return Trajectory(t, Q, width_ratio, grid1d(0.0, L, M, periodic=False))


# --- 2D advection-reaction-diffusion ----------------------------------------

def ard_grid(n: int = 128, L: float = 1.0) -> Grid:
    return grid2d((0.0, L), (0.0, L), n)


def ard_initial_condition(grid: Grid, L: float = 1.0) -> np.ndarray:
    """``q0 = 1`` outside a disk of radius ``0.2 L`` at ``(0.4 L, 0.5 L)``, smoothed over one cell."""
    X, Y = (m.ravel() for m in grid.mesh())
    r = np.hypot(X - 0.4 * L, Y - 0.5 * L)
    return 0.5 * (1.0 + np.tanh((r - 0.2 * L) / grid.spacing[0]))
