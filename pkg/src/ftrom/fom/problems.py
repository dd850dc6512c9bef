"""PDE systems: 1D advection, 1D reaction-diffusion, 2D advection-reaction-diffusion.

All three share the right-hand side

    dq/dt = -u . grad q + kappa * lap q - gamma * q**alpha * (q - 1)

on a periodic grid, discretized with 6th-order central differences.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np

from .fd import PointStencil, fd_derivative, laplacian
from .grid import Grid

KINDS = ("advection1d", "reaction_diffusion_1d", "ard_2d")


@dataclass(frozen=True)
class VortexPairSpec:
    """Decaying co-moving vortex pair.

    ``omega = omega0 exp(-t^2/tau^2) (exp(-r1^2/r0) + exp(-r2^2/r0))`` with
    centers ``L (x_c - c t, y1)`` and ``L (x_c - c t, y2)``. ``r0`` is a
    squared length. Distances use the periodic minimum image.
    """

    omega0: float = 0.05
    r0: float = 5e-4
    tau_decay: float = 9.0
    c: float = 0.1
    L: float = 1.0
    x_c: float = 0.6
    y1: float = 0.49
    y2: float = 0.51

    def __post_init__(self):
        if not (self.omega0 > 0 and self.r0 > 0 and self.tau_decay > 0):
            raise ValueError("omega0, r0 and tau_decay must be positive")

    def centers(self, t: float):
        x = self.L * (self.x_c - self.c * t)
        return (x, self.L * self.y1), (x, self.L * self.y2)

    def omega(self, xy: np.ndarray, t: float) -> np.ndarray:
        """Vorticity at points ``xy`` of shape ``(n, 2)``."""
        amp = self.omega0 * np.exp(-(t / self.tau_decay) ** 2)
        out = np.zeros(xy.shape[0])
        for cx, cy in self.centers(t):
            dx = xy[:, 0] - cx
            dy = xy[:, 1] - cy
            dx -= self.L * np.round(dx / self.L)
            dy -= self.L * np.round(dy / self.L)
            out += np.exp(-(dx * dx + dy * dy) / self.r0)
        return amp * out


@dataclass(frozen=True)
class FomProblem:
    """Full-order model description.

    ``velocity`` is a callable ``u(t) -> float`` for 1D advection or a
    :class:`VortexPairSpec` for the 2D system.
    """

    grid: Grid
    kind: str
    kappa: float = 0.0
    gamma: float = 0.0
    delta: float = 1.0
    velocity: Optional[Union[Callable, VortexPairSpec]] = None
    alpha: float = 2.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown problem kind {self.kind!r}")
        if self.kappa < 0 or self.gamma < 0 or not self.delta > 0:
            raise ValueError("need kappa >= 0, gamma >= 0, delta > 0")
        if not self.grid.periodic:
            raise ValueError("full-order models need a periodic grid")
        if self.kind == "ard_2d" and self.grid.ndim != 2:
            raise ValueError("ard_2d needs a 2D grid")
        if self.kind != "ard_2d" and self.grid.ndim != 1:
            raise ValueError(f"{self.kind} needs a 1D grid")


def advection_1d(grid: Grid, u: Callable) -> FomProblem:
    return FomProblem(grid, "advection1d", velocity=u)


def reaction_diffusion_1d(grid: Grid, delta: float) -> FomProblem:
    """Unit diffusion with reaction rate ``8 / delta^2``."""
    return FomProblem(grid, "reaction_diffusion_1d", kappa=1.0, gamma=8.0 / delta**2, delta=delta)


def ard_2d(grid: Grid, gamma: float, vortex: VortexPairSpec, kappa: float = 1e-3) -> FomProblem:
    return FomProblem(grid, "ard_2d", kappa=kappa, gamma=gamma, velocity=vortex)


def vortex_velocity(spec: VortexPairSpec, grid: Grid, t: float):
    """Velocity ``(d omega/dy, -d omega/dx)`` on the grid."""
    w = spec.omega(grid.points(), t)
    return fd_derivative(w, grid, 1, 1), -fd_derivative(w, grid, 0, 1)


def _reaction(problem, q):
    if problem.alpha == 2.0:
        return problem.gamma * (q * q) * (q - 1.0)
    return problem.gamma * np.abs(q) ** problem.alpha * (q - 1.0)


def rhs(problem: FomProblem, q, t: float) -> np.ndarray:
    """Time derivative of the discretized state ``q`` at time ``t``."""
    q = np.asarray(q, dtype=float)
    g = problem.grid
    out = np.zeros_like(q)
    if problem.kind == "advection1d":
        out -= problem.velocity(t) * fd_derivative(q, g, 0, 1)
    elif problem.kind == "ard_2d":
        ux, uy = vortex_velocity(problem.velocity, g, t)
        out -= ux * fd_derivative(q, g, 0, 1) + uy * fd_derivative(q, g, 1, 1)
    if problem.kappa:
        out += problem.kappa * laplacian(q, g)
    if problem.gamma:
        out -= _reaction(problem, q)
    return out


def rhs_at(problem: FomProblem, st: PointStencil, q_support, t: float, xy_support=None) -> np.ndarray:
    """Right-hand side at ``st.idx`` from state values on ``st.support``.

    Evaluates the same stencils as :func:`rhs`, touching only the
    ``len(st.support)`` points. ``xy_support`` caches the coordinates of
    the support points for the vortex field.
    """
    q_support = np.asarray(q_support, dtype=float)
    qc = q_support[st.center]
    out = np.zeros_like(qc)
    if problem.kind == "advection1d":
        out -= problem.velocity(t) * st.derivative(q_support, 0, 1)
    elif problem.kind == "ard_2d":
        if xy_support is None:
            xy_support = problem.grid.points()[st.support]
        w = problem.velocity.omega(xy_support, t)
        ux = st.derivative(w, 1, 1)
        uy = -st.derivative(w, 0, 1)
        out -= ux * st.derivative(q_support, 0, 1) + uy * st.derivative(q_support, 1, 1)
    if problem.kappa:
        out += problem.kappa * st.laplacian(q_support)
    if problem.gamma:
        out -= _reaction(problem, qc)
    return out
