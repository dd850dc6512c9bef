"""Sixth-order central finite differences on periodic grids."""
from __future__ import annotations

import numpy as np

from .grid import Grid

OFFSETS = np.arange(-3, 4)
# weights at offsets -3..3
D1 = np.array([-1 / 60, 3 / 20, -3 / 4, 0.0, 3 / 4, -3 / 20, 1 / 60])
D2 = np.array([1 / 90, -3 / 20, 3 / 2, -49 / 18, 3 / 2, -3 / 20, 1 / 90])
HALO = 3


def stencil(order: int) -> np.ndarray:
    if order == 1:
        return D1
    if order == 2:
        return D2
    raise ValueError(f"derivative order must be 1 or 2, got {order}")


def fd_derivative(q, grid: Grid, axis: int = 0, order: int = 1) -> np.ndarray:
    """Periodic 6th-order derivative of a flat field (or a stack of them).

    ``q`` has shape ``(grid.size,)`` or ``(grid.size, k)``; the result
    has the same shape.
    """
    if not grid.periodic:
        raise ValueError("finite differences require a periodic grid")
    q = np.asarray(q, dtype=float)
    if q.shape[0] != grid.size:
        raise ValueError(f"field length {q.shape[0]} does not match grid size {grid.size}")
    if not 0 <= axis < grid.ndim:
        raise ValueError(f"axis {axis} out of range for {grid.ndim}D grid")
    w = stencil(order) / grid.spacing[axis] ** order
    n = grid.shape[axis]
    Q = np.moveaxis(q.reshape(grid.shape + q.shape[1:]), axis, 0)
    Qp = np.concatenate([Q[-HALO:], Q, Q[:HALO]], axis=0)
    out = w[0] * Qp[0:n]
    for j in range(1, OFFSETS.size):
        if w[j] != 0.0:
            # out[i] += w_k * q[i + k] with k = j - 3
            out += w[j] * Qp[j:j + n]
    return np.moveaxis(out, 0, axis).reshape(q.shape)


def laplacian(q, grid: Grid) -> np.ndarray:
    out = fd_derivative(q, grid, 0, 2)
    for ax in range(1, grid.ndim):
        out += fd_derivative(q, grid, ax, 2)
    return out


def gradient(q, grid: Grid) -> list:
    return [fd_derivative(q, grid, ax, 1) for ax in range(grid.ndim)]


def neighbor_indices(grid: Grid, idx) -> np.ndarray:
    """Flat indices of the stencil neighbors of points ``idx``.

    Returns shape ``(len(idx), ndim, 7)``; entry ``[p, ax, j]`` is the
    point at offset ``j - 3`` along axis ``ax`` from ``idx[p]``.
    """
    idx = np.asarray(idx, dtype=np.intp)
    sub = np.unravel_index(idx, grid.shape)
    out = np.empty((idx.size, grid.ndim, OFFSETS.size), dtype=np.intp)
    for ax in range(grid.ndim):
        for j, k in enumerate(OFFSETS):
            moved = list(sub)
            moved[ax] = (sub[ax] + k) % grid.shape[ax]
            out[:, ax, j] = np.ravel_multi_index(tuple(moved), grid.shape)
    return out


class PointStencil:
    """Derivatives evaluated only at a subset of grid points.

    Parameters
    ----------
    grid : Grid
    idx : array of int
        Points where derivatives are wanted.

    Attributes
    ----------
    support : ndarray
        Sorted unique flat indices needed to evaluate the stencils
        (``idx`` plus the periodic halo).
    """

    def __init__(self, grid: Grid, idx):
        self.grid = grid
        self.idx = np.asarray(idx, dtype=np.intp)
        nbr = neighbor_indices(grid, self.idx)
        self.support, inv = np.unique(nbr, return_inverse=True)
        self._local = inv.reshape(nbr.shape)
        # position of each target point inside support (center of stencil)
        self.center = self._local[:, 0, HALO]

    def derivative(self, q_support, axis: int = 0, order: int = 1) -> np.ndarray:
        """Derivative at ``idx`` from values given on ``support``."""
        w = stencil(order) / self.grid.spacing[axis] ** order
        return q_support[self._local[:, axis, :]] @ w

    def laplacian(self, q_support) -> np.ndarray:
        out = self.derivative(q_support, 0, 2)
        for ax in range(1, self.grid.ndim):
            out = out + self.derivative(q_support, ax, 2)
        return out
