"""Uniform tensor-product grids."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

MIN_POINTS = 7


@dataclass(frozen=True)
class Grid:
    """Uniform grid on a box, one entry of ``extents``/``shape`` per axis.

    With ``periodic=True`` the right end is identified with the left one,
    so ``dx = (b - a) / n``. Otherwise points include both ends.
    Fields are stored as flat vectors in C order.
    """

    extents: tuple
    shape: tuple
    periodic: bool = True
    _axes: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        ext = tuple((float(a), float(b)) for a, b in self.extents)
        shape = tuple(int(n) for n in self.shape)
        if len(ext) != len(shape) or not 1 <= len(shape) <= 2:
            raise ValueError("extents and shape must describe 1 or 2 axes")
        for (a, b), n in zip(ext, shape):
            if not b > a:
                raise ValueError(f"empty interval [{a}, {b}]")
            if n < MIN_POINTS:
                raise ValueError(f"need at least {MIN_POINTS} points per axis, got {n}")
        axes = []
        for (a, b), n in zip(ext, shape):
            if self.periodic:
                axes.append(a + (b - a) / n * np.arange(n))
            else:
                axes.append(np.linspace(a, b, n))
        object.__setattr__(self, "extents", ext)
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "_axes", tuple(axes))

    @property
    def ndim(self) -> int:
        return len(self.shape)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @property
    def spacing(self) -> tuple:
        if self.periodic:
            return tuple((b - a) / n for (a, b), n in zip(self.extents, self.shape))
        return tuple((b - a) / (n - 1) for (a, b), n in zip(self.extents, self.shape))

    @property
    def lengths(self) -> tuple:
        return tuple(b - a for a, b in self.extents)

    def axis(self, k: int = 0) -> np.ndarray:
        return self._axes[k]

    def mesh(self) -> tuple:
        """Coordinate arrays of shape ``self.shape`` (``ij`` indexing)."""
        return np.meshgrid(*self._axes, indexing="ij")

    def points(self) -> np.ndarray:
        """Flat coordinates, shape ``(size, ndim)``."""
        return np.stack([m.ravel() for m in self.mesh()], axis=1)


def grid1d(a: float, b: float, n: int, periodic: bool = True) -> Grid:
    return Grid(((a, b),), (n,), periodic)


def grid2d(ax, ay, nx: int, ny: int | None = None, periodic: bool = True) -> Grid:
    """2D grid on ``ax x ay``; ``ny`` defaults to ``nx``."""
    return Grid((tuple(ax), tuple(ay)), (nx, nx if ny is None else ny), periodic)
