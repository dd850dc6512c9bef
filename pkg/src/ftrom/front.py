"""Monotone front functions ``f`` mapping level-set values into [0, 1]."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit


@dataclass(frozen=True)
class FrontFunction:
    """Sigmoid-type front function with sharpness ``lam``.

    ``kind="tanh"`` gives ``f(x) = (1 + tanh(x / lam)) / 2`` and
    ``kind="sigmoid"`` gives the logistic ``1 / (1 + exp(-x / lam))``.
    Both are increasing with ``f(x) + f(-x) = 1``.
    """

    kind: str = "tanh"
    lam: float = 1.0

    def __post_init__(self):
        if self.kind not in ("tanh", "sigmoid"):
            raise ValueError(f"unknown front function kind {self.kind!r}")
        if not self.lam > 0:
            raise ValueError("lam must be positive")

    @property
    def name(self) -> str:
        return f"{self.kind}(x/{self.lam:g})"

    def __call__(self, x):
        x = np.asarray(x, dtype=float) / self.lam
        if self.kind == "tanh":
            return 0.5 * (1.0 + np.tanh(x))
        return expit(x)

    def derivative(self, x):
        x = np.asarray(x, dtype=float) / self.lam
        if self.kind == "tanh":
            c = np.cosh(np.clip(x, -350, 350))
            return 0.5 / (self.lam * c * c)
        s = expit(x)
        return s * (1.0 - s) / self.lam

    def inverse(self, y, clip: float = 1e-12):
        """``f^{-1}(y)`` with ``y`` clamped into ``[clip, 1 - clip]``."""
        y = np.clip(np.asarray(y, dtype=float), clip, 1.0 - clip)
        if self.kind == "tanh":
            return self.lam * np.arctanh(2.0 * y - 1.0)
        return self.lam * np.log(y / (1.0 - y))


def tanh_front(lam: float = 1.0) -> FrontFunction:
    return FrontFunction("tanh", lam)


def sigmoid_front(lam: float = 1.0) -> FrontFunction:
    return FrontFunction("sigmoid", lam)
