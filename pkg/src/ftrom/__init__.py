"""Front transport reduction for sharp moving fronts.

Low-rank level-set decompositions ``q ~ f(Psi a)``, POD baselines,
manifold Galerkin and Fourier-Koopman reduced models, and the full-order
solvers used to generate training data.
"""
from .decomp import FrontFunction, LowRankField, ftr_alm, ftr_threshold, pod, relative_error
from .errors import FTRError

__all__ = [
    "FTRError",
    "FrontFunction",
    "LowRankField",
    "ftr_alm",
    "ftr_threshold",
    "pod",
    "relative_error",
]

__version__ = "0.1.0"
