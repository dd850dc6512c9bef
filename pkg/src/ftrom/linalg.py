"""Dense linear-algebra kernels: truncated SVD, thresholding, least squares."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import DataError, NumericalError

PINV_RTOL = 1e-10


@dataclass(frozen=True)
class SvdFactors:
    """Leading singular triplets ``A ~ U @ diag(S) @ V.T``."""

    U: np.ndarray
    S: np.ndarray
    V: np.ndarray

    @property
    def rank(self) -> int:
        return self.S.size

    def reconstruct(self) -> np.ndarray:
        return (self.U * self.S) @ self.V.T


def _check_finite(A, name="A"):
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.size == 0:
        raise DataError(f"{name} must be a non-empty 2D array, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise DataError(f"{name} contains non-finite entries")
    return A


def _svd(A):
    try:
        return scipy.linalg.svd(A, full_matrices=False, lapack_driver="gesdd")
    except np.linalg.LinAlgError:
        try:
            return scipy.linalg.svd(A, full_matrices=False, lapack_driver="gesvd")
        except np.linalg.LinAlgError as exc:
            raise NumericalError(f"SVD did not converge: {exc}") from exc


def truncated_svd(A, r: int) -> SvdFactors:
    """Return the ``r`` leading singular triplets of ``A``.

    Parameters
    ----------
    A : array_like, shape (m, n)
    r : int
        Number of triplets, ``1 <= r <= min(m, n)``.

    Returns
    -------
    SvdFactors
        ``U @ diag(S) @ V.T`` is the best rank-``r`` approximation in the
        Frobenius norm.
    """
    A = _check_finite(A)
    r = int(r)
    if not 1 <= r <= min(A.shape):
        raise ValueError(f"rank {r} out of range 1..{min(A.shape)}")
    U, s, Vt = _svd(A)
    return SvdFactors(U[:, :r].copy(), s[:r].copy(), Vt[:r].T.copy())


def soft_threshold(x, tau):
    """Elementwise ``sign(x) * max(|x| - tau, 0)``."""
    if np.any(np.asarray(tau) < 0):
        raise ValueError("tau must be nonnegative")
    x = np.asarray(x, dtype=float)
    out = np.sign(x) * np.maximum(np.abs(x) - tau, 0.0)
    return out if out.ndim else float(out)


def svt(A, tau: float, return_rank: bool = False):
    """Singular value thresholding, the prox of ``tau * ||.||_*``.

    Returns ``U @ diag(S_tau(s)) @ V.T``, the minimizer of
    ``tau ||X||_* + 0.5 ||X - A||_F^2``.
    """
    A = _check_finite(A)
    if tau < 0:
        raise ValueError("tau must be nonnegative")
    U, s, Vt = _svd(A)
    s = np.maximum(s - tau, 0.0)
    k = int(np.count_nonzero(s))
    X = (U[:, :k] * s[:k]) @ Vt[:k]
    return (X, k) if return_rank else X


def diff_operator(n: int) -> np.ndarray:
    """Central difference matrix with ``D[i, i-1] = 1/2`` and ``D[i, i+1] = -1/2``.

    Boundary rows keep only the in-range half entry, so ``D`` is not
    skew-symmetric there.
    """
    n = int(n)
    if n < 3:
        raise ValueError("diff_operator needs n >= 3")
    D = np.zeros((n, n))
    i = np.arange(n - 1)
    D[i + 1, i] = 0.5
    D[i, i + 1] = -0.5
    return D


def solve_least_squares(J, b, rcond: float = PINV_RTOL) -> np.ndarray:
    """Minimum-norm solution of ``min ||J x - b||_2``.

    Singular values below ``rcond * s_max`` are treated as zero.
    """
    J = np.asarray(J, dtype=float)
    b = np.asarray(b, dtype=float)
    if J.ndim != 2 or b.shape[0] != J.shape[0]:
        raise ValueError(f"shape mismatch: J {J.shape}, b {b.shape}")
    x, *_ = scipy.linalg.lstsq(J, b, cond=rcond, lapack_driver="gelsd")
    return x


def gram_truncate(A, r: int):
    """Rank-``r`` projection of a tall matrix via the eigenpairs of ``A.T @ A``.

    Cheaper than a full SVD when ``A`` has many more rows than columns.
    Returns ``(A_r, V)`` with ``A_r = A @ V @ V.T``. Accuracy of the
    singular values is limited to about ``sqrt(eps) * s_max`` but the
    projection itself is well conditioned.
    """
    G = A.T @ A
    w, V = np.linalg.eigh(G)
    V = V[:, -r:]
    return (A @ V) @ V.T, V
