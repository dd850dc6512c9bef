"""Offline decompositions: front transport reduction (FTR) and POD.

FTR approximates snapshots ``Q ~ f(Phi)`` with a low-rank level-set
field ``Phi = Psi A^T`` passed elementwise through a front function.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from .errors import DataError, DivergenceError, NumericalError, StagnationError
from .front import FrontFunction, sigmoid_front, tanh_front
from .linalg import svt, truncated_svd

__all__ = [
    "FrontFunction",
    "tanh_front",
    "sigmoid_front",
    "LowRankField",
    "DecompositionReport",
    "ftr_threshold",
    "ftr_alm",
    "pod",
    "pod_errors",
    "relative_error",
    "projection_error",
    "decay_rate_fit",
]


@dataclass
class LowRankField:
    """Factored field ``Phi = basis @ amplitudes.T`` with orthonormal ``basis``."""

    basis: np.ndarray
    amplitudes: np.ndarray

    @property
    def rank(self) -> int:
        return self.basis.shape[1]

    def field(self) -> np.ndarray:
        return self.basis @ self.amplitudes.T

    @classmethod
    def from_dense(cls, Phi, r: Optional[int] = None, rtol: float = 1e-10) -> "LowRankField":
        """Factor ``Phi`` by thin SVD, keeping ``r`` terms (or the numerical rank)."""
        Phi = np.asarray(Phi, dtype=float)
        U, s, Vt = scipy.linalg.svd(Phi, full_matrices=False)
        if r is None:
            r = max(1, int(np.count_nonzero(s > rtol * max(s[0], 1e-300))))
        r = min(r, s.size)
        return cls(U[:, :r].copy(), (Vt[:r].T * s[:r]).copy())


@dataclass
class DecompositionReport:
    method: str
    iterations: int = 0
    residuals: list = field(default_factory=list)
    rel_error: float = np.nan
    wall_time: float = 0.0
    converged: bool = False
    notes: dict = field(default_factory=dict)

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("iteration,residual\n")
            for k, r in enumerate(self.residuals):
                fh.write(f"{k},{r:.17g}\n")


def _check_snapshots(Q):
    Q = np.asarray(Q, dtype=float)
    if Q.ndim != 2 or Q.size == 0:
        raise DataError(f"snapshot matrix must be 2D and non-empty, got {Q.shape}")
    if not np.all(np.isfinite(Q)):
        raise DataError("snapshot matrix contains non-finite entries")
    return Q


def relative_error(Q, Qtilde) -> float:
    """``||Q - Qtilde||_F / ||Q||_F``."""
    Q = np.asarray(Q, dtype=float)
    Qtilde = np.asarray(Qtilde, dtype=float)
    if Q.shape != Qtilde.shape:
        raise ValueError(f"shape mismatch {Q.shape} vs {Qtilde.shape}")
    nq = np.linalg.norm(Q)
    if nq == 0:
        raise DataError("relative error undefined for a zero reference")
    return float(np.linalg.norm(Q - Qtilde) / nq)


def _truncate(A, r):
    """Rank-r projection using the smaller Gram matrix."""
    if A.shape[0] >= A.shape[1]:
        w, V = np.linalg.eigh(A.T @ A)
        V = V[:, -r:]
        return (A @ V) @ V.T
    w, U = np.linalg.eigh(A @ A.T)
    U = U[:, -r:]
    return U @ (U.T @ A)


def ftr_threshold(Q, f: FrontFunction, r: int, tau: float = 1.0, max_iter: int = 3000,
                  tol: float = 1e-6, window: int = 50, momentum: float = 0.0,
                  err_tol: float = 0.0, phi0=None, init: str = "zero", init_clip: float = 1e-3,
                  verbose: bool = False):
    """FTR by iterative thresholding.

    Each iteration takes the step ``Phi - tau (f(Phi) - Q)`` and truncates
    it to rank ``r``. With ``momentum > 0`` the step is taken from the
    extrapolated point ``Phi + momentum (Phi - Phi_prev)`` (heavy ball).
    This converges much faster on sharp fronts but the residual is then
    no longer monotone.

    Parameters
    ----------
    Q : (M, N) array
        Snapshots with entries in [0, 1].
    f : FrontFunction
    r : int
        Target rank.
    tau : float
        Step size. Stable choices scale with the front sharpness; values
        around ``10 * f.lam`` work well for ``tanh`` fronts.
    max_iter : int
    tol : float
        Stop when the residual improves by a relative amount below
        ``tol`` over ``window`` iterations.
    err_tol : float
        Also stop once the relative error drops below this value.
    phi0 : (M, N) array, optional
        Starting field; overrides ``init``.
    init : {"zero", "inverse"}
        ``"inverse"`` starts from the rank-``r`` truncation of
        ``f^{-1}(Q)`` with ``Q`` clamped to ``[init_clip, 1 - init_clip]``.

    Returns
    -------
    (LowRankField, DecompositionReport)

    Raises
    ------
    DivergenceError
        If the residual grows to 10 times its running minimum.
    """
    Q = _check_snapshots(Q)
    r = int(r)
    if not 1 <= r <= min(Q.shape):
        raise ValueError(f"rank {r} out of range 1..{min(Q.shape)}")
    if not tau > 0:
        raise ValueError("tau must be positive")
    if not 0.0 <= momentum < 1.0:
        raise ValueError("momentum must lie in [0, 1)")
    if init not in ("zero", "inverse"):
        raise ValueError("init must be 'zero' or 'inverse'")
    t0 = time.perf_counter()
    nq = np.linalg.norm(Q)
    if phi0 is not None:
        Phi = np.array(phi0, dtype=float)
    elif init == "inverse":
        Phi = _truncate(f.inverse(Q, init_clip), r)
    else:
        Phi = np.zeros_like(Q)
    fPhi = f(Phi)
    res = float(np.linalg.norm(fPhi - Q))
    rep = DecompositionReport("ftr")
    rep.residuals.append(res)
    best = res
    Phi_prev = Phi
    for k in range(1, max_iter + 1):
        if momentum and k > 1:
            Z = Phi + momentum * (Phi - Phi_prev)
            Rz = f(Z) - Q
        else:
            Z, Rz = Phi, fPhi - Q
        Phi_new = _truncate(Z - tau * Rz, r)
        f_new = f(Phi_new)
        res_new = float(np.linalg.norm(f_new - Q))
        if not np.isfinite(res_new):
            raise NumericalError(f"non-finite residual at iteration {k}")
        Phi_prev, Phi, fPhi, res = Phi, Phi_new, f_new, res_new
        rep.residuals.append(res)
        best = min(best, res)
        if res > 10 * best:
            raise DivergenceError(f"FTR residual diverged at iteration {k}; try a smaller tau")
        if verbose and k % 100 == 0:
            print(f"ftr {k:6d} {res / nq:.3e}", flush=True)
        if res / nq < err_tol:
            rep.converged = True
            break
        n = len(rep.residuals)
        if tol > 0 and n > window:
            old = rep.residuals[n - 1 - window]
            if old - res < tol * old:
                rep.converged = True
                break
    lr = LowRankField.from_dense(Phi, r)
    rep.iterations = len(rep.residuals) - 1
    rep.rel_error = relative_error(Q, f(lr.field()))
    rep.wall_time = time.perf_counter() - t0
    rep.notes.update(tau=tau, momentum=momentum)
    return lr, rep


def sparse_diff_operator(M: int):
    """Sparse version of :func:`ftrom.linalg.diff_operator`."""
    if M < 3:
        raise ValueError("diff_operator needs n >= 3")
    off = np.full(M - 1, 0.5)
    return sp.diags([off, -off], [-1, 1], shape=(M, M), format="csr")


def _smoothing_operator(M, lam):
    D = sparse_diff_operator(M)
    return lam * (D.T @ D).tocsr()


def ftr_alm(Q, f: FrontFunction, lambda_reg: float = 1e-3, mu0: float = 1e-2, rho: float = 1.01,
            err_tol: float = 1e-3, max_iter: int = 5000, svt_tau: float = 1.0,
            y_update: str = "pre", variant: str = "linearized", stall_window: int = 200):
    """FTR as a nuclear-norm problem solved by an augmented Lagrangian method.

    Solves ``min ||Phi||_* + lambda/2 ||D Phi||_F^2`` subject to
    ``f(Phi) = Q``, with ``D`` the central difference matrix along space.

    ``variant="linearized"`` (default) takes one proximal-gradient step
    on the augmented Lagrangian per iteration,
    ``Phi <- svt(Phi - s G, s)`` with ``G`` its smooth gradient and
    ``s`` the inverse Lipschitz bound, followed by the multiplier update
    ``Y <- Y + mu (Q - f(Phi))`` and ``mu <- rho mu``.

    ``variant="literal"`` solves ``(lambda D^T D + eps I) Phi~ = f'(Phi) * Y``
    and sets ``Phi = svt(Phi~, svt_tau)``.

    ``y_update="pre"`` uses the residual at the iterate before the
    thresholding step, ``"post"`` the one after.

    Returns
    -------
    (LowRankField, DecompositionReport)
        The field is refactored to its numerical rank.

    Raises
    ------
    StagnationError
        If the residual has not decreased for ``stall_window`` iterations.
    """
    Q = _check_snapshots(Q)
    if not (lambda_reg > 0 and mu0 > 0 and rho >= 1):
        raise ValueError("need lambda_reg > 0, mu0 > 0, rho >= 1")
    if y_update not in ("pre", "post"):
        raise ValueError("y_update must be 'pre' or 'post'")
    if variant not in ("linearized", "literal"):
        raise ValueError("variant must be 'linearized' or 'literal'")
    t0 = time.perf_counter()
    M, N = Q.shape
    nq = np.linalg.norm(Q)
    L = _smoothing_operator(M, lambda_reg)
    if variant == "literal":
        eps = 1e-8 * lambda_reg
        # pentadiagonal SPD system in banded storage
        A = (L + eps * sp.identity(M)).todia()
        ab = np.zeros((3, M))
        for off, row in zip(A.offsets, A.data):
            if off >= 0:
                ab[2 - off, off:] = row[off:]
        try:
            cho = scipy.linalg.cholesky_banded(ab)
        except np.linalg.LinAlgError as exc:
            raise NumericalError(f"smoothing system not positive definite: {exc}") from exc
    # Lipschitz bound of the smooth part: ||L|| <= lambda, f'^2 <= (max f')^2
    dmax = float(f.derivative(0.0))
    Phi = np.zeros_like(Q)
    Y = np.zeros_like(Q)
    mu = mu0
    rep = DecompositionReport("ftr_alm")
    fPhi = f(Phi)
    res = float(np.linalg.norm(Q - fPhi))
    rep.residuals.append(res)
    best, best_at = res, 0
    k_num = 0
    for k in range(1, max_iter + 1):
        Rq = Q - fPhi
        d = f.derivative(Phi)
        if variant == "literal":
            Pt = scipy.linalg.cho_solve_banded((cho, False), d * Y)
            Phi_new, k_num = svt(Pt, svt_tau, return_rank=True)
        else:
            G = L @ Phi - d * (Y + mu * Rq)
            s = 1.0 / (lambda_reg + mu * dmax * dmax)
            Phi_new, k_num = svt(Phi - s * G, s, return_rank=True)
        f_new = f(Phi_new)
        Y += mu * (Rq if y_update == "pre" else (Q - f_new))
        mu *= rho
        Phi, fPhi = Phi_new, f_new
        res = float(np.linalg.norm(Q - fPhi))
        if not np.isfinite(res):
            raise NumericalError(f"non-finite residual at iteration {k}")
        rep.residuals.append(res)
        if res / nq < err_tol:
            rep.converged = True
            break
        if res < best * (1 - 1e-9):
            best, best_at = res, k
        elif k - best_at >= stall_window:
            raise StagnationError(
                f"ALM residual stalled at {best / nq:.3e} for {stall_window} iterations (iteration {k})")
    lr = LowRankField.from_dense(Phi)
    rep.iterations = len(rep.residuals) - 1
    rep.rel_error = relative_error(Q, f(lr.field()))
    rep.wall_time = time.perf_counter() - t0
    rep.notes.update(mu_final=mu, numerical_rank=lr.rank, svt_rank=k_num)
    return lr, rep


def pod(Q, r: int):
    """Leading ``r`` left singular vectors and amplitudes ``U^T Q``.

    The reconstruction is ``U @ amplitudes``.
    """
    Q = _check_snapshots(Q)
    fac = truncated_svd(Q, r)
    return fac.U, fac.U.T @ Q


def pod_errors(Q, r_max: Optional[int] = None, Q_test=None) -> np.ndarray:
    """Relative POD error for ranks ``1..r_max``.

    On the training data this is ``sqrt(sum_{i>r} s_i^2) / ||Q||_F``,
    computed from reversed cumulative sums for accuracy. With ``Q_test``
    the error of projecting ``Q_test`` onto the training basis.
    """
    Q = _check_snapshots(Q)
    U, s, _ = scipy.linalg.svd(Q, full_matrices=False)
    r_max = s.size if r_max is None else min(int(r_max), s.size)
    if Q_test is None:
        tail = np.cumsum((s * s)[::-1])[::-1]
        tail = np.append(tail, 0.0)
        return np.sqrt(np.maximum(tail[1:r_max + 1], 0.0)) / np.linalg.norm(Q)
    Q_test = np.asarray(Q_test, dtype=float)
    C = U[:, :r_max].T @ Q_test
    nt2 = np.linalg.norm(Q_test) ** 2
    resid2 = nt2 - np.cumsum(np.sum(C * C, axis=1))
    return np.sqrt(np.maximum(resid2, 0.0) / nt2)


def projection_error(Q_test, rmap, a_guess=None, max_iter: int = 50, tol: float = 1e-9,
                     return_details: bool = False):
    """Relative error of the best manifold fit of each test column.

    Each column is fitted by Gauss-Newton ``min_a ||q - g(a)||``.
    ``a_guess`` is an ``(N, r)`` array of initial amplitudes; without it
    each column is warm-started from the previous column's fit, the first
    one from a linear estimate.
    """
    from .rom import fit_initial_condition, linear_guess

    Q_test = _check_snapshots(Q_test)
    N = Q_test.shape[1]
    a_all = np.zeros((N, rmap.rank))
    flagged = []
    prev = None
    for j in range(N):
        q = Q_test[:, j]
        if a_guess is not None:
            g0 = np.asarray(a_guess[j], dtype=float)
        elif prev is not None:
            g0 = prev
        else:
            g0 = linear_guess(rmap, q)
        a, info = fit_initial_condition(rmap, q, g0, max_iter=max_iter, tol=tol, return_info=True)
        if not info["converged"]:
            flagged.append(j)
        a_all[j] = a
        prev = a
    Qfit = rmap.decode(a_all.T)
    err = relative_error(Q_test, Qfit)
    if return_details:
        return err, {"amplitudes": a_all, "flagged": flagged, "fit": Qfit}
    return err


def decay_rate_fit(front_width_ratio: float, M: int = 1000, n_t: int = 500,
                   n_max: Optional[int] = None, floor: float = 1e-12) -> float:
    """Exponential decay rate ``beta`` of POD errors for a traveling front.

    Fits ``ln err_n ~ c - beta n`` over ``n = 1..n_max`` where
    ``err_n > floor``.
    """
    from .fom.snapshots import traveling_front_snapshots

    Q = traveling_front_snapshots(front_width_ratio, M, n_t).states
    err = pod_errors(Q, n_max)
    n = np.arange(1, err.size + 1)
    ok = err > floor
    if ok.sum() < 3:
        raise ValueError("fewer than 3 usable POD error values for the fit")
    slope, _ = np.polyfit(n[ok], np.log(err[ok]), 1)
    return float(-slope)
