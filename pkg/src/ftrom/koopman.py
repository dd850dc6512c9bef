"""Fourier-Koopman forecasting of quasi-periodic reduced amplitudes.

The amplitudes are modelled as ``a(t) = A @ Omega(t)`` with
``Omega(t) = (cos(w t), sin(w t))`` stacked over ``p/2`` frequencies.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class KoopmanModel:
    A: np.ndarray
    omega: np.ndarray
    residual: float = np.nan
    history: tuple = field(default=(), repr=False)
    poor_fit: bool = False

    @property
    def p(self) -> int:
        return 2 * self.omega.size

    def to_record(self) -> dict:
        return {"p": self.p, "omega": self.omega.tolist(), "A": self.A.ravel().tolist(), "r": self.A.shape[0]}

    @classmethod
    def from_record(cls, rec: dict) -> "KoopmanModel":
        A = np.asarray(rec["A"], dtype=float).reshape(rec["r"], rec["p"])
        return cls(A, np.asarray(rec["omega"], dtype=float))


def features(omega, t) -> np.ndarray:
    """``Omega(t)`` as an array of shape ``(len(t), p)``."""
    wt = np.outer(np.atleast_1d(t), omega)
    return np.hstack([np.cos(wt), np.sin(wt)])


def _solve(omega, t, X):
    F = features(omega, t)
    C, *_ = np.linalg.lstsq(F, X, rcond=None)
    R = X - F @ C
    return C.T, float(np.sum(R * R))


def _fft_peak(R, dt, pad, exclude, min_sep):
    """Frequency of the largest peak of the summed power spectrum of ``R``."""
    nfft = int(pad * R.shape[0])
    power = (np.abs(np.fft.rfft(R, n=nfft, axis=0)) ** 2).sum(axis=1)
    freqs = 2.0 * np.pi * np.fft.rfftfreq(nfft, dt)
    for i in np.argsort(power, kind="stable")[::-1]:
        if all(abs(freqs[i] - w) > min_sep for w in exclude):
            return float(freqs[i])
    return float(freqs[-1])


def _golden(fun, a, b, tol):
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = fun(c), fun(d)
    while abs(b - a) > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = fun(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = fun(d)
    return (c, fc) if fc < fd else (d, fd)


def fit(samples, times, p: int, sweep_resolution: int = 8, max_sweeps: int = 20,
        init_omega: Optional[np.ndarray] = None, tol: float = 1e-12) -> KoopmanModel:
    """Fit frequencies and coefficients to amplitude time series.

    Parameters
    ----------
    samples : (N, r) array
        Amplitudes ``a(t_n)``, one row per time.
    times : (N,) array
        Equispaced sample times.
    p : int
        Even number of features; ``p/2`` frequencies are fitted.
    sweep_resolution : int
        Zero-padding factor of the FFT used for initial frequencies.
    init_omega : array, optional
        Frequencies to start from; remaining slots are filled greedily.

    Returns
    -------
    KoopmanModel
        ``history`` holds one tuple of per-sweep residuals for each
        refinement stage.

    Notes
    -----
    Frequencies are added greedily: each new one starts at the largest
    peak of the zero-padded power spectrum of the current residual
    (summed over channels, DC included). After each addition all
    frequencies are refined one at a time by golden-section search over
    one zero-padded bin either side, re-solving the coefficients in
    closed form for each probe. A move is only accepted if it lowers
    the residual, so the residual never increases.
    """
    X = np.asarray(samples, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    t = np.asarray(times, dtype=float)
    if t.size != X.shape[0]:
        raise ValueError("times and samples disagree in length")
    if p < 2 or p % 2:
        raise ValueError("p must be a positive even number")
    k = p // 2
    if k > X.shape[0] / 4:
        raise ValueError(f"p/2 = {k} exceeds N/4 = {X.shape[0] / 4}")
    dt = np.diff(t)
    if dt.size == 0 or np.max(np.abs(dt - dt.mean())) > 1e-9 * max(abs(dt.mean()), 1e-300):
        raise ValueError("times must be equispaced")
    dt = float(dt.mean())
    bin_w = 2.0 * np.pi / (X.shape[0] * dt)

    # search +-1 padded bin around each peak
    width = bin_w / sweep_resolution
    min_sep = 0.5 * width

    def refine(omega, res):
        history = [res]
        for _ in range(max_sweeps):
            start = res
            for i in range(omega.size):
                def obj(w, i=i):
                    trial = omega.copy()
                    trial[i] = w
                    return _solve(trial, t, X)[1]

                lo = max(0.0, omega[i] - width)
                hi = omega[i] + width
                w_new, r_new = _golden(obj, lo, hi, 1e-10 * max(1.0, omega[i]))
                if r_new < res:
                    omega[i] = w_new
                    res = r_new
            history.append(res)
            if start - res <= tol * max(start, 1e-300):
                break
        return omega, res, history

    omega = np.array([] if init_omega is None else init_omega, dtype=float)[:k]
    history = []
    if omega.size:
        omega, res, h = refine(omega, _solve(omega, t, X)[1])
        history.append(tuple(h))
    while omega.size < k:
        # greedy: next frequency from the spectrum of the current residual
        if omega.size:
            Ak, _ = _solve(omega, t, X)
            R = X - features(omega, t) @ Ak.T
        else:
            R = X
        w = _fft_peak(R, dt, sweep_resolution, omega, min_sep)
        omega = np.append(omega, w)
        omega, res, h = refine(omega, _solve(omega, t, X)[1])
        history.append(tuple(h))
    A, res = _solve(omega, t, X)
    poor = np.sqrt(res) > 0.5 * np.linalg.norm(X)
    return KoopmanModel(A, omega, res, tuple(history), bool(poor))


def forecast(model: KoopmanModel, t) -> np.ndarray:
    """``A @ Omega(t)``: shape ``(r,)`` for scalar ``t``, else ``(r, len(t))``."""
    F = features(model.omega, t)
    out = model.A @ F.T
    return out[:, 0] if np.ndim(t) == 0 else out
