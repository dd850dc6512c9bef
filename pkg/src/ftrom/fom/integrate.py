"""Adaptive Dormand-Prince 5(4) integrator with dense output."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from ..errors import IntegrationError

C = np.array([0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1, 1])
A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
B = np.array([35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0])
# 5th minus embedded 4th order weights
E = np.array([71 / 57600, 0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40])
# dense output polynomial coefficients (Shampine), powers theta^1..theta^4
P = np.array([
    [1, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
    [0, 0, 0, 0],
    [0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
    [0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
    [0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
    [0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
    [0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
])

SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 10.0
UNDERFLOW = 1e-14


@dataclass
class OdeResult:
    """Solution sampled at ``t``; ``y[:, j]`` is the state at ``t[j]``."""

    t: np.ndarray
    y: np.ndarray
    nfev: int
    n_accepted: int
    n_rejected: int


def _rms(x):
    return float(np.sqrt(np.mean(x * x)))


def _initial_step(fun, t0, y0, f0, direction, rtol, atol, span):
    scale = atol + rtol * np.abs(y0)
    d0, d1 = _rms(y0 / scale), _rms(f0 / scale)
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h0 = min(h0, span)
    f1 = fun(t0 + direction * h0, y0 + direction * h0 * f0)
    d2 = _rms((f1 - f0) / scale) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** 0.2
    return min(100 * h0, h1, span)


def dopri5(
    fun: Callable,
    t_span,
    y0,
    t_eval=None,
    rtol: float = 1e-6,
    atol: float = 1e-8,
    max_step: float = np.inf,
    first_step: Optional[float] = None,
    on_step: Optional[Callable] = None,
) -> OdeResult:
    """Integrate ``y' = fun(t, y)`` over ``t_span``.

    Parameters
    ----------
    fun : callable
        ``fun(t, y) -> dy/dt`` for a 1D state vector.
    t_span : (t0, tf)
    y0 : array_like
    t_eval : array_like, optional
        Output times inside ``t_span``, evaluated by dense output.
        Defaults to ``[t0, tf]``.
    rtol, atol : float
        Per-step error tolerances.
    on_step : callable, optional
        Called as ``on_step(t, y)`` after every accepted step. Used by the
        hyper-reduced ROM to refresh its sample set.

    Raises
    ------
    IntegrationError
        If the step size underflows ``1e-14 * span`` or the state becomes
        non-finite.
    """
    if rtol <= 0 or atol <= 0:
        raise ValueError("rtol and atol must be positive")
    t0, tf = map(float, t_span)
    if tf == t0:
        raise ValueError("empty time span")
    direction = 1.0 if tf > t0 else -1.0
    span = abs(tf - t0)
    y = np.array(y0, dtype=float)
    if not np.all(np.isfinite(y)):
        raise IntegrationError("non-finite initial state", t0)
    t_eval = np.array([t0, tf] if t_eval is None else t_eval, dtype=float)
    if np.any(direction * np.diff(t_eval) < 0):
        raise ValueError("t_eval must be sorted in the integration direction")
    if np.any(direction * (t_eval - t0) < -1e-12 * span) or np.any(direction * (tf - t_eval) < -1e-12 * span):
        raise ValueError("t_eval outside t_span")

    nfev = 0

    def f(t, x):
        nonlocal nfev
        nfev += 1
        return np.asarray(fun(t, x), dtype=float)

    out = np.empty((y.size, t_eval.size))
    k_out = 0
    while k_out < t_eval.size and t_eval[k_out] == t0:
        out[:, k_out] = y
        k_out += 1

    f0 = f(t0, y)
    h = first_step if first_step is not None else _initial_step(f, t0, y, f0, direction, rtol, atol, span)
    h = min(h, max_step)
    K = np.empty((7, y.size))
    t = t0
    n_acc = n_rej = 0
    err_exp = -1.0 / 5.0
    rejected = False
    while direction * (tf - t) > 0:
        if h < UNDERFLOW * span:
            raise IntegrationError("step size underflow", t)
        h = min(h, abs(tf - t))
        t_new = t + direction * h
        if direction * (t_new - tf) > 0 or abs(tf - t_new) < UNDERFLOW * span:
            t_new = tf
        hs = t_new - t
        K[0] = f0
        for s in range(1, 6):
            dy = hs * (np.asarray(A[s]) @ K[:s])
            K[s] = f(t + C[s] * hs, y + dy)
        y_new = y + hs * (B[:6] @ K[:6])
        K[6] = f(t_new, y_new)
        if not np.all(np.isfinite(y_new)) or not np.all(np.isfinite(K[6])):
            h *= MIN_FACTOR
            n_rej += 1
            if h < UNDERFLOW * span:
                raise IntegrationError("non-finite state", t)
            continue
        scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
        err = _rms(hs * (E @ K) / scale)
        if err <= 1.0:
            factor = MAX_FACTOR if err == 0 else min(MAX_FACTOR, SAFETY * err ** err_exp)
            if rejected:
                factor = min(factor, 1.0)
            rejected = False
            # dense output for every requested time in (t, t_new]
            while k_out < t_eval.size and direction * (t_eval[k_out] - t_new) <= 0:
                th = (t_eval[k_out] - t) / hs
                powers = th ** np.arange(1, 5)
                out[:, k_out] = y + hs * (K.T @ (P @ powers))
                k_out += 1
            t, y, f0 = t_new, y_new, K[6].copy()
            n_acc += 1
            if on_step is not None:
                on_step(t, y)
            h = min(abs(hs) * factor, max_step)
        else:
            n_rej += 1
            rejected = True
            h = abs(hs) * max(MIN_FACTOR, SAFETY * err ** err_exp)
    while k_out < t_eval.size:
        out[:, k_out] = y
        k_out += 1
    return OdeResult(t_eval, out, nfev, n_acc, n_rej)
