"""Dormand-Prince 5(4) stepper with dense output for complex vector ODEs.

Kept separate from the physics so that the master-equation solver can hook
into every accepted step (symmetrisation, trace control) and into every
output sample.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import StepFailure

C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0])
A = [
    np.array(row)
    for row in (
        [],
        [1 / 5],
        [3 / 40, 9 / 40],
        [44 / 45, -56 / 15, 32 / 9],
        [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
        [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    )
]
B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84])
# difference between the 5th order solution and the embedded 4th order one
E = np.array([-71 / 57600, 0.0, 71 / 16695, -71 / 1920, 17253 / 339200, -22 / 525, 1 / 40])
# Shampine's continuous extension; columns multiply theta, theta^2, theta^3, theta^4
P = np.array(
    [
        [1.0, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
        [0.0, 0.0, 0.0, 0.0],
        [0.0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
        [0.0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
        [0.0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
        [0.0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
        [0.0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
    ]
)

SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 10.0
ERR_EXPONENT = -1.0 / 5.0


def _rms(v):
    return math.sqrt(float(np.vdot(v, v).real) / v.size)


def _max_norm(v):
    # every component must meet its own tolerance; an RMS over the mostly
    # negligible entries of a density matrix lets the large ones drift
    return float(np.max(np.abs(v)))


def initial_step(f, t0, y0, f0, rtol, atol):
    """Starting step size estimate (Hairer, Norsett & Wanner, II.4)."""
    scale = atol + np.abs(y0) * rtol
    d0 = _rms(y0 / scale)
    d1 = _rms(f0 / scale)
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    f1 = f(t0 + h0, y0 + h0 * f0)
    d2 = _rms((f1 - f0) / scale) / h0
    if d1 <= 1e-15 and d2 <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1 / 5)
    return min(100 * h0, h1)


class DenseStep:
    """Interpolant over one accepted step."""

    __slots__ = ("t_old", "h", "y_old", "_K", "_Q")

    def __init__(self, t_old, h, y_old, K):
        self.t_old = t_old
        self.h = h
        self.y_old = y_old
        self._K = K
        self._Q = None

    def __call__(self, t):
        if self._Q is None:
            self._Q = self._K.T @ P
        theta = (t - self.t_old) / self.h
        powers = np.array([theta, theta**2, theta**3, theta**4])
        return self.y_old + self.h * (self._Q @ powers)


def integrate(
    f,
    y0,
    t_eval,
    rtol,
    atol,
    on_sample,
    after_step=None,
    min_step=1e-12,
    max_steps=10_000_000,
):
    """Integrate ``y' = f(t, y)`` from ``t_eval[0]`` over the sample grid.

    ``on_sample(i, y)`` is called for every grid point (in order).
    ``after_step(y, fy)`` may correct the accepted state in place; it must
    apply the same linear correction to ``fy = f(t, y)`` so that the
    first-same-as-last stage stays consistent without a new evaluation.
    Returns ``(n_accepted, n_rejected)``.
    """
    t_eval = np.asarray(t_eval, dtype=float)
    y = np.array(y0, dtype=complex)
    t = float(t_eval[0])
    t_end = float(t_eval[-1])
    on_sample(0, y)
    if t_eval.size == 1:
        return 0, 0

    fy = f(t, y)
    h = initial_step(f, t, y, fy, rtol, atol)
    K = np.empty((7, y.size), dtype=complex)
    next_sample = 1
    n_acc = n_rej = 0
    while next_sample < t_eval.size:
        if n_acc + n_rej >= max_steps:
            raise StepFailure(f"exceeded {max_steps} steps at t={t:.6g}")
        h = min(h, t_end - t)
        if h < min_step * max(1.0, abs(t)):
            raise StepFailure(f"step size underflow (h={h:.3e}) at t={t:.6g}")
        K[0] = fy
        for s in range(1, 6):
            K[s] = f(t + C[s] * h, y + (h * A[s]) @ K[:s])
        y_new = y + (h * B) @ K[:6]
        f_new = f(t + h, y_new)
        K[6] = f_new
        err = (h * E) @ K
        scale = np.maximum(np.abs(y), np.abs(y_new))
        scale *= rtol
        scale += atol
        err /= scale
        err_norm = _max_norm(err)
        if not math.isfinite(err_norm):
            n_rej += 1
            h *= MIN_FACTOR
            continue
        if err_norm > 1.0:
            n_rej += 1
            h *= max(MIN_FACTOR, SAFETY * err_norm**ERR_EXPONENT)
            continue

        n_acc += 1
        t_new = t + h
        if next_sample < t_eval.size and t_eval[next_sample] <= t_new + 1e-12 * max(1.0, t_new):
            dense = DenseStep(t, h, y, K.copy())
            while next_sample < t_eval.size and t_eval[next_sample] <= t_new + 1e-12 * max(1.0, t_new):
                ts = t_eval[next_sample]
                ys = y_new if abs(ts - t_new) <= 1e-12 * max(1.0, t_new) else dense(ts)
                on_sample(next_sample, ys)
                next_sample += 1
        if after_step is not None:
            after_step(y_new, f_new)
        t, y, fy = t_new, y_new, f_new
        factor = MAX_FACTOR if err_norm == 0.0 else min(MAX_FACTOR, SAFETY * err_norm**ERR_EXPONENT)
        h *= max(MIN_FACTOR, factor)
    return n_acc, n_rej
