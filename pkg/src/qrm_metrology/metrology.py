"""Precision quantities: sensitivity, inverted variance, its maximum, and the QFI."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, GapTooSmall, NonpositiveVariance, PeakAtBoundary
from .hilbert import ModelParams


@dataclass(eq=False)
class FgSeries:
    times: np.ndarray
    fg: np.ndarray
    chi: np.ndarray
    var_x: np.ndarray


@dataclass(frozen=True)
class MaxResult:
    t_star: float
    fg_max: float
    refined: bool
    index: int


def chi_g(traj_minus, traj_0, traj_plus, delta_g):
    """Central difference ``(<X>_{g+d} - <X>_{g-d}) / (2 d)`` per sample."""
    if not delta_g > 0:
        raise ConfigError("delta_g must be positive")
    for tr in (traj_minus, traj_plus):
        if tr.times.shape != traj_0.times.shape or not np.array_equal(tr.times, traj_0.times):
            raise ConfigError("trajectories do not share a time grid")
    return (traj_plus.ex - traj_minus.ex) / (2.0 * delta_g)


def chi_g_richardson(chi_coarse, chi_fine):
    """Combine central differences at ``d`` and ``d/2`` into an O(d^4) estimate."""
    return (4.0 * np.asarray(chi_fine) - np.asarray(chi_coarse)) / 3.0


def inverted_variance(chi, var_x, times=None) -> FgSeries:
    chi = np.asarray(chi, dtype=float)
    var_x = np.asarray(var_x, dtype=float)
    if chi.shape != var_x.shape:
        raise ConfigError("chi and var_x must have the same shape")
    if np.any(var_x <= 0):
        i = int(np.argmax(var_x <= 0))
        raise NonpositiveVariance(f"variance of X is {var_x[i]!r} at sample {i}")
    times = np.arange(chi.size, dtype=float) if times is None else np.asarray(times, dtype=float)
    return FgSeries(times, chi**2 / var_x, chi, var_x)


def _parabola_peak(ts, fs, i):
    """Vertex of the parabola through samples ``i-1, i, i+1``."""
    t0, t1, t2 = ts[i - 1], ts[i], ts[i + 1]
    f0, f1, f2 = fs[i - 1], fs[i], fs[i + 1]
    denom = (t0 - t1) * (t0 - t2) * (t1 - t2)
    a = (t2 * (f1 - f0) + t1 * (f0 - f2) + t0 * (f2 - f1)) / denom
    b = (t2 * t2 * (f0 - f1) + t1 * t1 * (f2 - f0) + t0 * t0 * (f1 - f2)) / denom
    if a >= 0:
        return t1, f1
    tv = -b / (2 * a)
    if not (t0 <= tv <= t2):
        return t1, f1
    c = f1 - a * t1 * t1 - b * t1
    fv = a * tv * tv + b * tv + c
    return (tv, fv) if fv >= f1 else (t1, f1)


def refine_peak(times, values, i) -> MaxResult:
    if 0 < i < len(values) - 1:
        t, f = _parabola_peak(times, values, i)
        return MaxResult(float(t), float(f), True, int(i))
    return MaxResult(float(times[i]), float(values[i]), False, int(i))


def max_inverted_variance(series: FgSeries, boundary_fraction=0.05) -> MaxResult:
    """Global maximum over the horizon, refined by a three-point parabola.

    Raises :class:`PeakAtBoundary` if the best sample lies in the last
    ``boundary_fraction`` of the horizon.
    """
    fg = np.asarray(series.fg)
    if fg.size == 0:
        raise ConfigError("empty series")
    i = int(np.argmax(fg))
    t = series.times
    if t[i] >= t[0] + (1.0 - boundary_fraction) * (t[-1] - t[0]):
        raise PeakAtBoundary(f"maximum at t={t[i]:.6g} lies in the last {boundary_fraction:.0%} of the horizon")
    return refine_peak(t, fg, i)


def local_maxima(series: FgSeries, min_rel_height=1e-6):
    """Refined interior local maxima, ignoring numerical ripples near zero."""
    fg = np.asarray(series.fg)
    if fg.size < 3:
        return []
    floor = min_rel_height * fg.max()
    idx = np.flatnonzero((fg[1:-1] > fg[:-2]) & (fg[1:-1] >= fg[2:]) & (fg[1:-1] > floor)) + 1
    return [refine_peak(series.times, fg, int(i)) for i in idx]


def qfi(params: ModelParams, t, var_p0):
    """``16 g^2 [sin(sqrt(D) w t) - sqrt(D) w t]^2 / D^3 * Var P(0)``."""
    d = params.delta
    if d < 1e-12:
        raise GapTooSmall(f"gap {d!r} too small")
    phase = math.sqrt(d) * params.omega * np.asarray(t, dtype=float)
    return 16.0 * params.g**2 * (np.sin(phase) - phase) ** 2 / d**3 * var_p0
