"""Power-law fits ``y = a x^b`` by least squares in log-log space."""

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateAbscissa, NonpositiveData


@dataclass(frozen=True)
class FitResult:
    a: float
    b: float
    rms_log_residual: float
    n_points: int

    def __call__(self, x):
        return self.a * np.asarray(x, dtype=float) ** self.b


def fit_power_law(x, y) -> FitResult:
    """Unweighted ordinary least squares on ``(ln x, ln y)``."""
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if x.shape != y.shape:
        raise ValueError("x and y must have the same length")
    if x.size < 3:
        raise ValueError("need at least 3 points")
    if np.any(~np.isfinite(x)) or np.any(~np.isfinite(y)) or np.any(x <= 0) or np.any(y <= 0):
        raise NonpositiveData("power-law fit needs strictly positive finite data")
    lx, ly = np.log(x), np.log(y)
    if np.ptp(lx) == 0.0:
        raise DegenerateAbscissa("all abscissae are equal")
    design = np.column_stack([np.ones_like(lx), lx])
    (intercept, slope), *_ = np.linalg.lstsq(design, ly, rcond=None)
    resid = ly - (intercept + slope * lx)
    return FitResult(float(np.exp(intercept)), float(slope), float(np.sqrt(np.mean(resid**2))), int(x.size))
