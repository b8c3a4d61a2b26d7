"""Closed second-order moment equations for single-photon relaxation.

For the quadratic normal-phase Hamiltonian with linear jump operators ``a``
and ``a^dag`` the equations for ``<X>, <P>, <X^2>, <P^2>, <G>`` (``G = XP +
PX``) close exactly, so everything here is exact rather than semiclassical in
the approximate sense.  The five moments are always ordered
``(ex, ep, exx, epp, eg)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from .dynamics import NoiseParams
from .errors import ClosureViolation, ConfigError, GapTooSmall
from .hilbert import ModelParams, PureState, annihilation, expectation_real

MOMENT_NAMES = ("ex", "ep", "exx", "epp", "eg")


@dataclass(frozen=True)
class MomentVector:
    ex: float
    ep: float
    exx: float
    epp: float
    eg: float

    def as_array(self):
        return np.array([self.ex, self.ep, self.exx, self.epp, self.eg])

    @classmethod
    def from_array(cls, arr):
        return cls(*(float(v) for v in arr))

    @property
    def var_x(self):
        return self.exx - self.ex**2

    @property
    def var_p(self):
        return self.epp - self.ep**2

    @property
    def cov_re(self):
        return 0.5 * self.eg - self.ex * self.ep


@dataclass(frozen=True)
class InitialConditions:
    x0: float
    p0: float
    var_x0: float
    var_p0: float
    cov_re0: float = 0.0

    def __post_init__(self):
        if not (self.var_x0 > 0 and self.var_p0 > 0):
            raise ConfigError("initial variances must be positive")

    @classmethod
    def from_state(cls, state: PureState):
        """Moments of a bare-frame field state."""
        # two spare levels keep X^2 and P^2 clear of the truncation edge
        amps = np.concatenate([state.amplitudes, np.zeros(2, dtype=complex)])
        state = PureState(amps)
        a = annihilation(state.dim)
        ad = a.conj().T
        x = (a + ad) / math.sqrt(2.0)
        p = 1j * (ad - a) / math.sqrt(2.0)
        ex = expectation_real(x, state)
        ep = expectation_real(p, state)
        exx = expectation_real(x @ x, state)
        epp = expectation_real(p @ p, state)
        eg = expectation_real(x @ p + p @ x, state)
        return cls(ex, ep, exx - ex**2, epp - ep**2, 0.5 * eg - ex * ep)

    @classmethod
    def from_moments(cls, m: MomentVector):
        return cls(m.ex, m.ep, m.var_x, m.var_p, m.cov_re)

    def moment_vector(self) -> MomentVector:
        return MomentVector(
            self.x0,
            self.p0,
            self.var_x0 + self.x0**2,
            self.var_p0 + self.p0**2,
            2.0 * (self.cov_re0 + self.x0 * self.p0),
        )


def _require_single_photon(noise: NoiseParams):
    if noise.kind != "single_photon":
        raise ClosureViolation("moment equations are closed only for single-photon relaxation")


def _linear_system(params: ModelParams, noise: NoiseParams):
    """Generator ``M`` and forcing ``c`` of ``dm/dt = M m + c``."""
    w = params.omega
    d = params.delta
    damp = noise.gamma_a - noise.gamma_h
    force = 0.5 * (noise.gamma_a + noise.gamma_h)
    M = np.zeros((5, 5))
    M[0, 0] = M[1, 1] = -0.5 * damp
    M[0, 1] = w
    M[1, 0] = -0.25 * d * w
    M[2, 2] = M[3, 3] = M[4, 4] = -damp
    M[2, 4] = w
    M[3, 4] = -0.25 * d * w
    M[4, 3] = 2.0 * w
    M[4, 2] = -0.5 * d * w
    c = np.array([0.0, 0.0, force, force, 0.0])
    return M, c


def moment_rhs(m, params: ModelParams, noise: NoiseParams):
    """Time derivatives of the five moments (array in, array out)."""
    _require_single_photon(noise)
    M, c = _linear_system(params, noise)
    m = m.as_array() if isinstance(m, MomentVector) else np.asarray(m, dtype=float)
    return M @ m + c


def evolve_moments(init: InitialConditions, params: ModelParams, noise: NoiseParams, times):
    """Exact moment trajectory sampled at ``times``, shape ``(len(times), 5)``.

    Uses the exponential of the generator augmented with the constant
    forcing, evaluated independently at every sample time.
    """
    _require_single_photon(noise)
    M, c = _linear_system(params, noise)
    aug = np.zeros((6, 6))
    aug[:5, :5] = M
    aug[:5, 5] = c
    m0 = np.append(init.moment_vector().as_array(), 1.0)
    times = np.asarray(times, dtype=float)
    out = np.empty((times.size, 5))
    for i, t in enumerate(times):
        out[i] = m0[:5] if t == 0.0 else (expm(aug * t) @ m0)[:5]
    return out


def stationary_moments(params: ModelParams, noise: NoiseParams) -> MomentVector:
    _require_single_photon(noise)
    if not noise.kappa > 0:
        raise ConfigError("stationary moments need kappa > 0", key="noise.kappa")
    if params.delta <= 0:
        raise GapTooSmall("stationary moments need a positive gap")
    M, c = _linear_system(params, noise)
    second = np.linalg.solve(M[2:, 2:], -c[2:])
    return MomentVector(0.0, 0.0, *second)


def _check_gap(params: ModelParams):
    if params.delta < 1e-12:
        raise GapTooSmall(f"gap {params.delta!r} too small")


def signal_factor(t, params: ModelParams, init: InitialConditions):
    """``A(t)``; the sensitivity is ``d<X>/dg = 2 g A(t) exp(-kappa t/2) / Delta^1.5``."""
    w, d = params.omega, params.delta
    sd = math.sqrt(d)
    t = np.asarray(t, dtype=float)
    half = 0.5 * sd * w * t
    return (d * w * t * init.x0 + 4.0 * init.p0) * np.sin(half) - 2.0 * sd * w * t * init.p0 * np.cos(half)


def coherent_noise_factor(t, params: ModelParams, init: InitialConditions):
    """``B(t)``, the noise-free part of ``4 Delta Var X(t)``."""
    w, d = params.omega, params.delta
    sd = math.sqrt(d)
    phase = sd * w * np.asarray(t, dtype=float)
    return (
        2.0 * d * (1.0 + np.cos(phase)) * init.var_x0
        + 8.0 * (1.0 - np.cos(phase)) * init.var_p0
        + 8.0 * sd * np.sin(phase) * init.cov_re0
    )


def bath_noise_factor(t, params: ModelParams, noise: NoiseParams):
    """``C(t)``, the bath-induced part of the variance (before the n-bar prefactor)."""
    w, d = params.omega, params.delta
    k = noise.kappa
    sd = math.sqrt(d)
    t = np.asarray(t, dtype=float)
    phase = sd * w * t
    return d * (d * w**2 + 4.0 * w**2 + 2.0 * k**2) * np.expm1(k * t) - (4.0 - d) * (
        k**2 * (1.0 - np.cos(phase)) + sd * w * k * np.sin(phase)
    )


def analytic_Fg(t, params: ModelParams, noise: NoiseParams, init: InitialConditions):
    """Closed-form inverted variance for single-photon relaxation.

    ``4 Delta^-2 (4 - Delta) A^2 / [B + (2 nbar + 1)/(Delta w^2 + kappa^2) C]``
    """
    _require_single_photon(noise)
    _check_gap(params)
    w, d = params.omega, params.delta
    A = signal_factor(t, params, init)
    B = coherent_noise_factor(t, params, init)
    C = bath_noise_factor(t, params, noise)
    denom = B + (2.0 * noise.nbar + 1.0) / (d * w**2 + noise.kappa**2) * C
    return 4.0 / d**2 * (4.0 - d) * A**2 / denom


def noise_free_max(params: ModelParams, m: int, init: InitialConditions):
    """``(tau, F_g(tau))`` for the m-th noise-free local maximum."""
    if m < 1:
        raise ConfigError("m must be >= 1")
    _check_gap(params)
    w, d, g = params.omega, params.delta, params.g
    tau = 2.0 * m * math.pi / (math.sqrt(d) * w)
    fg = 16.0 * g**2 * w**2 * tau**2 / d**2 * init.p0**2 / init.var_x0
    return tau, fg
