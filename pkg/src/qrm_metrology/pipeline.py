"""Evaluate F_g(t) for one parameter point.

The sensitivity needs ``<X>`` at ``g - dg``, ``g`` and ``g + dg``; the three
master-equation runs share one sample grid and one step-size sequence.  The
variance is taken from the nominal-``g`` run.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np

from .dynamics import IntegratorConfig, NoiseParams, Trajectory, evolve_batch
from .errors import ConfigError, TruncationOverflow
from .hilbert import (
    TAIL_FRACTION,
    DensityMatrix,
    ModelParams,
    PureState,
    annihilation,
    build_operators,
    normal_mode_squeezing,
    squeeze_operator,
    squeeze_state,
    standard_initial_state,
    to_frame,
)
from .metrology import FgSeries, chi_g, chi_g_richardson, inverted_variance
from .moments import InitialConditions, evolve_moments

log = logging.getLogger(__name__)

INIT_KINDS = ("standard", "squeezed", "custom")
BACKENDS = ("master", "moments")
MIN_DIM = 20
MAX_DIM = 320


@dataclass(frozen=True)
class InitSpec:
    """Initial field state before any frame change (bare Fock basis)."""

    kind: str = "standard"
    xi: float = 0.0
    amplitudes: tuple = ()

    def __post_init__(self):
        if self.kind not in INIT_KINDS:
            raise ConfigError(f"unknown init type {self.kind!r}", key="init.type")
        if self.xi < 0:
            raise ConfigError("xi must be non-negative", key="init.xi")
        if self.kind == "custom" and len(self.amplitudes) < 2:
            raise ConfigError("custom init needs at least two amplitudes", key="init.amplitudes")

    def prepare(self, tail_tol=1e-6) -> PureState:
        if self.kind == "custom":
            return PureState.normalized(np.asarray(self.amplitudes, dtype=complex))
        if self.kind == "standard" or self.xi == 0.0:
            return standard_initial_state(2)
        dim = 40
        while True:
            try:
                return squeeze_state(standard_initial_state(dim), self.xi, tail_tol)
            except TruncationOverflow:
                if dim >= 4 * MAX_DIM:
                    raise
                dim = int(dim * 1.5)


def resolve_frame(frame, noise: NoiseParams):
    """``auto`` picks the normal-mode basis for single-photon relaxation and
    the bare basis for two-photon relaxation, whose jump operator ``a^2`` is
    diagonal-dominated (and far less stiff) in the bare basis."""
    if frame == "auto":
        return "normal_mode" if noise.kind == "single_photon" else "fock"
    if frame not in ("fock", "normal_mode"):
        raise ConfigError(f"unknown frame {frame!r}", key="model.frame")
    return frame


def _required_dim(pops, target):
    """Smallest N whose top-decile (plus everything above N) holds < target."""
    tail_from = np.cumsum(pops[::-1])[::-1]
    for n in range(MIN_DIM, pops.size):
        k = n - max(1, int(math.ceil(TAIL_FRACTION * n)))
        if tail_from[k] < target:
            return n
    return None


@lru_cache(maxsize=8)
def _squeeze_eig(work):
    """Eigenbasis of ``i (a^2 - a^dag^2) / 2`` so that ``S(z) = V exp(-i z w) V^dag``."""
    a = annihilation(work)
    herm = 0.5j * (a @ a - a.T @ a.T)
    return np.linalg.eigh(herm)


@lru_cache(maxsize=1024)
def _gaussian_pops(n_th, zeta, work):
    k = np.arange(work)
    thermal = (n_th / (n_th + 1.0)) ** k / (n_th + 1.0) if n_th > 0 else (k == 0).astype(float)
    if zeta == 0.0:
        return thermal
    w, V = _squeeze_eig(work)
    S = (V * np.exp(-1j * zeta * w)) @ V.conj().T
    return (np.abs(S) ** 2) @ thermal


def _frame_scale(g, frame):
    return 1.0 if frame == "fock" else math.sqrt(1.0 - g * g)


def gaussian_dim(moments_row, g, frame, target):
    """Truncation needed by a centred Gaussian state with the same covariance.

    The mean is ignored: a displacement adds a Poissonian spread, much
    narrower than the thermal one it would mimic, and the exact initial state
    (which carries the displacement) is sized separately.
    """
    s = _frame_scale(g, frame)
    ex, ep, exx, epp, eg = moments_row
    vy = s * (exx - ex * ex)
    vq = (epp - ep * ep) / s
    cyq = 0.5 * eg - ex * ep
    det = max(vy * vq - cyq * cyq, 0.25)
    nu = math.sqrt(det)
    tr = vy + vq
    lam_hi = 0.5 * (tr + math.sqrt(max(tr * tr - 4 * det, 0.0)))
    zeta = 0.25 * math.log(lam_hi * lam_hi / det)
    n_th = max(nu - 0.5, 0.0)
    # rounding up to a coarse grid keeps the cache effective
    n_th = math.ceil(n_th * 20) / 20
    zeta = math.ceil(zeta * 20) / 20
    work = 160
    while True:
        n = _required_dim(_gaussian_pops(n_th, zeta, work), target)
        if n is not None and n < work // 2:
            return n
        if work >= 2 * MAX_DIM:
            return MAX_DIM
        work *= 2


def state_dim(state: PureState, g, frame, target):
    """Truncation needed by a pure bare-frame state written in ``frame``."""
    work = max(2 * state.dim + 40, 160)
    while True:
        padded = np.zeros(work, dtype=complex)
        padded[: state.dim] = state.amplitudes
        if frame == "normal_mode":
            padded = squeeze_operator(work, normal_mode_squeezing(g)) @ padded
        n = _required_dim(np.abs(padded) ** 2, target)
        if n is not None and n < work // 2:
            return n
        if work >= 2 * MAX_DIM:
            return MAX_DIM
        work *= 2


def suggest_trunc_dim(model: ModelParams, noise: NoiseParams, state: PureState, frame, horizon, tail_tol=1e-6):
    """Heuristic truncation for a run; the tail guard remains the arbiter.

    Single-photon runs use the exact moment trajectory and size the basis for
    Gaussian states with the same covariance; two-photon runs start from the
    fixed defaults of 60 (nbar <= 1) or 100 levels.
    """
    target = tail_tol / 4.0
    need = state_dim(state, model.g, frame, target)
    if noise.kind == "single_photon":
        init = InitialConditions.from_state(state)
        # resolve the rotation of the covariance ellipse (period pi / (s w))
        period = math.pi / (math.sqrt(1.0 - model.g**2) * model.omega)
        n = int(min(4000, max(50, 8 * horizon / period)))
        times = np.concatenate([np.linspace(0.0, horizon, n), [50.0 * horizon]])
        for row in evolve_moments(init, model, noise, times)[1:]:
            need = max(need, gaussian_dim(row, model.g, frame, target))
    else:
        need = max(need, 60 if noise.nbar <= 1 else 100)
    need = int(math.ceil(1.05 * need / 5.0) * 5)
    return min(max(need, MIN_DIM), MAX_DIM)


@dataclass(eq=False)
class PointResult:
    series: FgSeries
    trajectories: list
    model: ModelParams
    noise: NoiseParams
    frame: str
    backend: str
    attempts: list = field(default_factory=list)

    @property
    def trunc_dim(self):
        return self.model.trunc_dim

    def diagnostics(self):
        trs = self.trajectories
        return {
            "trunc_dim": self.model.trunc_dim,
            "frame": self.frame,
            "backend": self.backend,
            "max_trace_dev": float(max(np.max(t.trace_dev) for t in trs)),
            "max_herm_dev": float(max(np.max(t.herm_dev) for t in trs)),
            "max_tail": float(max(np.max(t.tail) for t in trs)),
            "min_eig": float(min(np.nanmin(t.min_eig) if np.any(~np.isnan(t.min_eig)) else 0.0 for t in trs)),
        }


def _gs(g, delta_g, richardson):
    if g - delta_g < 0 or g + delta_g >= 1:
        raise ConfigError("g +- delta_g must stay inside [0, 1)", key="metrology.delta_g")
    if richardson:
        return [g - delta_g, g - delta_g / 2, g, g + delta_g / 2, g + delta_g]
    return [g - delta_g, g, g + delta_g]


def _series(trajs, delta_g, richardson):
    if richardson:
        coarse = chi_g(trajs[0], trajs[2], trajs[4], delta_g)
        fine = chi_g(trajs[1], trajs[2], trajs[3], delta_g / 2)
        chi = chi_g_richardson(coarse, fine)
        mid = trajs[2]
    else:
        chi = chi_g(trajs[0], trajs[1], trajs[2], delta_g)
        mid = trajs[1]
    chi = np.where(mid.times == 0.0, 0.0, chi)
    return inverted_variance(chi, mid.var_x, mid.times)


def _moment_trajectory(init: InitialConditions, model, noise, times):
    m = evolve_moments(init, model, noise, times)
    z = np.zeros(times.size)
    return Trajectory(times, m, z, z.copy(), z.copy(), np.full(times.size, np.nan), {"backend": "moments"})


def evaluate_point(
    model: ModelParams,
    noise: NoiseParams,
    init: InitSpec = InitSpec(),
    integ: IntegratorConfig = IntegratorConfig(),
    delta_g=1e-4,
    frame="auto",
    backend="master",
    auto_trunc=True,
    richardson=False,
    times=None,
) -> PointResult:
    """Compute the F_g(t) series for one (model, noise, init) point.

    With ``auto_trunc`` the truncation in ``model`` is replaced by
    :func:`suggest_trunc_dim` and grown by 30% whenever the tail guard trips.
    """
    if backend not in BACKENDS:
        raise ConfigError(f"unknown backend {backend!r}", key="run.backend")
    state = init.prepare(integ.tail_tol)
    times = integ.grid(noise) if times is None else np.asarray(times, dtype=float)
    gs = _gs(model.g, delta_g, richardson)
    frame = resolve_frame(frame, noise)

    if backend == "moments":
        ic = InitialConditions.from_state(state)
        trajs = [_moment_trajectory(ic, replace(model, g=g), noise, times) for g in gs]
        return PointResult(_series(trajs, delta_g, richardson), trajs, model, noise, "none", backend)

    dim = model.trunc_dim
    if auto_trunc:
        dim = suggest_trunc_dim(model, noise, state, frame, times[-1], integ.tail_tol)
    attempts = []
    while True:
        m = replace(model, trunc_dim=dim)
        ops_list = [build_operators(replace(m, g=g), frame) for g in gs]
        try:
            rhos = [DensityMatrix.from_pure(to_frame(state, ops, integ.tail_tol)) for ops in ops_list]
            log.debug("evolving g=%s kappa=%s nbar=%s at dim %d (%s)", m.g, noise.kappa, noise.nbar, dim, frame)
            trajs = evolve_batch(rhos, ops_list, noise, integ, times)
        except TruncationOverflow as exc:
            attempts.append((dim, str(exc)))
            if not auto_trunc or dim >= MAX_DIM:
                raise
            dim = min(MAX_DIM, int(math.ceil(1.3 * dim / 5.0) * 5))
            log.info("truncation overflow, retrying with dim %d", dim)
            continue
        attempts.append((dim, "ok"))
        return PointResult(_series(trajs, delta_g, richardson), trajs, m, noise, frame, backend, attempts)
