"""Truncated Fock-space operators, model parameters and initial states.

Two truncation frames are supported:

``"fock"``
    The bare Fock basis of the cavity mode, ``a|n> = sqrt(n)|n-1>``.

``"normal_mode"``
    The Fock basis of the Bogoliubov mode ``b = cosh(r) a - sinh(r) a^dag``
    with ``r = -ln(1 - g^2)/4``, in which the normal-phase Hamiltonian is
    diagonal, ``H_np = omega*sqrt(1-g^2)*(b^dag b + 1/2)``.  Close to the
    critical point the field state is strongly squeezed in the bare basis but
    only moderately in this one, so far fewer levels are needed.

All operators of an :class:`OperatorSet` (``a``, ``x``, ``p``...) always
represent the *physical* cavity operators; only the basis they are written in
changes. Expectation values are therefore frame independent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy.linalg import expm

from .errors import ConfigError, DimensionMismatch, TruncationOverflow

FRAMES = ("fock", "normal_mode")

#: Fraction of the basis counted as the truncation "tail".
TAIL_FRACTION = 0.1
#: Default upper bound on the tail population.
TAIL_TOL = 1e-6


def delta_gap(g):
    """Energy gap parameter ``4(1 - g^2)``."""
    return 4.0 * (1.0 - np.square(g))


def thermal_nbar(kT_over_omega):
    """Bose-Einstein occupation ``1/(exp(omega/kT) - 1)``; returns 0 at kT = 0."""
    kT = float(kT_over_omega)
    if kT < 0:
        raise ConfigError("kT_over_omega must be non-negative")
    if kT == 0.0 or 1.0 / kT > 700.0:
        return 0.0
    return 1.0 / math.expm1(1.0 / kT)


def kT_from_nbar(nbar):
    """Inverse of :func:`thermal_nbar`: ``kT/omega = 1/ln(1 + 1/nbar)``."""
    nbar = float(nbar)
    if nbar < 0:
        raise ConfigError("nbar must be non-negative")
    if nbar == 0.0:
        return 0.0
    return 1.0 / math.log1p(1.0 / nbar)


def normal_mode_squeezing(g):
    """Squeezing parameter ``r`` relating the bare and normal-mode bases."""
    return -0.25 * math.log1p(-g * g)


@dataclass(frozen=True)
class ModelParams:
    g: float
    omega: float = 1.0
    trunc_dim: int = 60

    def __post_init__(self):
        if not (0.0 <= self.g < 1.0):
            raise ConfigError(f"g must satisfy 0 <= g < 1, got {self.g}", key="model.g")
        if not self.omega > 0:
            raise ConfigError("omega must be positive", key="model.omega")
        if int(self.trunc_dim) != self.trunc_dim or self.trunc_dim < 2:
            raise ConfigError("trunc_dim must be an integer >= 2", key="model.trunc_dim")

    @property
    def delta(self):
        return float(delta_gap(self.g))


@dataclass(frozen=True, eq=False)
class OperatorSet:
    dim: int
    a: np.ndarray
    a_dag: np.ndarray
    x: np.ndarray
    p: np.ndarray
    g_op: np.ndarray
    n_op: np.ndarray
    h_np: np.ndarray
    frame: str = "fock"
    #: squeezing parameter of the truncation basis (0 for the bare frame)
    frame_r: float = 0.0


def annihilation(dim):
    """Bare annihilation matrix, ``a[n-1, n] = sqrt(n)``."""
    return np.diag(np.sqrt(np.arange(1, dim, dtype=float)), k=1).astype(complex)


def build_operators(params: ModelParams, frame: str = "fock") -> OperatorSet:
    """Operator matrices for the normal-phase model.

    In the bare frame ``h_np = omega*(p @ p + (1 - g^2) x @ x)/2`` is built
    from the truncated quadratures.  In the normal-mode frame ``h_np`` is the
    exact projection of the Hamiltonian onto the retained levels, which is
    diagonal.
    """
    dim = int(params.trunc_dim)
    if dim < 2:
        raise ConfigError("trunc_dim must be >= 2", key="model.trunc_dim")
    if frame not in FRAMES:
        raise ConfigError(f"unknown frame {frame!r}", key="model.frame")

    w = params.omega
    if frame == "fock":
        a = annihilation(dim)
        r = 0.0
    else:
        r = normal_mode_squeezing(params.g)
        b = annihilation(dim)
        a = math.cosh(r) * b + math.sinh(r) * b.conj().T
    a_dag = a.conj().T
    x = (a + a_dag) / math.sqrt(2.0)
    p = 1j * (a_dag - a) / math.sqrt(2.0)
    g_op = x @ p + p @ x
    n_op = a_dag @ a
    if frame == "fock":
        h_np = w * (p @ p + (1.0 - params.g**2) * (x @ x)) / 2.0
    else:
        freq = w * math.sqrt(1.0 - params.g**2)
        h_np = np.diag(freq * (np.arange(dim) + 0.5)).astype(complex)
    return OperatorSet(dim, a, a_dag, x, p, g_op, n_op, h_np, frame, r)


@dataclass(frozen=True, eq=False)
class PureState:
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex).ravel()
        object.__setattr__(self, "amplitudes", amps)
        if amps.size < 2:
            raise ConfigError("state dimension must be >= 2")
        norm = np.linalg.norm(amps)
        if abs(norm - 1.0) > 1e-12:
            raise ConfigError(f"state is not normalised (norm={norm!r})")

    @property
    def dim(self):
        return self.amplitudes.size

    @classmethod
    def normalized(cls, amplitudes):
        amps = np.asarray(amplitudes, dtype=complex).ravel()
        return cls(amps / np.linalg.norm(amps))


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    matrix: np.ndarray

    def __post_init__(self):
        rho = np.asarray(self.matrix, dtype=complex)
        if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
            raise DimensionMismatch("density matrix must be square")
        object.__setattr__(self, "matrix", rho)

    @property
    def dim(self):
        return self.matrix.shape[0]

    @classmethod
    def from_pure(cls, state: PureState):
        psi = state.amplitudes
        return cls(np.outer(psi, psi.conj()))

    def hermiticity_error(self):
        return float(np.max(np.abs(self.matrix - self.matrix.conj().T)))

    def trace_error(self):
        return float(abs(np.trace(self.matrix) - 1.0))

    def min_eigenvalue(self):
        return float(np.linalg.eigvalsh(0.5 * (self.matrix + self.matrix.conj().T))[0])

    def validate(self, check_positivity=True):
        if self.hermiticity_error() > 1e-10:
            raise ConfigError("density matrix is not Hermitian")
        if self.trace_error() > 1e-9:
            raise ConfigError("density matrix does not have unit trace")
        if check_positivity and self.min_eigenvalue() < -1e-8:
            raise ConfigError("density matrix is not positive semidefinite")
        return self


State = Union[PureState, DensityMatrix]


def tail_population(populations, fraction=TAIL_FRACTION):
    """Summed population of the top ``fraction`` of basis levels."""
    pops = np.asarray(populations).real
    k = max(1, int(math.ceil(fraction * pops.size)))
    return float(pops[-k:].sum())


def standard_initial_state(dim) -> PureState:
    """Field state ``(|0> + i|1>)/sqrt(2)`` in the bare Fock basis."""
    if dim < 2:
        raise ConfigError("dimension must be >= 2")
    amps = np.zeros(dim, dtype=complex)
    amps[0] = 1.0 / math.sqrt(2.0)
    amps[1] = 1j / math.sqrt(2.0)
    return PureState(amps)


def fock_state(dim, n) -> PureState:
    amps = np.zeros(dim, dtype=complex)
    amps[n] = 1.0
    return PureState(amps)


def squeeze_operator(dim, xi):
    """``S(xi) = exp[(xi* a^2 - xi a^dag^2)/2]`` on the truncated bare space."""
    a = annihilation(dim)
    a2 = a @ a
    return expm(0.5 * (np.conj(xi) * a2 - xi * a2.conj().T))


def squeeze_state(state: PureState, xi, tail_tol=TAIL_TOL) -> PureState:
    """Apply ``S(xi)`` (real ``xi >= 0``) to a bare-frame state.

    Raises :class:`TruncationOverflow` when the squeezed state leaves more than
    ``tail_tol`` of its population in the top decile of levels.
    """
    xi = float(xi)
    if xi < 0:
        raise ConfigError("squeezing parameter must be non-negative", key="init.xi")
    if xi == 0.0:
        return state
    psi = squeeze_operator(state.dim, xi) @ state.amplitudes
    tail = tail_population(np.abs(psi) ** 2)
    if tail > tail_tol:
        raise TruncationOverflow(
            f"squeezed state (xi={xi}) has tail population {tail:.2e} at dim {state.dim}"
        )
    return PureState.normalized(psi)


def to_frame(state: PureState, ops: OperatorSet, tail_tol=TAIL_TOL) -> PureState:
    """Express a bare-frame state in the truncation basis of ``ops``.

    For the normal-mode frame the amplitudes are ``S(r) psi`` (``S`` in the
    convention of :func:`squeeze_operator`), evaluated on a padded space and
    then cut to ``ops.dim`` levels.
    """
    if ops.frame == "fock" or ops.frame_r == 0.0:
        if state.dim == ops.dim:
            return state
        psi = np.zeros(ops.dim, dtype=complex)
        n = min(ops.dim, state.dim)
        psi[:n] = state.amplitudes[:n]
        lost = 1.0 - np.linalg.norm(psi) ** 2
    else:
        work = 2 * max(ops.dim, state.dim) + 20
        padded = np.zeros(work, dtype=complex)
        padded[: state.dim] = state.amplitudes
        full = squeeze_operator(work, ops.frame_r) @ padded
        psi = full[: ops.dim]
        lost = 1.0 - np.linalg.norm(psi) ** 2
    tail = tail_population(np.abs(psi) ** 2)
    if lost > tail_tol or tail > tail_tol:
        raise TruncationOverflow(
            f"state does not fit {ops.dim} {ops.frame} levels "
            f"(tail {tail:.2e}, lost norm {lost:.2e})"
        )
    return PureState.normalized(psi)


def expectation(op, state: State) -> complex:
    op = np.asarray(op)
    if isinstance(state, PureState):
        psi = state.amplitudes
        if op.shape != (psi.size, psi.size):
            raise DimensionMismatch(f"operator {op.shape} vs state dim {psi.size}")
        return complex(np.vdot(psi, op @ psi))
    rho = state.matrix if isinstance(state, DensityMatrix) else np.asarray(state)
    if op.shape != rho.shape:
        raise DimensionMismatch(f"operator {op.shape} vs density matrix {rho.shape}")
    return complex(np.einsum("ij,ji->", op, rho))


def expectation_real(op, state: State) -> float:
    """Expectation of a Hermitian operator, discarding a <= 1e-10 imaginary part."""
    val = expectation(op, state)
    if abs(val.imag) > 1e-10 * max(1.0, abs(val.real)):
        raise ValueError(f"expectation has imaginary part {val.imag!r}")
    return val.real
