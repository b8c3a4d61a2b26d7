"""Lindblad master equation for the normal-phase model.

The density matrix is vectorised row-major, so that
``vec(A rho B) = kron(A, B.T) vec(rho)``, and the generator is assembled once
as a sparse superoperator.  Several evolutions sharing one sample grid (the
``g - dg, g, g + dg`` triple used for the sensitivity) can be advanced in
lockstep with a single step-size sequence, which keeps their discretisation
errors correlated and the finite difference smooth.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import integrator
from .errors import ConfigError, DiagnosticFailure, DimensionMismatch, TruncationOverflow
from .hilbert import TAIL_FRACTION, TAIL_TOL, DensityMatrix, OperatorSet

KINDS = ("single_photon", "two_photon")


@dataclass(frozen=True)
class NoiseParams:
    kappa: float
    nbar: float = 0.0
    kind: str = "single_photon"

    def __post_init__(self):
        kind = self.kind.replace("-", "_")
        object.__setattr__(self, "kind", kind)
        if kind not in KINDS:
            raise ConfigError(f"unknown relaxation kind {self.kind!r}", key="noise.kind")
        if not self.kappa >= 0:
            raise ConfigError(f"kappa must be >= 0, got {self.kappa}", key="noise.kappa")
        if not self.nbar >= 0:
            raise ConfigError(f"nbar must be >= 0, got {self.nbar}", key="noise.nbar")

    @property
    def gamma_a(self):
        return self.kappa * (self.nbar + 1.0)

    @property
    def gamma_h(self):
        return self.kappa * self.nbar


def default_horizon(kappa):
    return min(8.0 / kappa, 2000.0) if kappa > 0 else 2000.0


@dataclass(frozen=True)
class IntegratorConfig:
    """Integration settings; tolerances bound the local error of every
    density-matrix entry (max norm)."""

    rel_tol: float = 1e-8
    abs_tol: float = 1e-10
    t_max: float | None = None
    n_samples: int = 4000
    tail_tol: float = TAIL_TOL
    positivity_every: int = 10

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ConfigError("integrator tolerances must be positive", key="integrator.rel_tol")
        if self.n_samples < 2:
            raise ConfigError("n_samples must be >= 2", key="integrator.n_samples")
        if self.t_max is not None and not self.t_max > 0:
            raise ConfigError("t_max must be positive", key="integrator.t_max")

    def horizon(self, noise: NoiseParams):
        return self.t_max if self.t_max is not None else default_horizon(noise.kappa)

    def grid(self, noise: NoiseParams):
        return np.linspace(0.0, self.horizon(noise), self.n_samples)


@dataclass(eq=False)
class Trajectory:
    times: np.ndarray
    #: columns ex, ep, exx, epp, eg
    moments: np.ndarray
    trace_dev: np.ndarray
    herm_dev: np.ndarray
    tail: np.ndarray
    #: smallest eigenvalue, NaN where not checked
    min_eig: np.ndarray
    info: dict = field(default_factory=dict)

    ex = property(lambda self: self.moments[:, 0])
    ep = property(lambda self: self.moments[:, 1])
    exx = property(lambda self: self.moments[:, 2])
    epp = property(lambda self: self.moments[:, 3])
    eg = property(lambda self: self.moments[:, 4])

    @property
    def var_x(self):
        return self.exx - self.ex**2

    @property
    def var_p(self):
        return self.epp - self.ep**2


def _check_dims(L, rho):
    if L.shape != rho.shape:
        raise DimensionMismatch(f"operator {L.shape} vs density matrix {rho.shape}")


def dissipator(L, rho):
    """``L rho L^dag - (L^dag L rho + rho L^dag L)/2``."""
    rho = rho.matrix if isinstance(rho, DensityMatrix) else np.asarray(rho)
    L = np.asarray(L)
    _check_dims(L, rho)
    Ld = L.conj().T
    LdL = Ld @ L
    return L @ rho @ Ld - 0.5 * (LdL @ rho + rho @ LdL)


def jump_operators(ops: OperatorSet, noise: NoiseParams):
    """``[(rate, L), ...]`` for the relaxation kind, zero rates dropped."""
    if noise.kind == "single_photon":
        down, up = ops.a, ops.a_dag
    else:
        down, up = ops.a @ ops.a, ops.a_dag @ ops.a_dag
    return [(rate, L) for rate, L in ((noise.gamma_a, down), (noise.gamma_h, up)) if rate > 0]


def lindblad_rhs(rho, ops: OperatorSet, noise: NoiseParams):
    """Dense right-hand side ``-i[H, rho] + sum_k rate_k D[L_k] rho``."""
    rho = rho.matrix if isinstance(rho, DensityMatrix) else np.asarray(rho)
    _check_dims(ops.h_np, rho)
    out = -1j * (ops.h_np @ rho - rho @ ops.h_np)
    for rate, L in jump_operators(ops, noise):
        out = out + rate * dissipator(L, rho)
    return out


def liouvillian(ops: OperatorSet, noise: NoiseParams):
    """Sparse superoperator acting on row-major ``vec(rho)``."""
    H = sp.csr_matrix(ops.h_np)
    eye = sp.identity(ops.dim, dtype=complex, format="csr")
    gen = -1j * (sp.kron(H, eye) - sp.kron(eye, H.T))
    for rate, L in jump_operators(ops, noise):
        Ls = sp.csr_matrix(L)
        LdL = sp.csr_matrix(L.conj().T @ L)
        gen = gen + rate * (sp.kron(Ls, Ls.conj()) - 0.5 * sp.kron(LdL, eye) - 0.5 * sp.kron(eye, LdL.T))
    gen = gen.tocsr()
    gen.eliminate_zeros()
    return gen


class _Recorder:
    """Per-sample bookkeeping for one member of a lockstep batch."""

    def __init__(self, ops: OperatorSet, n, cfg: IntegratorConfig):
        d = ops.dim
        self.dim = d
        # Tr(O rho) = sum_ij O_ji rho_ij = O.T.ravel() . vec(rho)
        self.obs = np.array([o.T.ravel() for o in (ops.x, ops.p, ops.x @ ops.x, ops.p @ ops.p, ops.g_op)])
        self.diag = np.arange(d) * (d + 1)
        self.tail_start = d - max(1, int(math.ceil(TAIL_FRACTION * d)))
        self.cfg = cfg
        self.moments = np.empty((n, 5))
        self.trace_dev = np.empty(n)
        self.herm_dev = np.empty(n)
        self.tail = np.empty(n)
        self.min_eig = np.full(n, np.nan)

    def record(self, i, t, v):
        d = self.dim
        rho = v.reshape(d, d)
        tr = rho.trace()
        dev = abs(tr - 1.0)
        self.trace_dev[i] = dev
        self.herm_dev[i] = np.max(np.abs(rho - rho.conj().T))
        if dev > 1e-9:
            raise DiagnosticFailure(f"trace drift {dev:.2e} at t={t:.6g}")
        vals = self.obs @ v / tr
        self.moments[i] = vals.real
        pops = v[self.diag].real
        tail = float(pops[self.tail_start:].sum() / tr.real)
        self.tail[i] = tail
        if tail > self.cfg.tail_tol:
            raise TruncationOverflow(
                f"tail population {tail:.2e} exceeds {self.cfg.tail_tol:.1e} "
                f"at t={t:.6g} (dim {d})"
            )
        if self.cfg.positivity_every and i % self.cfg.positivity_every == 0:
            ev = np.linalg.eigvalsh(0.5 * (rho + rho.conj().T) / tr.real)[0]
            self.min_eig[i] = ev
            if ev < -1e-8:
                raise DiagnosticFailure(f"negative eigenvalue {ev:.2e} at t={t:.6g}")
        if self.herm_dev[i] > 1e-10:
            raise DiagnosticFailure(f"Hermiticity drift {self.herm_dev[i]:.2e} at t={t:.6g}")


def _is_diagonal(m):
    return not np.any(m - np.diag(np.diag(m)))


def interaction_generators(ops: OperatorSet, noise: NoiseParams):
    """Split the dissipator by the Bohr frequency it picks up in the interaction picture.

    Requires a diagonal ``h_np`` with energies ``E``.  With
    ``rho~ = exp(iHt) rho exp(-iHt)`` the entry coupling ``(m, n)`` to
    ``(k, l)`` rotates as ``exp(i [(E_m - E_n) - (E_k - E_l)] t)``.  Returns
    ``[(frequency, sparse block), ...]`` with the static block first.
    """
    d = ops.dim
    energies = np.diag(ops.h_np).real
    eye = sp.identity(d, dtype=complex, format="csr")
    gen = sp.csr_matrix((d * d, d * d), dtype=complex)
    for rate, L in jump_operators(ops, noise):
        Ls = sp.csr_matrix(L)
        LdL = sp.csr_matrix(L.conj().T @ L)
        gen = gen + rate * (sp.kron(Ls, Ls.conj()) - 0.5 * sp.kron(LdL, eye) - 0.5 * sp.kron(eye, LdL.T))
    gen = gen.tocoo()
    gen.eliminate_zeros()
    bohr = (energies[:, None] - energies[None, :]).ravel()
    freq = bohr[gen.row] - bohr[gen.col]
    key = np.round(freq, 9)
    out = []
    for f in sorted(np.unique(key), key=lambda v: (v != 0.0, abs(v), v)):
        sel = key == f
        block = sp.csr_matrix((gen.data[sel], (gen.row[sel], gen.col[sel])), shape=gen.shape)
        out.append((float(f), block))
    if not out or out[0][0] != 0.0:
        out.insert(0, (0.0, sp.csr_matrix((d * d, d * d), dtype=complex)))
    return out


def evolve_batch(rho0s, ops_list, noise: NoiseParams, cfg: IntegratorConfig, times=None, picture="auto"):
    """Evolve several density matrices in lockstep on a shared grid.

    Each member may have its own operator set (and dimension).  With
    ``picture="auto"`` members whose Hamiltonian is diagonal (the normal-mode
    frame) are integrated in the interaction picture, which removes the
    Hamiltonian's spectral radius from the step-size limit; samples are
    rotated back before moments are taken.  Returns one :class:`Trajectory`
    per member.
    """
    if len(rho0s) != len(ops_list):
        raise DimensionMismatch("need one operator set per initial state")
    if picture not in ("auto", "schrodinger", "interaction"):
        raise ConfigError(f"unknown picture {picture!r}", key="integrator.picture")
    times = cfg.grid(noise) if times is None else np.asarray(times, dtype=float)
    if times[0] != 0.0 or np.any(np.diff(times) <= 0):
        raise ConfigError("sample times must start at 0 and increase strictly")

    members, vecs, recs, slices = [], [], [], []
    offset = 0
    for rho0, ops in zip(rho0s, ops_list):
        rho0 = rho0 if isinstance(rho0, DensityMatrix) else DensityMatrix(rho0)
        if rho0.dim != ops.dim:
            raise DimensionMismatch(f"state dim {rho0.dim} vs operators dim {ops.dim}")
        rho0.validate()
        diagonal = _is_diagonal(ops.h_np)
        if picture == "interaction" and not diagonal:
            raise ConfigError("interaction picture needs a diagonal Hamiltonian", key="integrator.picture")
        if picture != "schrodinger" and diagonal:
            energies = np.diag(ops.h_np).real
            bohr = (energies[:, None] - energies[None, :]).ravel()
            members.append((interaction_generators(ops, noise), bohr))
        else:
            members.append(([(0.0, liouvillian(ops, noise))], None))
        vecs.append(rho0.matrix.ravel())
        recs.append(_Recorder(ops, times.size, cfg))
        slices.append(slice(offset, offset + ops.dim**2))
        offset += ops.dim**2
    y0 = np.concatenate(vecs)
    static = all(len(blocks) == 1 for blocks, _ in members)
    if static:
        gens = [blocks[0][1] for blocks, _ in members]
        gen = gens[0] if len(gens) == 1 else sp.block_diag(gens, format="csr")

        def rhs(t, y):
            return gen @ y

    else:

        def rhs(t, y):
            out = np.empty_like(y)
            for (blocks, _), sl in zip(members, slices):
                v = y[sl]
                acc = blocks[0][1] @ v
                for f, block in blocks[1:]:
                    acc += np.exp(1j * f * t) * (block @ v)
                out[sl] = acc
            return out

    def on_sample(i, y):
        t = times[i]
        for (_, bohr), rec, sl in zip(members, recs, slices):
            v = y[sl]
            if bohr is not None and t != 0.0:
                v = v * np.exp(-1j * bohr * t)
            rec.record(i, t, v)

    # Every generator here commutes with rho -> rho^dag and is linear, so the
    # same correction applied to the cached derivative keeps it exact.
    def after_step(y, fy):
        for rec, sl in zip(recs, slices):
            d = rec.dim
            rho = y[sl].reshape(d, d)
            drho = fy[sl].reshape(d, d)
            tr = rho.trace().real
            if abs(tr - 1.0) > 1e-9:
                raise DiagnosticFailure(f"trace drift {abs(tr - 1.0):.2e} during integration")
            y[sl] = (0.5 / tr * (rho + rho.conj().T)).ravel()
            fy[sl] = (0.5 / tr * (drho + drho.conj().T)).ravel()

    n_acc, n_rej = integrator.integrate(
        rhs, y0, times, cfg.rel_tol, cfg.abs_tol, on_sample, after_step=after_step
    )
    out = []
    for (_, bohr), rec, ops in zip(members, recs, ops_list):
        info = {
            "dim": ops.dim,
            "frame": ops.frame,
            "picture": "schrodinger" if bohr is None else "interaction",
            "steps": n_acc,
            "rejected": n_rej,
        }
        out.append(
            Trajectory(times.copy(), rec.moments, rec.trace_dev, rec.herm_dev, rec.tail, rec.min_eig, info)
        )
    return out


def evolve(rho0, ops: OperatorSet, noise: NoiseParams, cfg: IntegratorConfig, times=None, picture="auto") -> Trajectory:
    """Integrate the master equation from ``rho0`` and record moments per sample.

    Raises :class:`TruncationOverflow` when the top-decile population exceeds
    ``cfg.tail_tol`` and :class:`~qrm_metrology.errors.StepFailure` when the
    step controller underflows.
    """
    return evolve_batch([rho0], [ops], noise, cfg, times, picture)[0]
