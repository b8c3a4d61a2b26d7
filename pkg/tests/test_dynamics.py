import math
from dataclasses import replace

import numpy as np
import pytest
from scipy.linalg import expm

from qrm_metrology.dynamics import (
    IntegratorConfig,
    NoiseParams,
    default_horizon,
    dissipator,
    evolve,
    evolve_batch,
    interaction_generators,
    lindblad_rhs,
    liouvillian,
)
from qrm_metrology.errors import ConfigError, DimensionMismatch, TruncationOverflow
from qrm_metrology.hilbert import (
    DensityMatrix,
    ModelParams,
    build_operators,
    fock_state,
    standard_initial_state,
    to_frame,
)
from qrm_metrology.moments import InitialConditions, evolve_moments, moment_rhs, stationary_moments

STANDARD = InitialConditions.from_state(standard_initial_state(2))


def random_density(dim, seed):
    rng = np.random.default_rng(seed)
    m = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    rho = m @ m.conj().T
    return rho / np.trace(rho)


def proj(dim, n):
    out = np.zeros((dim, dim), dtype=complex)
    out[n, n] = 1
    return out


def start(g, dim, frame):
    ops = build_operators(ModelParams(g, trunc_dim=dim), frame)
    return DensityMatrix.from_pure(to_frame(standard_initial_state(2), ops)), ops


def test_noise_params():
    n = NoiseParams(0.05, 2.0)
    assert n.gamma_a - n.gamma_h == pytest.approx(0.05)
    assert n.gamma_a + n.gamma_h == pytest.approx(0.05 * 5)
    assert NoiseParams(0.01, kind="two-photon").kind == "two_photon"
    for bad in (dict(kappa=-0.1), dict(kappa=0.1, nbar=-1), dict(kappa=0.1, kind="three_photon")):
        with pytest.raises(ConfigError):
            NoiseParams(**bad)


def test_integrator_config_validation():
    assert default_horizon(0.05) == pytest.approx(160.0)
    assert default_horizon(0.001) == 2000.0
    with pytest.raises(ConfigError):
        IntegratorConfig(rel_tol=0.0)
    with pytest.raises(ConfigError):
        IntegratorConfig(n_samples=1)
    grid = IntegratorConfig(n_samples=5).grid(NoiseParams(0.05))
    np.testing.assert_allclose(grid, [0, 40, 80, 120, 160])


def test_dissipator_examples():
    ops = build_operators(ModelParams(0.5, trunc_dim=2))
    np.testing.assert_array_equal(dissipator(ops.a, proj(2, 0)), np.zeros((2, 2)))
    np.testing.assert_allclose(dissipator(ops.a, proj(2, 1)), proj(2, 0) - proj(2, 1), atol=1e-15)
    with pytest.raises(DimensionMismatch):
        dissipator(ops.a, np.eye(3))


@pytest.mark.parametrize("seed", range(4))
def test_dissipator_traceless(seed):
    ops = build_operators(ModelParams(0.5, trunc_dim=8))
    rho = random_density(8, seed)
    for L in (ops.a, ops.a @ ops.a):
        assert abs(np.trace(dissipator(L, rho))) <= 1e-12


def test_rhs_noise_free_is_commutator():
    ops = build_operators(ModelParams(0.9, trunc_dim=10))
    rho = random_density(10, 1)
    out = lindblad_rhs(rho, ops, NoiseParams(0.0))
    np.testing.assert_array_equal(out, -1j * (ops.h_np @ rho - rho @ ops.h_np))


def test_rhs_decay_examples():
    ops = build_operators(ModelParams(0.9, trunc_dim=6))
    bare = replace(ops, h_np=np.zeros_like(ops.h_np))
    out = lindblad_rhs(proj(6, 1), bare, NoiseParams(0.05))
    np.testing.assert_allclose(out, 0.05 * (proj(6, 0) - proj(6, 1)), atol=1e-15)
    out = lindblad_rhs(proj(6, 1), bare, NoiseParams(0.05, kind="two_photon"))
    np.testing.assert_array_equal(out, np.zeros((6, 6)))


@pytest.mark.parametrize("kind", ["single_photon", "two_photon"])
def test_rhs_traceless_and_hermitian(kind):
    ops = build_operators(ModelParams(0.96, trunc_dim=12))
    rho = random_density(12, 3)
    out = lindblad_rhs(rho, ops, NoiseParams(0.04, 1.5, kind))
    assert abs(np.trace(out)) <= 1e-12
    np.testing.assert_allclose(out, out.conj().T, atol=1e-13)


@pytest.mark.parametrize("frame", ["fock", "normal_mode"])
@pytest.mark.parametrize("kind", ["single_photon", "two_photon"])
def test_liouvillian_matches_dense_rhs(frame, kind):
    ops = build_operators(ModelParams(0.95, trunc_dim=9), frame)
    noise = NoiseParams(0.03, 2.0, kind)
    rho = random_density(9, 7)
    vec = liouvillian(ops, noise) @ rho.ravel()
    np.testing.assert_allclose(vec.reshape(9, 9), lindblad_rhs(rho, ops, noise), atol=1e-13)


@pytest.mark.parametrize("kind", ["single_photon", "two_photon"])
def test_interaction_blocks_reproduce_rotated_dissipator(kind):
    ops = build_operators(ModelParams(0.96, trunc_dim=10), "normal_mode")
    noise = NoiseParams(0.05, 1.0, kind)
    blocks = interaction_generators(ops, noise)
    assert blocks[0][0] == 0.0
    rho = random_density(10, 11)
    t = 3.3
    U = expm(1j * ops.h_np * t)
    rot = U @ rho @ U.conj().T
    diss = lindblad_rhs(rho, ops, noise) + 1j * (ops.h_np @ rho - rho @ ops.h_np)
    expected = U @ diss @ U.conj().T
    got = sum(np.exp(1j * f * t) * (b @ rot.ravel()) for f, b in blocks).reshape(10, 10)
    np.testing.assert_allclose(got, expected, atol=1e-12)


def test_energy_conserved_without_noise():
    g = 0.5
    rho, ops = start(g, 40, "fock")
    cfg = IntegratorConfig(t_max=50.0, n_samples=201)
    traj = evolve(rho, ops, NoiseParams(0.0), cfg)
    energy = 0.5 * (traj.epp + (1 - g * g) * traj.exx)
    assert np.max(np.abs(energy / energy[0] - 1)) < 1e-7


@pytest.mark.parametrize(
    "g,dim,frame,picture", [(0.9, 80, "fock", "schrodinger"), (0.96, 40, "normal_mode", "interaction")]
)
def test_moments_match_closed_equations(g, dim, frame, picture):
    p, n = ModelParams(g), NoiseParams(0.05)
    rho, ops = start(g, dim, frame)
    cfg = IntegratorConfig(t_max=60.0, n_samples=601)
    traj = evolve(rho, ops, n, cfg, picture=picture)
    assert traj.info["picture"] == picture
    exact = evolve_moments(STANDARD, p, n, traj.times)
    np.testing.assert_allclose(traj.moments, exact, atol=1e-6)


def test_trajectory_invariants():
    rho, ops = start(0.95, 40, "normal_mode")
    cfg = IntegratorConfig(t_max=50.0, n_samples=500)
    traj = evolve(rho, ops, NoiseParams(0.03, 1.0), cfg)
    assert traj.times[0] == 0.0 and np.all(np.diff(traj.times) > 0)
    assert np.max(traj.trace_dev) < 1e-9
    assert np.max(traj.herm_dev) <= 1e-10
    checked = traj.min_eig[~np.isnan(traj.min_eig)]
    assert checked.size == 50 and np.min(checked) >= -1e-8
    assert np.max(traj.tail) < 1e-6


def test_sampled_moments_obey_moment_equations():
    p, n = ModelParams(0.95), NoiseParams(0.04, 1.0)
    rho, ops = start(0.95, 50, "normal_mode")
    traj = evolve(rho, ops, n, IntegratorConfig(t_max=40.0, n_samples=4001))
    deriv = np.gradient(traj.moments, traj.times, axis=0, edge_order=2)
    rhs = np.array([moment_rhs(m, p, n) for m in traj.moments])
    scale = np.max(np.abs(rhs), axis=0)
    assert np.max(np.abs(deriv - rhs)[5:-5] / scale) < 1e-3


def test_tolerance_halving_converges():
    n = NoiseParams(0.05)
    rho, ops = start(0.9, 40, "normal_mode")
    base = IntegratorConfig(t_max=40.0, n_samples=201)
    a = evolve(rho, ops, n, base).moments
    b = evolve(rho, ops, n, replace(base, rel_tol=base.rel_tol / 2, abs_tol=base.abs_tol / 2)).moments
    scale = np.maximum(np.abs(a), 1.0)
    assert np.max(np.abs(a - b) / scale) < 10 * base.rel_tol


def test_batch_matches_single_runs():
    n = NoiseParams(0.05)
    cfg = IntegratorConfig(t_max=30.0, n_samples=101)
    r1, o1 = start(0.95, 30, "normal_mode")
    r2, o2 = start(0.96, 35, "normal_mode")
    t1, t2 = evolve_batch([r1, r2], [o1, o2], n, cfg)
    np.testing.assert_allclose(t1.moments, evolve(r1, o1, n, cfg).moments, atol=1e-7)
    np.testing.assert_allclose(t2.moments, evolve(r2, o2, n, cfg).moments, atol=1e-7)


def test_evolve_is_bitwise_reproducible():
    rho, ops = start(0.96, 40, "normal_mode")
    cfg = IntegratorConfig(t_max=20.0, n_samples=50)
    a = evolve(rho, ops, NoiseParams(0.05, 1.0), cfg)
    b = evolve(rho, ops, NoiseParams(0.05, 1.0), cfg)
    np.testing.assert_array_equal(a.moments, b.moments)


def test_truncation_overflow():
    rho, ops = start(0.96, 8, "fock")
    with pytest.raises(TruncationOverflow):
        evolve(rho, ops, NoiseParams(0.05, 3.0), IntegratorConfig(t_max=50.0, n_samples=50))


def test_input_checks():
    rho, ops = start(0.9, 10, "fock")
    cfg = IntegratorConfig(t_max=1.0, n_samples=3)
    with pytest.raises(DimensionMismatch):
        evolve(np.eye(5) / 5, ops, NoiseParams(0.01), cfg)
    with pytest.raises(ConfigError):
        evolve(rho, ops, NoiseParams(0.01), cfg, picture="interaction")
    with pytest.raises(ConfigError):
        evolve(rho, ops, NoiseParams(0.01), cfg, times=[0.0, 2.0, 1.0])
    with pytest.raises(ConfigError):
        evolve(np.diag([1.2, -0.2] + [0] * 8), ops, NoiseParams(0.01), cfg)


@pytest.mark.slow
def test_long_time_thermal_stationary_state():
    p, n = ModelParams(0.96), NoiseParams(0.05, 2.0)
    rho, ops = start(0.96, 130, "normal_mode")
    times = np.array([0.0, 130.0, 260.0])
    traj = evolve(rho, ops, n, IntegratorConfig(), times=times)
    s = stationary_moments(p, n).as_array()
    rel = np.abs(traj.moments[-1, 2:] - s[2:]) / np.abs(s[2:])
    assert np.max(rel) < 1e-4


def test_two_photon_decay_without_hamiltonian():
    dim = 20
    ops = build_operators(ModelParams(0.9, trunc_dim=dim))
    ops = replace(ops, h_np=np.zeros_like(ops.h_np))
    psi = (fock_state(dim, 2).amplitudes + fock_state(dim, 6).amplitudes) / math.sqrt(2)
    rho = np.outer(psi, psi.conj())
    traj_cfg = IntegratorConfig(t_max=30.0, n_samples=61)
    n = NoiseParams(0.05, kind="two_photon")
    # record <a^dag^2 a^2> through the P-squared slot of a relabelled operator set
    ad2a2 = ops.a_dag @ ops.a_dag @ ops.a @ ops.a
    probe = replace(ops, x=ad2a2, p=np.diag((-1.0) ** np.arange(dim)).astype(complex))
    traj = evolve(rho, probe, n, traj_cfg)
    assert np.all(np.diff(traj.ex) <= 1e-12)
    np.testing.assert_allclose(traj.ep, 1.0, atol=1e-9)
