import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lindblad_learn.basis import PAULI, coherence_to_rho, rho_to_coherence
from lindblad_learn.errors import NonHermitianKossakowski
from lindblad_learn.expm import expm
from lindblad_learn.generator import (
    N_PARAMS,
    SIGMA_MINUS,
    N_PROJ,
    GeneratorParams,
    JumpOperatorSet,
    benchmark_model,
    build_D_matrix,
    build_H_matrix,
    build_kossakowski,
    coefficients_from_jump_set,
    extract_readout,
    format_readout,
    ground_truth_L,
    lindblad_matrix,
    params_from_coefficients,
    readout_to_dict,
)

from conftest import random_rho
from oracles import hamiltonian_from_theta, kossakowski_rhs, lindblad_rhs, superoperator_matrix

I2 = np.eye(2)


def brute_force_L(params, F):
    H = hamiltonian_from_theta(params.theta_H, F)
    Z = params.theta_X + 1j * params.theta_Y
    c = Z.conj().T @ Z
    return superoperator_matrix(lambda r: kossakowski_rhs(r, H, c, F), F)


def test_params_vector_roundtrip(rng):
    x = rng.normal(size=N_PARAMS)
    p = GeneratorParams.from_vector(x)
    assert np.array_equal(p.to_vector(), x)
    assert p.theta_X.shape == (15, 15)
    with pytest.raises(ValueError):
        GeneratorParams.from_vector(np.zeros(10))


def test_H_zero():
    assert np.array_equal(build_H_matrix(np.zeros(15)), np.zeros((16, 16)))


def test_H_single_qubit_drive_matches_commutator(basis):
    # H = (Omega/2) sigma^x on qubit 1 has coefficient Omega/2 * 2 on F_(x,I)
    Omega = 1.3
    Hop = 0.5 * Omega * np.kron(PAULI["x"], I2)
    theta = np.zeros(15)
    theta[basis.index[("x", "I")] - 1] = Omega
    assert np.allclose(hamiltonian_from_theta(theta, basis.ops), Hop)
    oracle = superoperator_matrix(lambda r: -1j * (Hop @ r - r @ Hop), basis.ops)
    assert np.abs(oracle.imag).max() < 1e-14
    assert np.abs(build_H_matrix(theta) - oracle.real).max() < 1e-13


def test_H_structure_and_linearity(rng):
    t1, t2 = rng.normal(size=15), rng.normal(size=15)
    H1, H2 = build_H_matrix(t1), build_H_matrix(t2)
    assert np.allclose(build_H_matrix(2.0 * t1 - 0.5 * t2), 2.0 * H1 - 0.5 * H2, atol=1e-14)
    assert np.all(H1[0] == 0) and np.all(H1[:, 0] == 0)
    assert np.allclose(H1[1:, 1:], -H1[1:, 1:].T, atol=1e-15)


def test_kossakowski_examples(rng):
    assert np.array_equal(build_kossakowski(np.zeros((15, 15)), np.zeros((15, 15))), np.zeros((15, 15)))
    assert np.allclose(build_kossakowski(np.eye(15), np.zeros((15, 15))), np.eye(15))
    p = GeneratorParams.random(rng, 1.0)
    c = build_kossakowski(p.theta_X, p.theta_Y)
    assert np.allclose(c, c.conj().T, atol=1e-12)
    assert np.linalg.eigvalsh(c).min() >= -1e-12


def test_D_zero_and_nonhermitian():
    assert np.array_equal(build_D_matrix(np.zeros((15, 15))), np.zeros((16, 16)))
    c = np.zeros((15, 15), dtype=complex)
    c[0, 1] = 1.0
    with pytest.raises(NonHermitianKossakowski):
        build_D_matrix(c)


def test_D_single_decay_matches_dissipator(basis):
    gamma = 0.01
    J = np.sqrt(gamma) * np.kron(SIGMA_MINUS, I2)
    spec = JumpOperatorSet.from_operators(np.zeros((4, 4)), [J])
    theta_H, c = coefficients_from_jump_set(spec)
    assert np.allclose(theta_H, 0)
    oracle = superoperator_matrix(lambda r: lindblad_rhs(r, np.zeros((4, 4)), [J]), basis.ops)
    assert np.abs(build_D_matrix(c) - oracle.real).max() < 1e-14
    assert np.all(build_D_matrix(c)[0] == 0)


def test_structure_formulas_match_brute_force(basis, rng):
    worst = 0.0
    for _ in range(20):
        p = GeneratorParams.random(rng, 0.5)
        L = lindblad_matrix(p).L
        oracle = brute_force_L(p, basis.ops)
        assert np.abs(oracle.imag).max() < 1e-12
        worst = max(worst, np.abs(L - oracle.real).max())
    assert worst <= 1e-10


def test_benchmark_L_matches_direct_rhs(basis, rng):
    spec = benchmark_model(1.0, 0.5, 0.01, 0.05)
    I4 = np.eye(2)
    X = PAULI["x"]
    H = 0.5 * (np.kron(X, I4) + np.kron(I4, X)) + 0.5 * np.kron(N_PROJ, N_PROJ)
    jumps = [
        np.sqrt(0.01) * np.kron(SIGMA_MINUS, I4),
        np.sqrt(0.01) * np.kron(I4, SIGMA_MINUS),
        np.sqrt(0.05) * np.kron(N_PROJ, I4),
        np.sqrt(0.05) * np.kron(I4, N_PROJ),
    ]
    L = ground_truth_L(spec).L
    for _ in range(20):
        rho = random_rho(rng)
        direct = rho_to_coherence(lindblad_rhs(rho, H, jumps))
        assert np.abs(L @ rho_to_coherence(rho) - direct).max() < 1e-12


def test_identity_component_moves_into_hamiltonian(basis):
    # the dephasing projector n = (1 + sigma^z)/2 carries an identity part
    spec = benchmark_model()
    theta_H, c = coefficients_from_jump_set(spec)
    oracle = superoperator_matrix(
        lambda r: lindblad_rhs(r, spec.hamiltonian, [np.sqrt(g) * J for g, J in zip(spec.rates, spec.operators)]),
        basis.ops,
    )
    assert np.abs(ground_truth_L(spec).L - oracle.real).max() < 1e-13


def test_zero_rates_give_no_dissipator():
    spec = benchmark_model(gamma=0.0, kappa=0.0)
    assert spec.rates == []
    L = ground_truth_L(spec)
    assert np.array_equal(L.D_mat, np.zeros((16, 16)))


def test_dephasing_steady_states_include_diagonal(basis):
    spec = JumpOperatorSet.from_operators(np.zeros((4, 4)), [np.sqrt(0.05) * np.kron(N_PROJ, I2)])
    L = ground_truth_L(spec).L
    for k in range(4):
        rho = np.zeros((4, 4))
        rho[k, k] = 1.0
        assert np.abs(L @ rho_to_coherence(rho)).max() < 1e-15
    # the nullspace holds the 4 populations plus the coherences untouched on qubit 1
    s = np.linalg.svd(L, compute_uv=False)
    assert np.sum(s < 1e-12) >= 4


def test_benchmark_kossakowski_spectrum():
    _, c = coefficients_from_jump_set(benchmark_model(gamma=0.01, kappa=0.05))
    w = np.sort(np.linalg.eigvalsh(c))[::-1]
    # unit-norm sigma^- (x) 1 / sqrt(2) carries twice the per-spin decay rate
    assert np.allclose(w[:4], [0.05, 0.05, 0.02, 0.02], atol=1e-15)
    assert np.abs(w[4:]).max() < 1e-15


def test_readout_of_ground_truth(basis):
    theta_H, c = coefficients_from_jump_set(benchmark_model())
    p = params_from_coefficients(theta_H, c)
    assert np.allclose(build_kossakowski(p.theta_X, p.theta_Y), c, atol=1e-14)
    ro = extract_readout(p)
    assert np.allclose(ro.rates, [0.05, 0.05, 0.02, 0.02], atol=1e-12)
    for J in ro.operators:
        assert np.trace(J.conj().T @ J).real == pytest.approx(1.0)
        assert abs(np.trace(J)) < 1e-14
    doc = readout_to_dict(ro)
    assert len(doc["hamiltonian_coeffs"]) == 15 and len(doc["jump_ops"]) == 4
    text = format_readout(ro)
    assert "gamma_1 = 0.050" in text and "gamma_4 = 0.020" in text
    assert "+0.5 sx_1" in text and "+0.5 sx_2" in text


def test_readout_empty_for_zero_dissipation():
    p = GeneratorParams(np.ones(15), np.zeros((15, 15)), np.zeros((15, 15)))
    ro = extract_readout(p)
    assert ro.rates == [] and ro.operators == []
    assert "no jump operators" in format_readout(ro)


def test_readout_phase_convention(rng, basis):
    p = GeneratorParams.random(rng, 0.3)
    ro = extract_readout(p, threshold=0.0)
    assert ro.rates == sorted(ro.rates, reverse=True)
    for J in ro.operators:
        a = np.einsum("iab,ba->i", basis.ops, J)
        k = np.argmax(np.abs(a))
        assert abs(a[k].imag) < 1e-14 and a[k].real > 0


@given(st.integers(0, 2**32 - 1))
def test_readout_roundtrip_property(seed):
    p = GeneratorParams.random(np.random.default_rng(seed), 0.2)
    ro = extract_readout(p, threshold=0.0)
    assert np.abs(ground_truth_L(ro).L - lindblad_matrix(p).L).max() < 1e-8


@given(st.integers(0, 2**32 - 1), st.floats(0.01, 1.0))
def test_trace_preservation_property(seed, scale):
    rng = np.random.default_rng(seed)
    L = lindblad_matrix(GeneratorParams.random(rng, scale)).L
    assert np.all(L[0] == 0)
    v = rng.normal(size=16)
    assert (L @ v)[0] == 0


@given(st.integers(0, 2**32 - 1))
def test_complete_positivity_property(seed):
    rng = np.random.default_rng(seed)
    L = lindblad_matrix(GeneratorParams.random(rng, 0.3)).L
    v0 = rho_to_coherence(random_rho(rng))
    ts = np.linspace(0.0, 20.0, 11)
    for P in expm(ts[:, None, None] * L):
        rho = coherence_to_rho(P @ v0, check=False)
        assert np.linalg.eigvalsh(rho).min() >= -1e-8
