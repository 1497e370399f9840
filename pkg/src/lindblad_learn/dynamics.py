"""Reference dynamics: Lindblad propagation and dense spin-ring evolution.

The ring Hamiltonian is

    H = (Omega/2) sum_i sigma^x_i + V sum_<ij> n_i n_j,   n = (1 + sigma^z)/2,

with periodic boundary conditions.  Time is measured in units of 1/Omega.
Dense evolution uses a symmetric (Strang) Trotter step
``exp(-i H_x dt/2) exp(-i H_zz dt) exp(-i H_x dt/2)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .basis import KET0, PAULI, default_basis, rho_to_coherence
from .errors import ConfigError, DenseTooLarge
from .expm import expm

DENSE_MAX_L = 12


@dataclass(frozen=True)
class ChainSpec:
    L: int
    Omega: float = 1.0
    V: float = 0.5
    periodic: bool = True

    def __post_init__(self):
        if self.L < 3:
            raise ConfigError("chain needs at least 3 spins")
        if not self.Omega > 0:
            raise ConfigError("Omega must be positive")

    def bonds(self) -> list[tuple[int, int]]:
        b = [(i, i + 1) for i in range(self.L - 1)]
        if self.periodic:
            b.append((self.L - 1, 0))
        return b


@dataclass(frozen=True)
class TrajectorySpec:
    T_total: float = 10.0
    dt: float = 0.01
    seed: int = 0
    n_trajectories: int = 30

    def __post_init__(self):
        if self.dt <= 0 or self.T_total <= 0:
            raise ConfigError("T_total and dt must be positive")
        ratio = self.T_total / self.dt
        if abs(ratio - round(ratio)) > 1e-9 * max(1.0, ratio):
            raise ConfigError("dt must divide T_total")

    @property
    def n_steps(self) -> int:
        return int(round(self.T_total / self.dt))

    def times(self) -> np.ndarray:
        return np.arange(self.n_steps + 1) * self.dt


def as_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def propagate_lindblad(L_mat: np.ndarray, v0: np.ndarray, t) -> np.ndarray:
    """``expm(t L) v0``; ``t`` may be an array, giving one row per time."""
    L_mat = getattr(L_mat, "L", L_mat)
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("propagation time must be non-negative")
    M = expm(t[..., None, None] * L_mat)
    return M @ np.asarray(v0, dtype=float)


def haar_random_two_qubit_unitary(seed, dim: int = 4) -> np.ndarray:
    """Haar-distributed unitary from the QR decomposition of a Ginibre matrix."""
    rng = as_rng(seed)
    G = (rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))) / np.sqrt(2)
    Q, R = np.linalg.qr(G)
    ph = np.diag(R) / np.abs(np.diag(R))
    return Q * ph


def random_density_matrix(seed, dim: int = 4) -> np.ndarray:
    """Hilbert-Schmidt distributed density matrix ``G G^dag / Tr(G G^dag)``."""
    rng = as_rng(seed)
    G = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    rho = G @ G.conj().T
    return rho / np.trace(rho).real


def make_initial_state(spec: ChainSpec, U_rand: np.ndarray | None = None) -> np.ndarray:
    """All-|0> product state with ``U_rand`` applied to spins 1 and 2."""
    if spec.L > DENSE_MAX_L:
        raise DenseTooLarge(f"dense state vectors limited to L <= {DENSE_MAX_L}")
    pair = np.kron(KET0, KET0)
    if U_rand is not None:
        pair = U_rand @ pair
    rest = np.ones(1, dtype=complex)
    for _ in range(spec.L - 2):
        rest = np.kron(rest, KET0)
    return np.kron(pair, rest)


def _n_diag() -> np.ndarray:
    return 0.5 * (1.0 + np.diag(PAULI["z"]).real)


def interaction_diagonal(spec: ChainSpec) -> np.ndarray:
    """Diagonal of ``V sum n_i n_j`` in the computational basis."""
    n = _n_diag()
    occ = np.stack(np.meshgrid(*([n] * spec.L), indexing="ij"), axis=0).reshape(spec.L, -1)
    return spec.V * sum(occ[i] * occ[j] for i, j in spec.bonds())


def chain_hamiltonian_dense(spec: ChainSpec) -> np.ndarray:
    if spec.L > DENSE_MAX_L:
        raise DenseTooLarge(f"dense Hamiltonian limited to L <= {DENSE_MAX_L}")
    dim = 2**spec.L
    H = np.diag(interaction_diagonal(spec)).astype(complex)
    X = PAULI["x"]
    for i in range(spec.L):
        H += 0.5 * spec.Omega * np.kron(np.kron(np.eye(2**i), X), np.eye(dim // 2 ** (i + 1)))
    return H


def x_half_step_gate(spec: ChainSpec, dt: float) -> np.ndarray:
    a = 0.25 * spec.Omega * dt
    return np.cos(a) * np.eye(2) - 1j * np.sin(a) * PAULI["x"]


def _apply_single_site(psi: np.ndarray, u: np.ndarray) -> np.ndarray:
    L = psi.ndim
    for i in range(L):
        psi = np.moveaxis(np.tensordot(u, psi, axes=(1, i)), 0, i)
    return psi


def reduced_pair_density(psi: np.ndarray) -> np.ndarray:
    """Reduced density matrix of spins 1 and 2 from a full state vector."""
    m = psi.reshape(4, -1)
    return m @ m.conj().T


def evolve_chain_dense(spec: ChainSpec, psi0: np.ndarray, traj: TrajectorySpec, return_state: bool = False):
    """Trotterized evolution; returns coherence vectors of spins (1, 2) on the dt grid."""
    if spec.L > DENSE_MAX_L:
        raise DenseTooLarge(f"dense evolution limited to L <= {DENSE_MAX_L}, got L={spec.L}")
    psi0 = np.asarray(psi0, dtype=complex)
    if abs(np.linalg.norm(psi0) - 1.0) > 1e-10:
        raise ValueError("initial state must be normalized")
    basis = default_basis()
    ux = x_half_step_gate(spec, traj.dt)
    phase = np.exp(-1j * traj.dt * interaction_diagonal(spec)).reshape((2,) * spec.L)
    psi = psi0.reshape((2,) * spec.L)
    out = np.empty((traj.n_steps + 1, 16))
    out[0] = rho_to_coherence(reduced_pair_density(psi), basis)
    for k in range(1, traj.n_steps + 1):
        psi = _apply_single_site(psi, ux)
        psi = psi * phase
        psi = _apply_single_site(psi, ux)
        out[k] = rho_to_coherence(reduced_pair_density(psi), basis)
    if return_state:
        return out, psi.reshape(-1)
    return out


def evolve_chain_exact(spec: ChainSpec, psi0: np.ndarray, times: np.ndarray) -> np.ndarray:
    """Exact evolution by diagonalizing the dense Hamiltonian (small L only)."""
    w, U = np.linalg.eigh(chain_hamiltonian_dense(spec))
    c0 = U.conj().T @ psi0
    basis = default_basis()
    out = []
    for t in times:
        psi = U @ (np.exp(-1j * w * t) * c0)
        out.append(rho_to_coherence(reduced_pair_density(psi), basis))
    return np.array(out)
