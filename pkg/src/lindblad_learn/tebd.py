"""Matrix-product-state TEBD for the driven Ising-type spin ring.

Site tensors have shape ``(chi_left, 2, chi_right)`` and use the same local
basis as the dense code.  One time step applies the same symmetric Trotter
product as :func:`lindblad_learn.dynamics.evolve_chain_dense`; the periodic
bond ``(L, 1)`` is reached by swapping site ``L`` next to site 1 and back.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .basis import KET0, default_basis, rho_to_coherence
from .dynamics import ChainSpec, TrajectorySpec, _n_diag, x_half_step_gate
from .errors import TruncationOverflow

DEFAULT_CHI_MAX = 64
DEFAULT_EPS_SVD = 1e-10
MAX_STEP_DISCARD = 1e-4

SWAP = np.eye(4)[[0, 2, 1, 3]].astype(complex)


@dataclass
class MPSState:
    tensors: list[np.ndarray]
    center: int = 0
    chi_max: int = DEFAULT_CHI_MAX
    eps_svd: float = DEFAULT_EPS_SVD
    discarded: float = 0.0
    # squared norm before each renormalization, one entry per truncating gate
    norm_history: list[float] = field(default_factory=list)

    @property
    def L(self) -> int:
        return len(self.tensors)

    @property
    def bond_dims(self) -> list[int]:
        return [A.shape[2] for A in self.tensors[:-1]]

    def copy(self) -> MPSState:
        return MPSState([A.copy() for A in self.tensors], self.center, self.chi_max, self.eps_svd, self.discarded)

    @classmethod
    def product(cls, local_states, **kw) -> MPSState:
        tensors = [np.asarray(s, dtype=complex).reshape(1, 2, 1) for s in local_states]
        return cls(tensors, center=0, **kw)

    @classmethod
    def from_dense(cls, psi: np.ndarray, L: int, **kw) -> MPSState:
        """Exact MPS of a state vector via successive SVDs, center on site 0."""
        tensors = []
        rest = np.asarray(psi, dtype=complex).reshape(1, -1)
        for _ in range(L - 1):
            chi = rest.shape[0]
            m = rest.reshape(chi * 2, -1)
            U, s, Vh = np.linalg.svd(m, full_matrices=False)
            keep = max(1, int(np.sum(s > 1e-14 * s[0])))
            tensors.append(U[:, :keep].reshape(chi, 2, keep))
            rest = s[:keep, None] * Vh[:keep]
        tensors.append(rest.reshape(rest.shape[0], 2, 1))
        mps = cls(tensors, center=L - 1, **kw)
        mps.move_center(0)
        return mps

    def to_dense(self) -> np.ndarray:
        out = self.tensors[0]
        for A in self.tensors[1:]:
            out = np.tensordot(out, A, axes=(-1, 0))
        return out.reshape(-1)

    def norm(self) -> float:
        return float(np.linalg.norm(self.tensors[self.center]))

    def move_center(self, target: int) -> None:
        """Shift the orthogonality center with QR steps (no truncation)."""
        while self.center < target:
            i = self.center
            A = self.tensors[i]
            chi_l, d, chi_r = A.shape
            Q, R = np.linalg.qr(A.reshape(chi_l * d, chi_r))
            self.tensors[i] = Q.reshape(chi_l, d, -1)
            self.tensors[i + 1] = np.tensordot(R, self.tensors[i + 1], axes=(1, 0))
            self.center += 1
        while self.center > target:
            i = self.center
            A = self.tensors[i]
            chi_l, d, chi_r = A.shape
            Q, R = np.linalg.qr(A.reshape(chi_l, d * chi_r).T)
            self.tensors[i] = Q.T.reshape(-1, d, chi_r)
            self.tensors[i - 1] = np.tensordot(self.tensors[i - 1], R.T, axes=(2, 0))
            self.center -= 1

    def apply_one_site(self, i: int, u: np.ndarray) -> None:
        self.tensors[i] = np.einsum("ab,lbr->lar", u, self.tensors[i])

    def apply_two_site(self, i: int, gate: np.ndarray, move: str = "right") -> float:
        """Apply a 4x4 gate on sites ``(i, i+1)``; returns the discarded weight.

        The center must sit on ``i`` or ``i + 1``; afterwards it sits on
        ``i + 1`` for ``move="right"`` and on ``i`` otherwise.
        """
        if self.center not in (i, i + 1):
            self.move_center(i)
        A, B = self.tensors[i], self.tensors[i + 1]
        chi_l, chi_r = A.shape[0], B.shape[2]
        theta = np.tensordot(A, B, axes=(2, 0))  # (l, p, q, r)
        theta = np.einsum("pqst,lstr->lpqr", gate.reshape(2, 2, 2, 2), theta)
        U, s, Vh = np.linalg.svd(theta.reshape(chi_l * 2, 2 * chi_r), full_matrices=False)
        total = float(np.sum(s**2))
        keep = int(np.sum(s > self.eps_svd * np.sqrt(total)))
        keep = max(1, min(keep, self.chi_max))
        kept = float(np.sum(s[:keep] ** 2))
        w = 1.0 - kept / total
        self.discarded += w
        self.norm_history.append(kept / total)
        s = s[:keep] / np.sqrt(kept)
        U, Vh = U[:, :keep], Vh[:keep]
        if move == "right":
            self.tensors[i] = U.reshape(chi_l, 2, keep)
            self.tensors[i + 1] = (s[:, None] * Vh).reshape(keep, 2, chi_r)
            self.center = i + 1
        else:
            self.tensors[i] = (U * s).reshape(chi_l, 2, keep)
            self.tensors[i + 1] = Vh.reshape(keep, 2, chi_r)
            self.center = i
        return w


def make_initial_mps(spec: ChainSpec, U_rand: np.ndarray | None = None, **kw) -> MPSState:
    """All-|0> product MPS with ``U_rand`` applied to sites 1 and 2."""
    mps = MPSState.product([KET0] * spec.L, **kw)
    if U_rand is not None:
        mps.apply_two_site(0, np.asarray(U_rand, dtype=complex), move="left")
    return mps


def reduced_density_from_mps(mps: MPSState) -> np.ndarray:
    """Two-site reduced density matrix of sites 1 and 2, trace-normalized."""
    if mps.center > 1:
        mps = mps.copy()
        mps.move_center(0)
    theta = np.tensordot(mps.tensors[0], mps.tensors[1], axes=(2, 0))  # (1, p, q, r)
    theta = theta.reshape(theta.shape[0], 4, theta.shape[-1])
    rho = np.einsum("lar,lbr->ab", theta, theta.conj())
    return rho / np.trace(rho).real


def zz_gate(spec: ChainSpec, dt: float) -> np.ndarray:
    n = _n_diag()
    return np.diag(np.exp(-1j * spec.V * dt * np.kron(n, n)))


def tebd_step(mps: MPSState, spec: ChainSpec, dt: float, ux: np.ndarray | None = None, uzz=None) -> float:
    """One symmetric Trotter step; returns the discarded weight of the step."""
    ux = x_half_step_gate(spec, dt) if ux is None else ux
    uzz = zz_gate(spec, dt) if uzz is None else uzz
    L = mps.L
    mps.move_center(0)
    for i in range(L):
        mps.apply_one_site(i, ux)
    w = 0.0
    for i in range(L - 1):
        w += mps.apply_two_site(i, uzz, move="right")
    if spec.periodic:
        # carry site L next to site 1, apply the ring bond, carry it back
        for i in range(L - 2, 0, -1):
            w += mps.apply_two_site(i, SWAP, move="left")
        w += mps.apply_two_site(0, uzz, move="right")
        for i in range(1, L - 1):
            w += mps.apply_two_site(i, SWAP, move="right")
    for i in range(L):
        mps.apply_one_site(i, ux)
    mps.move_center(0)
    return w


def evolve_chain_tebd(
    spec: ChainSpec,
    mps0: MPSState,
    traj: TrajectorySpec,
    chi_max: int = DEFAULT_CHI_MAX,
    eps_svd: float = DEFAULT_EPS_SVD,
    max_step_discard: float = MAX_STEP_DISCARD,
) -> np.ndarray:
    """TEBD evolution recording spin-(1, 2) coherence vectors every ``dt``."""
    mps = mps0.copy()
    mps.chi_max, mps.eps_svd = chi_max, eps_svd
    basis = default_basis()
    ux = x_half_step_gate(spec, traj.dt)
    uzz = zz_gate(spec, traj.dt)
    out = np.empty((traj.n_steps + 1, 16))
    out[0] = rho_to_coherence(reduced_density_from_mps(mps), basis)
    for k in range(1, traj.n_steps + 1):
        w = tebd_step(mps, spec, traj.dt, ux, uzz)
        if w > max_step_discard:
            raise TruncationOverflow(
                f"discarded weight {w:.2e} at step {k} exceeds {max_step_discard:g}; increase chi_max"
            )
        out[k] = rho_to_coherence(reduced_density_from_mps(mps), basis)
    return out
