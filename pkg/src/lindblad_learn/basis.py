"""Normalized Pauli-product operator basis and coherence-vector conversions.

Basis operators are ``F_(a,b) = (sigma^a (x) sigma^b) / 2`` ordered
lexicographically over ``(I, x, y, z)``, so ``F_1 = 1/2`` is the identity
component.  The computational state ``|0>`` satisfies ``sigma^z |0> = -|0>``,
i.e. ``|0> = (0, 1)^T`` with the standard Pauli matrices.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import BadNormalization, NonRealStructureConstant

PAULI_LABELS = ("I", "x", "y", "z")

PAULI = {
    "I": np.eye(2, dtype=complex),
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "z": np.array([[1, 0], [0, -1]], dtype=complex),
}

KET0 = np.array([0, 1], dtype=complex)
KET1 = np.array([1, 0], dtype=complex)

DIM = 4
N_OPS = DIM * DIM


@dataclass(frozen=True)
class OperatorBasis:
    ops: np.ndarray  # (d^2, d, d) complex
    labels: tuple[tuple[str, ...], ...]
    index: dict = field(compare=False)

    @property
    def dim(self) -> int:
        return self.ops.shape[1]

    def __len__(self) -> int:
        return self.ops.shape[0]

    def __getitem__(self, label) -> np.ndarray:
        return self.ops[self.index[tuple(label)]]

    def label_str(self, i: int) -> str:
        return "".join(self.labels[i])


@dataclass(frozen=True)
class StructureConstants:
    f: np.ndarray  # antisymmetric in the first two indices
    d_sym: np.ndarray  # symmetric in the first two indices


def build_basis(n_qubits: int = 2) -> OperatorBasis:
    """Return the orthonormal Pauli-product basis on ``n_qubits`` qubits."""
    labels = tuple(itertools.product(PAULI_LABELS, repeat=n_qubits))
    norm = 2.0 ** (n_qubits / 2)
    ops = []
    for lab in labels:
        op = np.ones((1, 1), dtype=complex)
        for a in lab:
            op = np.kron(op, PAULI[a])
        ops.append(op / norm)
    ops = np.array(ops)
    ops.setflags(write=False)
    return OperatorBasis(ops=ops, labels=labels, index={lab: i for i, lab in enumerate(labels)})


@lru_cache(maxsize=None)
def default_basis() -> OperatorBasis:
    return build_basis(2)


def structure_constants(basis: OperatorBasis) -> StructureConstants:
    """Compute ``f_ijk = -i/4 Tr([F_i,F_j] F_k)`` and ``d_ijk = 1/4 Tr({F_i,F_j} F_k)``."""
    F = basis.ops
    # prod[i,j] = F_i F_j; tr[i,j,k] = Tr(F_i F_j F_k)
    prod = np.einsum("iab,jbc->ijac", F, F)
    tr = np.einsum("ijab,kba->ijk", prod, F)
    comm = tr - tr.transpose(1, 0, 2)
    anti = tr + tr.transpose(1, 0, 2)
    f = -0.25j * comm
    d = 0.25 * anti
    worst = max(np.abs(f.imag).max(), np.abs(d.imag).max())
    if worst > 1e-9:
        raise NonRealStructureConstant(f"imaginary residue {worst:.3e} in structure constants")
    f, d = np.ascontiguousarray(f.real), np.ascontiguousarray(d.real)
    f.setflags(write=False)
    d.setflags(write=False)
    return StructureConstants(f=f, d_sym=d)


@lru_cache(maxsize=None)
def default_structure_constants() -> StructureConstants:
    return structure_constants(default_basis())


def rho_to_coherence(rho: np.ndarray, basis: OperatorBasis | None = None) -> np.ndarray:
    """Coherence vector ``v_i = Tr(F_i rho)``; accepts a stack of density matrices."""
    basis = basis or default_basis()
    return np.einsum("iab,...ba->...i", basis.ops, rho).real


def coherence_to_rho(v: np.ndarray, basis: OperatorBasis | None = None, check: bool = True) -> np.ndarray:
    """Inverse of :func:`rho_to_coherence`.

    Positivity of the result is not guaranteed, since noisy estimates can
    describe unphysical matrices.
    """
    basis = basis or default_basis()
    v = np.asarray(v, dtype=float)
    if check and np.any(np.abs(v[..., 0] - 1.0 / np.sqrt(basis.dim)) > 1e-12):
        raise BadNormalization(f"v_1 must equal 1/sqrt({basis.dim})")
    return np.einsum("...i,iab->...ab", v, basis.ops)
