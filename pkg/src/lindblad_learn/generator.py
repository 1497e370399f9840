"""Lindblad generator in the coherence-vector representation.

The generator matrix is ``L = H(theta_H) + D(c)`` with ``c = Z^dagger Z`` and
``Z = theta_X + 1j * theta_Y``.  Indices of ``theta_H`` and ``c`` run over
the traceless basis elements ``F_2 .. F_16``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .basis import (
    PAULI,
    OperatorBasis,
    StructureConstants,
    default_basis,
    default_structure_constants,
)
from .errors import NonHermitianKossakowski

N_TRACELESS = 15
N_PARAMS = N_TRACELESS + 2 * N_TRACELESS**2

RATE_THRESHOLD = 1e-4


@dataclass
class GeneratorParams:
    theta_H: np.ndarray
    theta_X: np.ndarray
    theta_Y: np.ndarray

    def __post_init__(self):
        self.theta_H = np.asarray(self.theta_H, dtype=float).reshape(N_TRACELESS)
        self.theta_X = np.asarray(self.theta_X, dtype=float).reshape(N_TRACELESS, N_TRACELESS)
        self.theta_Y = np.asarray(self.theta_Y, dtype=float).reshape(N_TRACELESS, N_TRACELESS)

    @classmethod
    def zeros(cls) -> GeneratorParams:
        return cls.from_vector(np.zeros(N_PARAMS))

    @classmethod
    def random(cls, rng: np.random.Generator, scale: float = 0.01) -> GeneratorParams:
        return cls.from_vector(rng.normal(0.0, scale, size=N_PARAMS))

    @classmethod
    def from_vector(cls, x: np.ndarray) -> GeneratorParams:
        x = np.asarray(x, dtype=float)
        if x.shape != (N_PARAMS,):
            raise ValueError(f"expected {N_PARAMS} parameters, got shape {x.shape}")
        n, m = N_TRACELESS, N_TRACELESS**2
        return cls(x[:n].copy(), x[n : n + m].reshape(n, n).copy(), x[n + m :].reshape(n, n).copy())

    def to_vector(self) -> np.ndarray:
        return np.concatenate([self.theta_H, self.theta_X.ravel(), self.theta_Y.ravel()])

    @property
    def Z(self) -> np.ndarray:
        return self.theta_X + 1j * self.theta_Y


@dataclass
class JumpOperatorSet:
    """Hamiltonian plus jump operators ``sqrt(rate_k) * J_k`` with ``Tr(J_k^dag J_k) = 1``."""

    hamiltonian: np.ndarray
    rates: list[float] = field(default_factory=list)
    operators: list[np.ndarray] = field(default_factory=list)

    def __post_init__(self):
        if len(self.rates) != len(self.operators):
            raise ValueError("rates and operators must have equal length")
        if any(r < 0 for r in self.rates):
            raise ValueError("jump rates must be non-negative")

    @classmethod
    def from_operators(cls, hamiltonian: np.ndarray, jumps: list[np.ndarray]) -> JumpOperatorSet:
        """Normalize raw jump operators ``J`` into ``(Tr(J^dag J), J / ||J||)`` pairs."""
        rates, ops = [], []
        for J in jumps:
            J = np.asarray(J, dtype=complex)
            w = float(np.trace(J.conj().T @ J).real)
            if w == 0.0:
                continue
            rates.append(w)
            ops.append(J / np.sqrt(w))
        return cls(np.asarray(hamiltonian, dtype=complex), rates, ops)


@dataclass
class LindbladMatrix:
    H_mat: np.ndarray
    D_mat: np.ndarray

    @property
    def L(self) -> np.ndarray:
        return self.H_mat + self.D_mat


@dataclass(frozen=True)
class _LinearMaps:
    """Dense linear maps from parameters to generator blocks."""

    h_map: np.ndarray  # (15*15, 15): theta_H -> H block
    d_re: np.ndarray  # (15*15, 15*15): vec Re c -> D block
    d_im: np.ndarray  # (15*15, 15*15): vec Im c -> D block
    d_col: np.ndarray  # (15, 15*15): vec Im c -> first column of D


_MAPS_CACHE: dict[int, tuple[StructureConstants, _LinearMaps]] = {}


def linear_maps(sc: StructureConstants | None = None) -> _LinearMaps:
    sc = sc or default_structure_constants()
    hit = _MAPS_CACHE.get(id(sc))
    if hit is None or hit[0] is not sc:
        hit = _MAPS_CACHE[id(sc)] = (sc, _build_maps(sc))
    return hit[1]


def _build_maps(sc: StructureConstants) -> _LinearMaps:
    n = N_TRACELESS
    f = sc.f[1:, 1:, 1:]
    d = sc.d_sym[1:, 1:, 1:]
    h_map = (-4.0 * f).reshape(n * n, n)
    d_re = (-8.0 * np.einsum("mik,njk->mnij", f, f)).reshape(n * n, n * n)
    d_im = (-8.0 * np.einsum("mik,njk->mnij", f, d)).reshape(n * n, n * n)
    d_col = (2.0 * np.einsum("imj->mij", f)).reshape(n, n * n)
    return _LinearMaps(h_map, d_re, d_im, d_col)


def build_H_matrix(theta_H: np.ndarray, sc: StructureConstants | None = None) -> np.ndarray:
    maps = linear_maps(sc)
    H = np.zeros((N_TRACELESS + 1,) * 2)
    H[1:, 1:] = (maps.h_map @ np.asarray(theta_H, dtype=float)).reshape(N_TRACELESS, N_TRACELESS)
    return H


def build_kossakowski(theta_X: np.ndarray, theta_Y: np.ndarray) -> np.ndarray:
    Z = np.asarray(theta_X) + 1j * np.asarray(theta_Y)
    return Z.conj().T @ Z


def build_D_matrix(c: np.ndarray, sc: StructureConstants | None = None) -> np.ndarray:
    c = np.asarray(c, dtype=complex)
    if not np.allclose(c, c.conj().T, atol=1e-12, rtol=0):
        raise NonHermitianKossakowski("Kossakowski matrix must be Hermitian")
    maps = linear_maps(sc)
    n = N_TRACELESS
    D = np.zeros((n + 1, n + 1))
    D[1:, 1:] = (maps.d_re @ c.real.ravel() + maps.d_im @ c.imag.ravel()).reshape(n, n)
    D[1:, 0] = maps.d_col @ c.imag.ravel()
    return D


def lindblad_matrix(params: GeneratorParams, sc: StructureConstants | None = None) -> LindbladMatrix:
    c = build_kossakowski(params.theta_X, params.theta_Y)
    return LindbladMatrix(build_H_matrix(params.theta_H, sc), build_D_matrix(c, sc))


def lindblad_matrix_from_coefficients(
    theta_H: np.ndarray, c: np.ndarray, sc: StructureConstants | None = None
) -> LindbladMatrix:
    return LindbladMatrix(build_H_matrix(theta_H, sc), build_D_matrix(c, sc))


def pullback_gradient(grad_L: np.ndarray, params: GeneratorParams, sc: StructureConstants | None = None) -> np.ndarray:
    """Chain ``d loss / d L`` back to a flat gradient over ``(theta_H, theta_X, theta_Y)``."""
    maps = linear_maps(sc)
    n = N_TRACELESS
    block = grad_L[1:, 1:].ravel()
    g_H = maps.h_map.T @ block
    g_re = (maps.d_re.T @ block).reshape(n, n)
    g_im = (maps.d_im.T @ block + maps.d_col.T @ grad_L[1:, 0]).reshape(n, n)
    gamma = g_re + 1j * g_im
    W = params.Z @ (gamma + gamma.conj().T)
    return np.concatenate([g_H, W.real.ravel(), W.imag.ravel()])


def expand_on_basis(op: np.ndarray, basis: OperatorBasis | None = None) -> np.ndarray:
    """Complex coefficients ``Tr(F_i op)`` over the whole basis."""
    basis = basis or default_basis()
    return np.einsum("iab,ba->i", basis.ops, op)


def coefficients_from_jump_set(
    spec: JumpOperatorSet, basis: OperatorBasis | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(theta_H, c)`` equivalent to a Hamiltonian/jump-operator model.

    Identity components of jump operators are moved into the Hamiltonian:
    ``J = a 1 + B`` contributes ``(i/2)(a* B - a B^dag)`` to ``H``.
    """
    basis = basis or default_basis()
    H = np.array(spec.hamiltonian, dtype=complex)
    c = np.zeros((N_TRACELESS, N_TRACELESS), dtype=complex)
    for rate, J in zip(spec.rates, spec.operators):
        a = np.sqrt(rate) * expand_on_basis(J, basis)
        traceless = np.einsum("i,iab->ab", a[1:], basis.ops[1:])
        a_id = a[0] / np.sqrt(basis.dim)  # J = a_id * 1 + traceless
        H = H + 0.5j * (np.conj(a_id) * traceless - a_id * traceless.conj().T)
        c += np.outer(a[1:], a[1:].conj())
    theta_H = expand_on_basis(H, basis)[1:].real
    return theta_H, c


def ground_truth_L(
    spec: JumpOperatorSet, basis: OperatorBasis | None = None, sc: StructureConstants | None = None
) -> LindbladMatrix:
    theta_H, c = coefficients_from_jump_set(spec, basis)
    return lindblad_matrix_from_coefficients(theta_H, c, sc)


def params_from_coefficients(theta_H: np.ndarray, c: np.ndarray) -> GeneratorParams:
    """Pick parameters with ``Z^dag Z = c`` using ``Z = sqrt(c)`` (Hermitian square root)."""
    w, U = np.linalg.eigh(c)
    Z = (U * np.sqrt(np.clip(w, 0.0, None))) @ U.conj().T
    return GeneratorParams(theta_H, Z.real, Z.imag)


def two_qubit_op(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.kron(a, b)


SIGMA_MINUS = np.array([[0, 0], [1, 0]], dtype=complex)  # |0><1| with |0> = (0, 1)
N_PROJ = 0.5 * (np.eye(2) + PAULI["z"])


def benchmark_model(Omega: float = 1.0, V: float = 0.5, gamma: float = 0.01, kappa: float = 0.05) -> JumpOperatorSet:
    """Two driven, interacting spins with decay and dephasing on each spin."""
    I2, X = np.eye(2), PAULI["x"]
    H = 0.5 * Omega * (np.kron(X, I2) + np.kron(I2, X)) + V * np.kron(N_PROJ, N_PROJ)
    jumps = [
        np.sqrt(gamma) * np.kron(SIGMA_MINUS, I2),
        np.sqrt(gamma) * np.kron(I2, SIGMA_MINUS),
        np.sqrt(kappa) * np.kron(N_PROJ, I2),
        np.sqrt(kappa) * np.kron(I2, N_PROJ),
    ]
    return JumpOperatorSet.from_operators(H, jumps)


def extract_readout(
    params: GeneratorParams, basis: OperatorBasis | None = None, threshold: float = RATE_THRESHOLD
) -> JumpOperatorSet:
    """Read the Hamiltonian and jump operators off learned parameters.

    Jump operators are eigenvectors of ``c`` over ``F_2 .. F_16`` (hence
    traceless), sorted by descending rate, each with its largest-magnitude
    coefficient made real and positive.
    """
    basis = basis or default_basis()
    H = np.einsum("i,iab->ab", params.theta_H, basis.ops[1:])
    c = build_kossakowski(params.theta_X, params.theta_Y)
    w, U = np.linalg.eigh(0.5 * (c + c.conj().T))
    order = np.argsort(w)[::-1]
    rates, ops = [], []
    for k in order:
        if w[k] <= threshold:
            continue
        u = U[:, k]
        j = np.argmax(np.abs(u))
        u = u * (np.abs(u[j]) / u[j])
        rates.append(float(w[k]))
        ops.append(np.einsum("i,iab->ab", u, basis.ops[1:]))
    return JumpOperatorSet(H, rates, ops)


def readout_to_dict(readout: JumpOperatorSet, basis: OperatorBasis | None = None) -> dict:
    basis = basis or default_basis()
    labels = [basis.label_str(i) for i in range(1, len(basis))]
    jump_ops = []
    for J in readout.operators:
        a = expand_on_basis(J, basis)[1:]
        jump_ops.append([[float(z.real), float(z.imag)] for z in a])
    return {
        "basis_labels": labels,
        "hamiltonian_coeffs": [float(x) for x in expand_on_basis(readout.hamiltonian, basis)[1:].real],
        "rates": [float(r) for r in readout.rates],
        "jump_ops": jump_ops,
    }


def _pauli_term(label: str) -> str:
    parts = [f"s{a}_{q + 1}" for q, a in enumerate(label) if a != "I"]
    return " ".join(parts)


def _fmt_complex(z: complex, nd: int) -> str:
    re, im = round(z.real, nd), round(z.imag, nd)
    if im == 0:
        return f"{re:g}"
    if re == 0:
        return f"{im:g}i"
    return f"({re:g}{im:+g}i)"


def format_readout(readout: JumpOperatorSet, basis: OperatorBasis | None = None) -> str:
    """Human-readable report in Pauli-product form.

    Coefficients refer to Pauli strings, i.e. half of the ``F``-basis
    coefficients.  Hamiltonian terms are rounded to two decimals, rates to
    three, jump-operator coefficients to two.
    """
    basis = basis or default_basis()
    doc = readout_to_dict(readout, basis)
    terms = []
    for lab, h in zip(doc["basis_labels"], doc["hamiltonian_coeffs"]):
        coef = round(h / 2, 2)
        if coef != 0:
            terms.append(f"{coef:+g} {_pauli_term(lab)}")
    lines = ["H = " + (" ".join(terms) if terms else "0")]
    if not doc["rates"]:
        lines.append("no jump operators above threshold")
    for k, (rate, coeffs) in enumerate(zip(doc["rates"], doc["jump_ops"]), start=1):
        lines.append(f"gamma_{k} = {rate:.3f}")
        jt = []
        for lab, (re, im) in zip(doc["basis_labels"], coeffs):
            z = complex(re, im) / 2
            if round(abs(z), 2) > 0:
                jt.append(f"{_fmt_complex(z, 2)} {_pauli_term(lab)}")
        lines.append(f"J_{k} = " + (" + ".join(jt) if jt else "0"))
    return "\n".join(lines)
