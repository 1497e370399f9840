"""Batched matrix exponential and its Frechet derivative.

Scaling and squaring with a degree-13 Pade approximant (Higham 2005).  All
routines accept a single matrix or a stack ``(..., n, n)``.
"""

from __future__ import annotations

import numpy as np

_PADE13 = np.array(
    [
        64764752532480000.0,
        32382376266240000.0,
        7771770303897600.0,
        1187353796428800.0,
        129060195264000.0,
        10559470521600.0,
        670442572800.0,
        33522128640.0,
        1323241920.0,
        40840800.0,
        960960.0,
        16380.0,
        182.0,
        1.0,
    ]
)
_THETA13 = 5.371920351148152


def _pade13(A: np.ndarray) -> np.ndarray:
    b = _PADE13
    ident = np.broadcast_to(np.eye(A.shape[-1]), A.shape)
    A2 = A @ A
    A4 = A2 @ A2
    A6 = A2 @ A4
    U = A @ (A6 @ (b[13] * A6 + b[11] * A4 + b[9] * A2) + b[7] * A6 + b[5] * A4 + b[3] * A2 + b[1] * ident)
    V = A6 @ (b[12] * A6 + b[10] * A4 + b[8] * A2) + b[6] * A6 + b[4] * A4 + b[2] * A2 + b[0] * ident
    return np.linalg.solve(V - U, V + U)


def expm(A: np.ndarray) -> np.ndarray:
    """Matrix exponential of a real or complex (stack of) square matrices."""
    A = np.asarray(A)
    if A.ndim < 2 or A.shape[-1] != A.shape[-2]:
        raise ValueError(f"expected square matrices, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix has non-finite entries")
    s = _scaling_exponent(A)
    scaled = A / (2.0 ** s)[..., None, None]
    X = _pade13(scaled)
    for k in range(int(s.max(initial=0))):
        active = (s > k)[..., None, None]
        X = np.where(active, X @ X, X)
    return _exact_identity(A, X)


def _exact_identity(A: np.ndarray, X: np.ndarray) -> np.ndarray:
    # the rational approximant is only accurate to rounding at A = 0
    zero = ~np.any(A != 0, axis=(-2, -1))
    if np.any(zero):
        X = np.where(zero[..., None, None], np.eye(A.shape[-1]), X)
    return X


def _scaling_exponent(A: np.ndarray) -> np.ndarray:
    norm1 = np.abs(A).sum(axis=-2).max(axis=-1)
    with np.errstate(divide="ignore"):
        s = np.where(norm1 > _THETA13, np.ceil(np.log2(norm1 / _THETA13)), 0).astype(int)
    return np.maximum(s, 0)


class ExpmWithDerivative:
    """Exponential of a matrix stack that can also apply its Frechet derivative.

    The Pade factorization and the squaring chain are kept, so the forward
    value is available before the derivative direction ``E`` is known.  The
    derivative is the top-right block of ``expm([[A, E], [0, A]])``, carried
    through every Pade and squaring step without forming the doubled matrix.
    """

    def __init__(self, A: np.ndarray):
        A = np.asarray(A)
        self.s = _scaling_exponent(A)
        self.factor = (2.0 ** self.s)[..., None, None]
        A = A / self.factor
        b = _PADE13
        ident = np.broadcast_to(np.eye(A.shape[-1]), A.shape)
        self.A = A
        self.A2 = A @ A
        self.A4 = self.A2 @ self.A2
        self.A6 = self.A2 @ self.A4
        A2, A4, A6 = self.A2, self.A4, self.A6
        self.W1 = b[13] * A6 + b[11] * A4 + b[9] * A2
        W2 = b[7] * A6 + b[5] * A4 + b[3] * A2 + b[1] * ident
        self.Z1 = b[12] * A6 + b[10] * A4 + b[8] * A2
        Z2 = b[6] * A6 + b[4] * A4 + b[2] * A2 + b[0] * ident
        self.W = A6 @ self.W1 + W2
        U = A @ self.W
        V = A6 @ self.Z1 + Z2
        self.Q_inv = np.linalg.inv(V - U)
        R = self.Q_inv @ (V + U)
        self.R0 = R
        self.squares = []
        for k in range(int(self.s.max(initial=0))):
            self.squares.append(R)
            R = np.where((self.s > k)[..., None, None], R @ R, R)
        self.value = _exact_identity(A, R)

    def frechet(self, E: np.ndarray) -> np.ndarray:
        b = _PADE13
        A, A2, A4, A6 = self.A, self.A2, self.A4, self.A6
        E = np.asarray(E) / self.factor
        M2 = A @ E + E @ A
        M4 = A2 @ M2 + M2 @ A2
        M6 = A4 @ M2 + M4 @ A2
        Lw = A6 @ (b[13] * M6 + b[11] * M4 + b[9] * M2) + M6 @ self.W1 + (b[7] * M6 + b[5] * M4 + b[3] * M2)
        Lu = A @ Lw + E @ self.W
        Lv = A6 @ (b[12] * M6 + b[10] * M4 + b[8] * M2) + M6 @ self.Z1 + (b[6] * M6 + b[4] * M4 + b[2] * M2)
        Lx = self.Q_inv @ (Lu + Lv + (Lu - Lv) @ self.R0)
        for k, R in enumerate(self.squares):
            Lx = np.where((self.s > k)[..., None, None], R @ Lx + Lx @ R, Lx)
        return Lx


def expm_frechet(A: np.ndarray, E: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(expm(A), L(A, E))``, the exponential and its Frechet derivative."""
    A, E = np.asarray(A), np.asarray(E)
    shape = np.broadcast_shapes(A.shape, E.shape)
    ew = ExpmWithDerivative(np.broadcast_to(A, shape))
    return ew.value, ew.frechet(np.broadcast_to(E, shape))


def expm_frechet_block(A: np.ndarray, E: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Reference path for :func:`expm_frechet` using the block identity

    ``expm([[A, E], [0, A]]) = [[expm(A), L(A, E)], [0, expm(A)]]``.
    """
    A = np.asarray(A)
    E = np.asarray(E)
    n = A.shape[-1]
    # rescale E so the block norm is governed by A; L is linear in E
    e_norm = np.abs(E).sum(axis=-2).max(axis=-1)
    a_norm = np.abs(A).sum(axis=-2).max(axis=-1)
    target = np.maximum(a_norm, 1.0)
    scale = np.where(e_norm > 0, e_norm / target, 1.0)[..., None, None]
    E = E / scale
    shape = np.broadcast_shapes(A.shape, E.shape)
    big = np.zeros(shape[:-2] + (2 * n, 2 * n), dtype=np.result_type(A, E))
    big[..., :n, :n] = A
    big[..., n:, n:] = A
    big[..., :n, n:] = E
    X = expm(big)
    return X[..., :n, :n], X[..., :n, n:] * scale
