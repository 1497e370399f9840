"""Emulated projective measurements of the two-spin subsystem.

Each of the 9 Pauli settings ``(a, b)`` in ``{x, y, z}^2`` is measured ``N``
times.  Outcome ``s`` in ``{0, 1}`` labels the eigenvalue ``2 s - 1`` of the
measured Pauli operator, so in the ``z`` basis outcome 0 is ``|0>``.
Counts per setting are stored in the order ``(00, 01, 10, 11)``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .basis import PAULI, coherence_to_rho, default_basis
from .errors import ConfigError, NonPhysicalState

SETTINGS = tuple(itertools.product("xyz", repeat=2))
OUTCOMES = ((0, 0), (0, 1), (1, 0), (1, 1))
_SIGN = np.array([-1.0, 1.0])


def _eigenprojectors(axis: str) -> tuple[np.ndarray, np.ndarray]:
    w, U = np.linalg.eigh(PAULI[axis])  # ascending: eigenvalue -1 then +1
    return tuple(np.outer(U[:, k], U[:, k].conj()) for k in range(2))


_PROJ = {a: _eigenprojectors(a) for a in "xyz"}
# (9, 4, 4, 4): joint projectors per setting and outcome
_JOINT = np.array([[np.kron(_PROJ[a][s1], _PROJ[b][s2]) for s1, s2 in OUTCOMES] for a, b in SETTINGS])


@dataclass(frozen=True)
class MeasurementConfig:
    N: int | None = 10  # None means exact expectation values
    M: int = 20
    T_total: float = 10.0
    dt: float = 0.01
    seed: int = 0

    def __post_init__(self):
        if self.N is not None and self.N < 1:
            raise ConfigError("N must be >= 1 (or None for exact values)")
        if self.M < 1:
            raise ConfigError("M must be >= 1")

    @property
    def exact(self) -> bool:
        return self.N is None


@dataclass
class MeasurementDataset:
    traj_id: np.ndarray  # (R,)
    t: np.ndarray  # (R,)
    v0: np.ndarray  # (R, 16)
    v_est: np.ndarray  # (R, 16)
    counts: np.ndarray | None  # (R, 9, 4) or None in exact mode
    N: int | None
    M: int
    seed: int

    def __len__(self) -> int:
        return len(self.t)

    def subset(self, idx) -> MeasurementDataset:
        counts = None if self.counts is None else self.counts[idx]
        return MeasurementDataset(
            self.traj_id[idx], self.t[idx], self.v0[idx], self.v_est[idx], counts, self.N, self.M, self.seed
        )


def sample_times(config: MeasurementConfig, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Draw ``M`` uniform times in ``[0, T]`` snapped to the ``dt`` grid.

    Returns ``(grid_indices, times)``; duplicates are allowed.
    """
    raw = rng.uniform(0.0, config.T_total, size=config.M)
    n_max = int(round(config.T_total / config.dt))
    idx = np.clip(np.rint(raw / config.dt).astype(int), 0, n_max)
    return idx, idx * config.dt


def outcome_probabilities(rho: np.ndarray) -> np.ndarray:
    """Joint outcome probabilities, shape ``(9, 4)``."""
    p = np.einsum("ksab,ba->ks", _JOINT, rho).real
    if np.any(p < -1e-9):
        raise NonPhysicalState(f"negative outcome probability {p.min():.3e}")
    p = np.clip(p, 0.0, None)
    return p / p.sum(axis=1, keepdims=True)


def estimate_from_counts(counts: np.ndarray) -> np.ndarray:
    """Coherence-vector estimate from ``(9, 4)`` outcome counts."""
    basis = default_basis()
    counts = np.asarray(counts, dtype=float)
    shots = counts.sum(axis=1)
    v = np.zeros(16)
    v[0] = 0.5
    corr = np.array([_SIGN[s1] * _SIGN[s2] for s1, s2 in OUTCOMES])
    first = np.array([_SIGN[s1] for s1, _ in OUTCOMES])
    second = np.array([_SIGN[s2] for _, s2 in OUTCOMES])
    for a in "xyz":
        rows = [k for k, (x, _) in enumerate(SETTINGS) if x == a]
        v[basis.index[(a, "I")]] = 0.5 * (counts[rows] @ first).sum() / shots[rows].sum()
        rows = [k for k, (_, y) in enumerate(SETTINGS) if y == a]
        v[basis.index[("I", a)]] = 0.5 * (counts[rows] @ second).sum() / shots[rows].sum()
    for k, (a, b) in enumerate(SETTINGS):
        v[basis.index[(a, b)]] = 0.5 * (counts[k] @ corr) / shots[k]
    return v


def measure_state(rho: np.ndarray, N: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Simulate ``N`` shots per setting; returns ``(counts (9, 4), v_est (16,))``."""
    p = outcome_probabilities(rho)
    counts = np.array([rng.multinomial(N, pk) for pk in p])
    return counts, estimate_from_counts(counts)


def record_rng(seed: int, traj_id: int, m: int) -> np.random.Generator:
    """Independent stream for the measurement of one (trajectory, time) record."""
    return np.random.default_rng([seed, traj_id, m, 1])


def times_rng(seed: int, traj_id: int) -> np.random.Generator:
    return np.random.default_rng([seed, traj_id, 0])


def build_dataset(trajectories: list[np.ndarray], config: MeasurementConfig) -> MeasurementDataset:
    """Noisy records for every trajectory: ``M`` random times, ``N`` shots per setting.

    ``trajectories[k]`` holds exact coherence vectors on the ``dt`` grid;
    its first row is used as the (exact) initial vector of each record.
    """
    basis = default_basis()
    ids, ts, v0s, vs, cs = [], [], [], [], []
    for k, traj in enumerate(trajectories):
        idx, times = sample_times(config, times_rng(config.seed, k))
        if idx.max() >= len(traj):
            raise ConfigError("measurement window exceeds the recorded trajectory")
        for m, (i, t) in enumerate(zip(idx, times)):
            v = traj[i]
            if config.exact:
                v_est, counts = v.copy(), None
            else:
                rho = coherence_to_rho(v, basis, check=False)
                counts, v_est = measure_state(rho, config.N, record_rng(config.seed, k, m))
            ids.append(k)
            ts.append(t)
            v0s.append(traj[0])
            vs.append(v_est)
            cs.append(counts)
    counts = None if config.exact else np.array(cs, dtype=int)
    return MeasurementDataset(
        np.array(ids, dtype=int), np.array(ts), np.array(v0s), np.array(vs), counts, config.N, config.M, config.seed
    )
