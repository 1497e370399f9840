"""Run configuration and exact-trajectory generation for every data source."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from .basis import default_basis, rho_to_coherence
from .dynamics import (
    DENSE_MAX_L,
    ChainSpec,
    TrajectorySpec,
    evolve_chain_dense,
    haar_random_two_qubit_unitary,
    make_initial_state,
    propagate_lindblad,
    random_density_matrix,
)
from .errors import ConfigError
from .generator import benchmark_model, ground_truth_L
from .measurement import MeasurementConfig
from .tebd import DEFAULT_CHI_MAX, DEFAULT_EPS_SVD, evolve_chain_tebd, make_initial_mps
from .trainer import TrainConfig

MODES = ("benchmark", "chain-dense", "chain-tebd")

# stream tags for seed derivation
_TRAIN_STREAM = 100
_TEST_STREAM = 200


@dataclass(frozen=True)
class BenchmarkSpec:
    Omega: float = 1.0
    V: float = 0.5
    gamma: float = 0.01
    kappa: float = 0.05

    def L_matrix(self) -> np.ndarray:
        return ground_truth_L(benchmark_model(self.Omega, self.V, self.gamma, self.kappa)).L


@dataclass(frozen=True)
class RunConfig:
    mode: str = "benchmark"
    chain: ChainSpec | None = None
    benchmark: BenchmarkSpec = field(default_factory=BenchmarkSpec)
    trajectory: TrajectorySpec = field(default_factory=TrajectorySpec)
    measurement: MeasurementConfig = field(default_factory=MeasurementConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    n_test: int = 10
    chi_max: int = DEFAULT_CHI_MAX
    eps_svd: float = DEFAULT_EPS_SVD
    seed: int = 0
    out_dir: str = "run"

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.mode != "benchmark" and self.chain is None:
            raise ConfigError(f"mode {self.mode!r} needs a chain specification")
        if self.mode == "chain-dense" and self.chain.L > DENSE_MAX_L:
            raise ConfigError(f"chain-dense supports L <= {DENSE_MAX_L}; use chain-tebd")
        if self.n_test < 1:
            raise ConfigError("n_test (r) must be >= 1")
        m, tr = self.measurement, self.trajectory
        if abs(m.T_total - tr.T_total) > 1e-12 or abs(m.dt - tr.dt) > 1e-12:
            raise ConfigError("measurement window must match the trajectory horizon and step")

    @property
    def test_horizon(self) -> float:
        """Evaluation window: doubled for the benchmark to probe extrapolation."""
        factor = 2.0 if self.mode == "benchmark" else 1.0
        return factor * self.trajectory.T_total

    def replace(self, **kw) -> RunConfig:
        return dataclasses.replace(self, **kw)

    def with_cell(self, N: int | None, M: int, seed: int) -> RunConfig:
        return self.replace(
            measurement=dataclasses.replace(self.measurement, N=N, M=M, seed=seed),
            train=dataclasses.replace(self.train, seed=seed),
        )


def _initial_rng(cfg: RunConfig, stream: int, k: int) -> np.random.Generator:
    return np.random.default_rng([cfg.seed, stream, k])


def _one_trajectory(cfg: RunConfig, rng: np.random.Generator, horizon: float) -> np.ndarray:
    dt = cfg.trajectory.dt
    traj = dataclasses.replace(cfg.trajectory, T_total=horizon)
    if cfg.mode == "benchmark":
        v0 = rho_to_coherence(random_density_matrix(rng), default_basis())
        return propagate_lindblad(cfg.benchmark.L_matrix(), v0, np.arange(traj.n_steps + 1) * dt)
    U = haar_random_two_qubit_unitary(rng)
    if cfg.mode == "chain-dense":
        return evolve_chain_dense(cfg.chain, make_initial_state(cfg.chain, U), traj)
    mps = make_initial_mps(cfg.chain, U, chi_max=cfg.chi_max, eps_svd=cfg.eps_svd)
    return evolve_chain_tebd(cfg.chain, mps, traj, cfg.chi_max, cfg.eps_svd)


def training_trajectories(cfg: RunConfig) -> list[np.ndarray]:
    """Exact coherence-vector trajectories on ``[0, T]`` used to build datasets."""
    return [
        _one_trajectory(cfg, _initial_rng(cfg, _TRAIN_STREAM, k), cfg.trajectory.T_total)
        for k in range(cfg.trajectory.n_trajectories)
    ]


def heldout_trajectories(cfg: RunConfig, r: int | None = None) -> list[np.ndarray]:
    """Fresh out-of-sample trajectories over the evaluation window."""
    r = cfg.n_test if r is None else r
    return [_one_trajectory(cfg, _initial_rng(cfg, _TEST_STREAM, k), cfg.test_horizon) for k in range(r)]
