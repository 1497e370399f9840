"""Out-of-sample error, (N, M) sweeps and trajectory comparison exports."""

from __future__ import annotations

import csv
import io
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .basis import coherence_to_rho, default_basis
from .dynamics import propagate_lindblad
from .errors import LindbladLearnError
from .measurement import MeasurementDataset, build_dataset
from .pipeline import RunConfig, heldout_trajectories, training_trajectories
from .trainer import LDAModel, train

log = logging.getLogger(__name__)


def _L_of(model) -> np.ndarray:
    if isinstance(model, LDAModel):
        return model.L()
    return getattr(model, "L", model)


def predict_trajectory(model, v0: np.ndarray, n_steps: int, dt: float) -> np.ndarray:
    return propagate_lindblad(_L_of(model), v0, np.arange(n_steps + 1) * dt)


def time_averaged_error(pred: np.ndarray, exact: np.ndarray, dt: float) -> float:
    """Trapezoid time average of ``|pred - exact|^2 / |exact|^2`` over the grid.

    For an orthonormal Hermitian basis ``||rho||_2^2 = |v|^2``, so the
    Hilbert-Schmidt ratio is evaluated on coherence vectors directly.
    """
    num = np.sum((pred - exact) ** 2, axis=1)
    den = np.sum(exact**2, axis=1)
    T = dt * (len(exact) - 1)
    return float(np.trapezoid(num / den, dx=dt) / T)


def trajectory_error(model, exact: np.ndarray, dt: float) -> float:
    """Time-averaged relative Hilbert-Schmidt error of one predicted trajectory."""
    pred = predict_trajectory(model, exact[0], len(exact) - 1, dt)
    return time_averaged_error(pred, exact, dt)


def epsilon(model, exact_trajectories: list[np.ndarray], dt: float) -> float:
    """Mean over trajectories of the time-averaged normalized squared distance."""
    if len(exact_trajectories) < 1:
        raise ValueError("need at least one exact trajectory (r >= 1)")
    return float(np.mean([trajectory_error(model, ex, dt) for ex in exact_trajectories]))


def min_predicted_eigenvalue(model, exact_trajectories: list[np.ndarray], dt: float) -> float:
    worst = np.inf
    for ex in exact_trajectories:
        pred = predict_trajectory(model, ex[0], len(ex) - 1, dt)
        rho = coherence_to_rho(pred, check=False)
        worst = min(worst, float(np.linalg.eigvalsh(rho).min()))
    return worst


def cell_seed(master_seed: int, N: int | None, M: int) -> int:
    """Seed of one sweep cell, derived from the master seed and ``(N, M)``."""
    n_tag = 0 if N is None else int(N)
    return int(np.random.SeedSequence([master_seed, n_tag, M]).generate_state(1)[0])


@dataclass
class CellResult:
    N: int | None
    M: int
    epsilon: float
    r: int
    seed: int
    train_loss: float = float("nan")
    best_epoch: int = -1
    error: str | None = None
    params: list[float] | None = field(default=None, repr=False)


@dataclass
class SweepResult:
    N_values: list
    M_values: list
    cells: list[CellResult]

    def grid(self) -> np.ndarray:
        """Array of epsilon indexed ``[i_N, i_M]``."""
        out = np.full((len(self.N_values), len(self.M_values)), np.nan)
        for c in self.cells:
            out[self.N_values.index(c.N), self.M_values.index(c.M)] = c.epsilon
        return out

    def cell(self, N, M) -> CellResult:
        for c in self.cells:
            if c.N == N and c.M == M:
                return c
        raise KeyError((N, M))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["N", "M", "epsilon", "r", "seed"])
        for c in self.cells:
            w.writerow(["inf" if c.N is None else c.N, c.M, f"{c.epsilon:.17g}", c.r, c.seed])
        return buf.getvalue()

    def to_json(self) -> str:
        doc = {
            "N_values": self.N_values,
            "M_values": self.M_values,
            "cells": [{k: v for k, v in asdict(c).items() if k != "params"} for c in self.cells],
        }
        return json.dumps(doc, indent=1)


def run_cell(
    cfg: RunConfig, N: int | None, M: int, train_trajs: list[np.ndarray], test_trajs: list[np.ndarray],
    seed: int, keep_params: bool = False,
) -> CellResult:
    """Measure, train and evaluate one ``(N, M)`` combination."""
    cell_cfg = cfg.with_cell(N, M, seed)
    try:
        ds = build_dataset(train_trajs, cell_cfg.measurement)
        res = train(ds, cell_cfg.train)
        eps = epsilon(res.model, test_trajs, cfg.trajectory.dt)
    except (LindbladLearnError, np.linalg.LinAlgError, FloatingPointError, ValueError) as exc:
        log.warning("cell N=%s M=%s failed: %s", N, M, exc)
        return CellResult(N, M, float("nan"), len(test_trajs), seed, error=f"{type(exc).__name__}: {exc}")
    best = res.history[res.best_epoch]
    params = res.model.params.to_vector().tolist() if keep_params else None
    return CellResult(N, M, eps, len(test_trajs), seed, best, res.best_epoch, None, params)


def _run_cell_star(args):
    return run_cell(*args)


def run_sweep(
    N_values: list,
    M_values: list,
    cfg: RunConfig,
    workers: int | None = None,
    keep_params: bool = False,
    train_trajs: list[np.ndarray] | None = None,
    test_trajs: list[np.ndarray] | None = None,
) -> SweepResult:
    """Train and evaluate on every ``(N, M)`` pair; failed cells carry ``nan`` and an error."""
    train_trajs = training_trajectories(cfg) if train_trajs is None else train_trajs
    test_trajs = heldout_trajectories(cfg) if test_trajs is None else test_trajs
    jobs = [
        (cfg, N, M, train_trajs, test_trajs, cell_seed(cfg.seed, N, M), keep_params)
        for N in N_values
        for M in M_values
    ]
    workers = workers or os.cpu_count() or 1
    if workers == 1:
        cells = [_run_cell_star(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            cells = list(pool.map(_run_cell_star, jobs))
    return SweepResult(list(N_values), list(M_values), cells)


def export_trajectory_comparison(
    model,
    exact: np.ndarray,
    dt: float,
    dataset: MeasurementDataset | None = None,
    traj_id: int | None = None,
    components: list[int] | None = None,
) -> str:
    """Delimited table of exact vs predicted coherence components over time.

    Noisy training points of ``traj_id`` (if given) fill the ``noisy_*``
    columns at their sampled times; other rows leave them empty.
    """
    basis = default_basis()
    comps = list(range(1, 16)) if components is None else list(components)
    names = [basis.label_str(i) for i in comps]
    pred = predict_trajectory(model, exact[0], len(exact) - 1, dt)
    noisy: dict[int, list[np.ndarray]] = {}
    if dataset is not None and traj_id is not None:
        for t, v in zip(dataset.t[dataset.traj_id == traj_id], dataset.v_est[dataset.traj_id == traj_id]):
            noisy.setdefault(int(round(t / dt)), []).append(v)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    header = ["t"] + [f"exact_{n}" for n in names] + [f"pred_{n}" for n in names]
    if dataset is not None:
        header += [f"noisy_{n}" for n in names]
    w.writerow(header)
    for k in range(len(exact)):
        row = [f"{k * dt:.10g}"] + [f"{exact[k, i]:.17g}" for i in comps] + [f"{pred[k, i]:.17g}" for i in comps]
        if dataset is not None:
            if k in noisy:
                v = np.mean(noisy[k], axis=0)
                row += [f"{v[i]:.17g}" for i in comps]
            else:
                row += [""] * len(comps)
        w.writerow(row)
    return buf.getvalue()
