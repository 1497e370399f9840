"""Training the Lindblad dynamics approximator (LDA).

The model propagates coherence vectors with ``expm(t L(theta))``.  Gradients
are exact: ``d loss / d L`` comes from the adjoint of the Frechet derivative of
the exponential (``t * L_exp(t L^T, G)``), then is chained to the parameters
through the linear Hamiltonian map and the quadratic ``c = Z^dag Z`` map.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from .basis import StructureConstants, default_structure_constants
from .errors import ConfigError, DivergedLoss
from .expm import ExpmWithDerivative, expm
from .generator import N_PARAMS, N_TRACELESS, GeneratorParams, lindblad_matrix, pullback_gradient
from .measurement import MeasurementDataset

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 1000
    batch_size: int = 64
    lr0: float = 1e-3
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    alpha11: float = 1e-4  # L1 weight on theta_X, theta_Y
    alpha12: float = 1e-4  # L1 weight on theta_H
    decay: float = 0.05
    decay_offsets: tuple[int, ...] = (100, 50)
    seed: int = 0
    init_scale: float = 0.01
    holdout: float = 0.0

    def __post_init__(self):
        if self.epochs <= max(self.decay_offsets, default=0):
            raise ConfigError(f"epochs must exceed {max(self.decay_offsets)}")
        if self.lr0 <= 0:
            raise ConfigError("lr0 must be positive")
        if self.alpha11 < 0 or self.alpha12 < 0:
            raise ConfigError("regularization weights must be non-negative")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if not 0.0 <= self.holdout < 1.0:
            raise ConfigError("holdout must lie in [0, 1)")

    def lr_at(self, epoch: int) -> float:
        lr = self.lr0
        for off in self.decay_offsets:
            if epoch >= self.epochs - off:
                lr *= self.decay
        return lr

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(asdict(self), sort_keys=True).encode()).hexdigest()[:16]


@dataclass
class Batch:
    v0: np.ndarray  # (B, 16)
    t: np.ndarray  # (B,)
    target: np.ndarray  # (B, 16)

    @classmethod
    def from_dataset(cls, ds: MeasurementDataset, idx=None) -> Batch:
        if idx is None:
            return cls(ds.v0, ds.t, ds.v_est)
        return cls(ds.v0[idx], ds.t[idx], ds.v_est[idx])

    def __len__(self) -> int:
        return len(self.t)


@dataclass
class LDAModel:
    params: GeneratorParams
    sc: StructureConstants = field(default_factory=default_structure_constants, repr=False)

    @classmethod
    def init(cls, rng: np.random.Generator, scale: float = 0.01) -> LDAModel:
        return cls(GeneratorParams.random(rng, scale))

    def L(self) -> np.ndarray:
        return lindblad_matrix(self.params, self.sc).L

    def propagator(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        return expm(t[..., None, None] * self.L())

    def forward(self, v0: np.ndarray, t) -> np.ndarray:
        """Predicted coherence vectors ``expm(t L) v0``; broadcasts over a batch."""
        if np.any(np.asarray(t) < 0):
            raise ValueError("t must be non-negative")
        return np.einsum("...ij,...j->...i", self.propagator(t), v0)


def regularizer(params: GeneratorParams, alpha11: float, alpha12: float) -> float:
    return alpha11 * (np.abs(params.theta_X).sum() + np.abs(params.theta_Y).sum()) + alpha12 * np.abs(
        params.theta_H
    ).sum()


def mse(model: LDAModel, batch: Batch) -> float:
    r = model.forward(batch.v0, batch.t) - batch.target
    return float(np.mean(np.sum(r * r, axis=-1)))


def loss(model: LDAModel, batch: Batch, alpha11: float = 0.0, alpha12: float = 0.0) -> float:
    if len(batch) == 0:
        raise ValueError("empty batch")
    return mse(model, batch) + regularizer(model.params, alpha11, alpha12)


def regularizer_gradient(params: GeneratorParams, alpha11: float, alpha12: float) -> np.ndarray:
    n = N_TRACELESS
    g = np.empty(N_PARAMS)
    g[:n] = alpha12 * np.sign(params.theta_H)
    g[n:] = alpha11 * np.sign(np.concatenate([params.theta_X.ravel(), params.theta_Y.ravel()]))
    return g


def mse_and_grad_L(L: np.ndarray, batch: Batch) -> tuple[float, np.ndarray]:
    """MSE of a batch and its gradient with respect to the generator matrix."""
    B = len(batch)
    A = batch.t[:, None, None] * L.T  # exponent of the transposed propagator
    ew = ExpmWithDerivative(A)
    # expm(t L^T) = expm(t L)^T, so the forward map is applied transposed
    r = np.einsum("bji,bj->bi", ew.value, batch.v0) - batch.target
    value = float(np.mean(np.sum(r * r, axis=-1)))
    G = (2.0 / B) * r[:, :, None] * batch.v0[:, None, :]
    grad_L = np.einsum("b,bij->ij", batch.t, ew.frechet(G))
    return value, grad_L


def loss_and_gradient(
    model: LDAModel, batch: Batch, alpha11: float = 0.0, alpha12: float = 0.0
) -> tuple[float, np.ndarray]:
    """Total loss and its exact gradient as a flat ``(theta_H, theta_X, theta_Y)`` vector."""
    value, grad_L = mse_and_grad_L(model.L(), batch)
    g = pullback_gradient(grad_L, model.params, model.sc)
    g += regularizer_gradient(model.params, alpha11, alpha12)
    return value + regularizer(model.params, alpha11, alpha12), g


def gradient(model: LDAModel, batch: Batch, alpha11: float = 0.0, alpha12: float = 0.0) -> GeneratorParams:
    return GeneratorParams.from_vector(loss_and_gradient(model, batch, alpha11, alpha12)[1])


class Adam:
    def __init__(self, n: int, beta1: float, beta2: float, eps: float):
        self.m = np.zeros(n)
        self.v = np.zeros(n)
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.k = 0

    def step(self, x: np.ndarray, g: np.ndarray, lr: float) -> np.ndarray:
        self.k += 1
        self.m = self.beta1 * self.m + (1 - self.beta1) * g
        self.v = self.beta2 * self.v + (1 - self.beta2) * g * g
        m_hat = self.m / (1 - self.beta1**self.k)
        v_hat = self.v / (1 - self.beta2**self.k)
        return x - lr * m_hat / (np.sqrt(v_hat) + self.eps)


@dataclass
class TrainResult:
    model: LDAModel
    history: list[float]  # full training loss after every epoch
    best_epoch: int
    holdout_history: list[float] = field(default_factory=list)


def train(
    dataset: MeasurementDataset,
    config: TrainConfig,
    init: GeneratorParams | None = None,
) -> TrainResult:
    """Adam over shuffled minibatches; returns the lowest-loss parameters seen."""
    if len(dataset) == 0:
        raise ValueError("dataset is empty")
    rng = np.random.default_rng(config.seed)
    params = init if init is not None else GeneratorParams.random(rng, config.init_scale)
    model = LDAModel(GeneratorParams.from_vector(params.to_vector()))

    idx_all = np.arange(len(dataset))
    holdout = None
    if config.holdout > 0:
        perm = rng.permutation(idx_all)
        n_hold = max(1, int(round(config.holdout * len(perm))))
        holdout = Batch.from_dataset(dataset, np.sort(perm[:n_hold]))
        idx_all = np.sort(perm[n_hold:])
    full = Batch.from_dataset(dataset, idx_all)
    a11, a12 = config.alpha11, config.alpha12

    opt = Adam(N_PARAMS, config.adam_beta1, config.adam_beta2, config.adam_eps)
    x = model.params.to_vector()
    history, hold_hist = [], []
    best_x, best_loss, best_epoch = x.copy(), np.inf, -1
    for epoch in range(config.epochs):
        lr = config.lr_at(epoch)
        order = rng.permutation(len(full))
        for start in range(0, len(order), config.batch_size):
            sel = order[start : start + config.batch_size]
            batch = Batch(full.v0[sel], full.t[sel], full.target[sel])
            _, g = loss_and_gradient(model, batch, a11, a12)
            x = opt.step(x, g, lr)
            model.params = GeneratorParams.from_vector(x)
        value = loss(model, full, a11, a12)
        if not np.isfinite(value):
            raise DivergedLoss(f"non-finite loss at epoch {epoch}")
        history.append(value)
        score = value
        if holdout is not None:
            score = loss(model, holdout, a11, a12)
            hold_hist.append(score)
        if score < best_loss:
            best_loss, best_x, best_epoch = score, x.copy(), epoch
        if epoch % 100 == 0 or epoch == config.epochs - 1:
            log.debug("epoch %d lr %.2e loss %.6e", epoch, lr, value)
    model.params = GeneratorParams.from_vector(best_x)
    return TrainResult(model, history, best_epoch, hold_hist)
