"""File formats: datasets, exact trajectories, checkpoints and run configs.

Datasets and trajectories are newline-delimited JSON objects; every float
is written with 17 significant digits so files round-trip exactly and are
byte-identical for identical inputs.
"""

from __future__ import annotations

import dataclasses
import json
import math
from pathlib import Path

import numpy as np

from .basis import default_basis
from .dynamics import ChainSpec, TrajectorySpec
from .errors import ConfigError, LindbladLearnError
from .generator import N_PARAMS, GeneratorParams
from .measurement import MeasurementConfig, MeasurementDataset
from .pipeline import BenchmarkSpec, RunConfig
from .trainer import TrainConfig

SCHEMA_VERSION = 1
CHECKPOINT_VERSION = 1
BASIS_TAG = "pauli2-lex-IXYZ"


class FormatError(LindbladLearnError):
    """A file is unreadable, truncated or has the wrong shape."""


def _num(x) -> str:
    x = float(x)
    if not math.isfinite(x):
        raise ValueError(f"cannot serialize non-finite value {x}")
    return format(x, ".17g")


def dumps(obj) -> str:
    """Compact JSON with fixed 17-significant-digit floats."""
    if obj is None:
        return "null"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _num(obj)
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, np.ndarray):
        return dumps(obj.tolist())
    if isinstance(obj, (list, tuple)):
        return "[" + ",".join(dumps(v) for v in obj) + "]"
    if isinstance(obj, dict):
        return "{" + ",".join(f"{json.dumps(str(k))}:{dumps(v)}" for k, v in obj.items()) + "}"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _read_ndjson(path) -> list[dict]:
    rows = []
    try:
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                if line.strip():
                    rows.append(json.loads(line))
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}:{lineno}: malformed record ({exc.msg})") from exc
    except OSError as exc:
        raise FormatError(f"cannot read {path}: {exc}") from exc
    return rows


def write_dataset(ds: MeasurementDataset, path) -> int:
    lines = []
    for k in range(len(ds)):
        rec = {
            "schema_version": SCHEMA_VERSION,
            "traj_id": int(ds.traj_id[k]),
            "t": ds.t[k],
            "v0": ds.v0[k],
            "v_est": ds.v_est[k],
            "counts": None if ds.counts is None else ds.counts[k],
            "N": ds.N,
            "M": ds.M,
            "seed": ds.seed,
        }
        lines.append(dumps(rec))
    data = ("\n".join(lines) + "\n").encode()
    Path(path).write_bytes(data)
    return len(data)


def read_dataset(path) -> MeasurementDataset:
    rows = _read_ndjson(path)
    if not rows:
        raise FormatError(f"{path}: no records")
    try:
        for r in rows:
            if r["schema_version"] != SCHEMA_VERSION:
                raise FormatError(f"{path}: unsupported schema_version {r['schema_version']}")
        v0 = np.array([r["v0"] for r in rows], dtype=float)
        v_est = np.array([r["v_est"] for r in rows], dtype=float)
        exact = rows[0]["counts"] is None
        counts = None if exact else np.array([r["counts"] for r in rows], dtype=int)
        ds = MeasurementDataset(
            np.array([r["traj_id"] for r in rows], dtype=int),
            np.array([r["t"] for r in rows], dtype=float),
            v0,
            v_est,
            counts,
            rows[0]["N"],
            int(rows[0]["M"]),
            int(rows[0]["seed"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"{path}: bad record ({exc})") from exc
    if v0.shape[1:] != (16,) or v_est.shape[1:] != (16,):
        raise FormatError(f"{path}: coherence vectors must have 16 components")
    if counts is not None and counts.shape[1:] != (9, 4):
        raise FormatError(f"{path}: counts must be 9 x 4 per record")
    return ds


def write_trajectories(trajs: list[np.ndarray], dt: float, path) -> int:
    lines = []
    for k, traj in enumerate(trajs):
        for i, v in enumerate(traj):
            lines.append(dumps({"traj_id": k, "t": i * dt, "v": v}))
    data = ("\n".join(lines) + "\n").encode()
    Path(path).write_bytes(data)
    return len(data)


def read_trajectories(path) -> tuple[list[np.ndarray], float]:
    rows = _read_ndjson(path)
    if not rows:
        raise FormatError(f"{path}: no records")
    try:
        by_id: dict[int, list] = {}
        times: dict[int, list] = {}
        for r in rows:
            by_id.setdefault(int(r["traj_id"]), []).append(r["v"])
            times.setdefault(int(r["traj_id"]), []).append(float(r["t"]))
        trajs = [np.array(by_id[k], dtype=float) for k in sorted(by_id)]
        t0 = times[min(times)]
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"{path}: bad record ({exc})") from exc
    if any(t.ndim != 2 or t.shape[1] != 16 for t in trajs):
        raise FormatError(f"{path}: coherence vectors must have 16 components")
    dt = t0[1] - t0[0] if len(t0) > 1 else 0.0
    return trajs, dt


def write_checkpoint(params: GeneratorParams, config: TrainConfig, path, extra: dict | None = None) -> None:
    doc = {
        "format_version": CHECKPOINT_VERSION,
        "basis": BASIS_TAG,
        "basis_labels": [default_basis().label_str(i) for i in range(16)],
        "config_hash": config.digest(),
        "train_config": dataclasses.asdict(config),
        "theta_H": params.theta_H,
        "theta_X": params.theta_X,
        "theta_Y": params.theta_Y,
    }
    if extra:
        doc.update(extra)
    Path(path).write_text(dumps(doc) + "\n")


def read_checkpoint(path) -> tuple[GeneratorParams, dict]:
    path = Path(path)
    if not path.exists():
        raise FormatError(f"checkpoint {path} does not exist")
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: malformed checkpoint ({exc.msg})") from exc
    if doc.get("format_version") != CHECKPOINT_VERSION or doc.get("basis") != BASIS_TAG:
        raise FormatError(f"{path}: unsupported checkpoint version or basis ordering")
    try:
        x = np.concatenate(
            [
                np.asarray(doc["theta_H"], dtype=float).ravel(),
                np.asarray(doc["theta_X"], dtype=float).ravel(),
                np.asarray(doc["theta_Y"], dtype=float).ravel(),
            ]
        )
        if np.shape(doc["theta_H"]) != (15,) or np.shape(doc["theta_X"]) != (15, 15):
            raise ValueError("parameter shapes do not match the 2-qubit basis")
        if np.shape(doc["theta_Y"]) != (15, 15) or x.shape != (N_PARAMS,):
            raise ValueError("parameter shapes do not match the 2-qubit basis")
    except (KeyError, ValueError) as exc:
        raise FormatError(f"{path}: {exc}") from exc
    return GeneratorParams.from_vector(x), doc


def config_to_dict(cfg: RunConfig) -> dict:
    doc = dataclasses.asdict(cfg)
    doc["train"]["decay_offsets"] = list(cfg.train.decay_offsets)
    return doc


def config_from_dict(doc: dict) -> RunConfig:
    """Build a :class:`RunConfig`; missing sections take their defaults."""
    try:
        doc = dict(doc)
        chain = doc.pop("chain", None)
        sub = {
            "benchmark": (BenchmarkSpec, doc.pop("benchmark", None)),
            "trajectory": (TrajectorySpec, doc.pop("trajectory", None)),
            "measurement": (MeasurementConfig, doc.pop("measurement", None)),
            "train": (TrainConfig, doc.pop("train", None)),
        }
        kw = dict(doc)
        if chain is not None:
            kw["chain"] = ChainSpec(**chain)
        for name, (cls, val) in sub.items():
            if val is not None:
                if name == "train" and "decay_offsets" in val:
                    val = {**val, "decay_offsets": tuple(val["decay_offsets"])}
                kw[name] = cls(**val)
        return RunConfig(**kw)
    except TypeError as exc:
        raise ConfigError(f"invalid configuration: {exc}") from exc


def load_config(path) -> RunConfig:
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return config_from_dict(doc)
