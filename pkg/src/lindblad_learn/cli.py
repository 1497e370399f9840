"""Command-line interface: generate -> train -> evaluate / sweep / readout / export.

Exit codes: 0 success, 1 usage or invalid configuration, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import io as lio
from .dynamics import ChainSpec
from .errors import ConfigError, LindbladLearnError
from .evaluation import epsilon, export_trajectory_comparison, min_predicted_eigenvalue, run_sweep
from .generator import (
    RATE_THRESHOLD,
    coefficients_from_jump_set,
    benchmark_model,
    extract_readout,
    format_readout,
    params_from_coefficients,
    readout_to_dict,
)
from .measurement import build_dataset
from .pipeline import RunConfig, heldout_trajectories, training_trajectories
from .trainer import LDAModel, train

log = logging.getLogger("lindblad_learn")

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _int_list(s: str) -> list[int]:
    return [int(x) for x in s.split(",") if x]


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON run configuration; flags override its fields")
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--out", help="output directory")
    p.add_argument("--workers", type=int, default=None, help="parallel workers (default: all cores)")
    p.add_argument("--mode", choices=["benchmark", "chain-dense", "chain-tebd"])
    p.add_argument("--N", type=int, help="shots per basis setting")
    p.add_argument("--exact", action="store_true", help="use exact expectation values (N -> infinity)")
    p.add_argument("--M", type=int, help="sampled times per trajectory")
    p.add_argument("--V", type=float, help="interaction strength in units of Omega")
    p.add_argument("--L", type=int, help="number of spins in the ring")
    p.add_argument("--n-traj", type=int, dest="n_traj", help="number of training trajectories")
    p.add_argument("--T", type=float, help="time window Omega*T")
    p.add_argument("--dt", type=float, help="recording step Omega*dt")
    p.add_argument("--r", type=int, help="number of held-out test trajectories")
    p.add_argument("--chi-max", type=int, dest="chi_max")
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", type=int, dest="batch_size")
    p.add_argument("--lr", type=float)
    p.add_argument("--alpha", type=float, help="sets both L1 weights")
    p.add_argument("-v", "--verbose", action="store_true")


def build_config(args, inherit: bool = False) -> RunConfig:
    """Merge the config file (if any) with command-line overrides and validate.

    With ``inherit`` and no ``--config``, the ``config.json`` left in the
    output directory by ``generate`` is used as the base.
    """
    path = args.config
    if path is None and inherit:
        saved = Path(args.out or RunConfig().out_dir) / "config.json"
        path = saved if saved.exists() else None
    base = lio.load_config(path) if path else RunConfig()
    doc = lio.config_to_dict(base)
    if args.mode:
        doc["mode"] = args.mode
    if args.seed is not None:
        doc["seed"] = args.seed
        doc["measurement"]["seed"] = args.seed
        doc["train"]["seed"] = args.seed
    if args.out:
        doc["out_dir"] = args.out
    if args.r is not None:
        doc["n_test"] = args.r
    if args.chi_max is not None:
        doc["chi_max"] = args.chi_max
    if args.V is not None or args.L is not None:
        chain = doc.get("chain") or dataclasses.asdict(ChainSpec(L=10))
        if args.V is not None:
            chain["V"] = args.V
            doc["benchmark"]["V"] = args.V
        if args.L is not None:
            chain["L"] = args.L
        if doc["mode"] != "benchmark" or args.L is not None:
            doc["chain"] = chain
    if doc["mode"] != "benchmark" and doc.get("chain") is None:
        doc["chain"] = dataclasses.asdict(ChainSpec(L=10))
    for key, name in (("T", "T_total"), ("dt", "dt")):
        val = getattr(args, key)
        if val is not None:
            doc["trajectory"][name] = val
            doc["measurement"][name] = val
    if args.n_traj is not None:
        doc["trajectory"]["n_trajectories"] = args.n_traj
    if args.exact:
        doc["measurement"]["N"] = None
    elif args.N is not None:
        doc["measurement"]["N"] = args.N
    if args.M is not None:
        doc["measurement"]["M"] = args.M
    for key, name in (("epochs", "epochs"), ("batch_size", "batch_size"), ("lr", "lr0")):
        val = getattr(args, key)
        if val is not None:
            doc["train"][name] = val
    if args.alpha is not None:
        doc["train"]["alpha11"] = doc["train"]["alpha12"] = args.alpha
    return lio.config_from_dict(doc)


def _out(cfg: RunConfig) -> Path:
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_json(path: Path, doc) -> None:
    path.write_text(json.dumps(doc, indent=1) + "\n")


def cmd_generate(args) -> int:
    cfg = build_config(args)
    train_trajs = training_trajectories(cfg)
    test_trajs = heldout_trajectories(cfg)
    ds = build_dataset(train_trajs, cfg.measurement)
    out = _out(cfg)
    n1 = lio.write_trajectories(train_trajs, cfg.trajectory.dt, out / "exact_train.ndjson")
    n2 = lio.write_trajectories(test_trajs, cfg.trajectory.dt, out / "exact_test.ndjson")
    n3 = lio.write_dataset(ds, out / "dataset.ndjson")
    (out / "config.json").write_text(lio.dumps(lio.config_to_dict(cfg)) + "\n")
    if cfg.mode == "benchmark":
        b = cfg.benchmark
        theta_H, c = coefficients_from_jump_set(benchmark_model(b.Omega, b.V, b.gamma, b.kappa))
        lio.write_checkpoint(params_from_coefficients(theta_H, c), cfg.train, out / "ground_truth.json")
    print(
        f"trajectories: {len(train_trajs)} train, {len(test_trajs)} test; records: {len(ds)}; "
        f"bytes: {n1 + n2 + n3}"
    )
    return EXIT_OK


def _dataset_path(args, cfg: RunConfig) -> Path:
    return Path(args.dataset) if args.dataset else Path(cfg.out_dir) / "dataset.ndjson"


def cmd_train(args) -> int:
    cfg = build_config(args, inherit=True)
    ds = lio.read_dataset(_dataset_path(args, cfg))
    init = None
    ckpt_path = Path(cfg.out_dir) / "checkpoint.json"
    if args.resume:
        init, _ = lio.read_checkpoint(args.checkpoint or ckpt_path)
    res = train(ds, cfg.train, init=init)
    out = _out(cfg)
    lio.write_checkpoint(
        res.model.params, cfg.train, Path(args.checkpoint) if args.checkpoint else ckpt_path,
        extra={"best_epoch": res.best_epoch, "best_loss": res.history[res.best_epoch]},
    )
    lines = ["epoch,loss"] + [f"{k},{v:.17g}" for k, v in enumerate(res.history)]
    (out / "loss_history.csv").write_text("\n".join(lines) + "\n")
    print(f"trained {cfg.train.epochs} epochs on {len(ds)} records; best loss {res.history[res.best_epoch]:.6e}")
    return EXIT_OK


def _load_model(args, cfg: RunConfig) -> LDAModel:
    path = Path(args.checkpoint) if args.checkpoint else Path(cfg.out_dir) / "checkpoint.json"
    params, _ = lio.read_checkpoint(path)
    return LDAModel(params)


def _load_trajectories(args, cfg: RunConfig, default: str = "exact_test.ndjson"):
    path = Path(args.trajectories) if args.trajectories else Path(cfg.out_dir) / default
    trajs, dt = lio.read_trajectories(path)
    if dt <= 0:
        dt = cfg.trajectory.dt
    return trajs, dt


def cmd_evaluate(args) -> int:
    cfg = build_config(args, inherit=True)
    if args.r is not None and args.r < 1:
        raise UsageError("r must be >= 1")
    model = _load_model(args, cfg)
    trajs, dt = _load_trajectories(args, cfg)
    if args.r is not None:
        trajs = trajs[: args.r]
    eps = epsilon(model, trajs, dt)
    doc = {"epsilon": eps, "r": len(trajs), "min_eigenvalue": min_predicted_eigenvalue(model, trajs, dt)}
    _write_json(_out(cfg) / "evaluation.json", doc)
    print(f"epsilon = {eps:.6e} over r = {len(trajs)} trajectories")
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = build_config(args)
    N_values, M_values = _int_list(args.N_values), _int_list(args.M_values)
    if not N_values or not M_values or min(N_values + M_values) < 1:
        raise UsageError("N and M values must be positive integers")
    res = run_sweep(N_values, M_values, cfg, workers=args.workers)
    out = _out(cfg)
    (out / "sweep.csv").write_text(res.to_csv())
    (out / "sweep.json").write_text(res.to_json() + "\n")
    for c in res.cells:
        print(f"N={c.N} M={c.M} epsilon={c.epsilon:.6e}" + (f" ({c.error})" if c.error else ""))
    return EXIT_OK


def cmd_readout(args) -> int:
    cfg = build_config(args, inherit=True)
    model = _load_model(args, cfg)
    ro = extract_readout(model.params, threshold=args.threshold)
    _write_json(_out(cfg) / "readout.json", readout_to_dict(ro))
    print(format_readout(ro))
    return EXIT_OK


def cmd_export(args) -> int:
    cfg = build_config(args, inherit=True)
    model = _load_model(args, cfg)
    # noisy points belong to training trajectories, so pair them with those
    trajs, dt = _load_trajectories(args, cfg, "exact_train.ndjson" if args.dataset else "exact_test.ndjson")
    if not 0 <= args.traj_id < len(trajs):
        raise UsageError(f"traj-id must lie in [0, {len(trajs)})")
    ds = lio.read_dataset(args.dataset) if args.dataset else None
    table = export_trajectory_comparison(model, trajs[args.traj_id], dt, ds, args.traj_id if ds else None)
    path = _out(cfg) / f"comparison_{args.traj_id}.csv"
    path.write_text(table)
    print(f"wrote {path}")
    return EXIT_OK


def make_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="lindblad-learn", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("generate", help="simulate exact trajectories and noisy measurements")
    _add_common(p)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("train", help="fit a Lindblad generator to a dataset")
    _add_common(p)
    p.add_argument("--dataset")
    p.add_argument("--checkpoint", help="checkpoint path to write (and read with --resume)")
    p.add_argument("--resume", action="store_true", help="start from an existing checkpoint")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="error of a checkpoint on exact trajectories")
    _add_common(p)
    p.add_argument("--checkpoint")
    p.add_argument("--trajectories")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("sweep", help="train and evaluate over an (N, M) grid")
    _add_common(p)
    p.add_argument("--N-values", dest="N_values", default="2,3,5,10,20,35,50,75,100")
    p.add_argument("--M-values", dest="M_values", default="2,3,5,10,20,35,50,75,100")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("readout", help="report the learned Hamiltonian and jump operators")
    _add_common(p)
    p.add_argument("--checkpoint")
    p.add_argument("--threshold", type=float, default=RATE_THRESHOLD)
    p.set_defaults(func=cmd_readout)

    p = sub.add_parser("export", help="exact vs predicted trajectory table")
    _add_common(p)
    p.add_argument("--checkpoint")
    p.add_argument("--trajectories")
    p.add_argument("--dataset", help="noisy dataset whose points are added to the table")
    p.add_argument("--traj-id", dest="traj_id", type=int, default=0)
    p.set_defaults(func=cmd_export)
    return parser


def main(argv=None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.M is not None and args.M < 1:
        print("error: M must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except (UsageError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (LindbladLearnError, OSError, np.linalg.LinAlgError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
