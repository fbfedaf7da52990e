"""Command line interface: gen-data, train, eval, and sweep.

Every command resolves its settings from an optional JSON config file
plus flag overrides, derives a short run id from the effective
configuration, and writes its artifacts plus a manifest under
<out_dir>/<command>/<run_id>/.  Outputs carry no timestamps or other
ambient state, so re-running a command with the same manifest inputs
reproduces every file byte for byte.

Exit codes: 0 success, 2 usage errors, 3 configuration errors,
4 data-format errors, 5 runtime errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import agents as agentsmod
from . import dataset as datasetmod
from . import evaluation as evalmod
from .config import ExperimentConfig, canonical_json, load_config, run_id
from .errors import (
    ConfigError,
    DataFormatError,
    EmptySampleError,
    EpisodeFinishedError,
    SearchBudgetError,
)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_CONFIG = 3
EXIT_FORMAT = 4
EXIT_RUNTIME = 5

SWEEP_AXES = {
    "lr": [1e-3, 1e-4, 1e-5],
    "batch_size": [20000, 10000, 1000, 100, 50],
    "quality": ["uniform", "biased"],
}


def _fmt(value) -> str:
    """Stable CSV cell formatting; floats use repr for exact round-trips."""
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_csv(path, header, rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(cell) for cell in row))
    Path(path).write_text("\n".join(lines) + "\n")


def _write_manifest(out_dir: Path, command: str, cfg: ExperimentConfig, extra: dict, outputs) -> None:
    manifest = {
        "command": command,
        "run_id": out_dir.name,
        "config": cfg.to_dict(),
        "config_hash": run_id(command, cfg, extra),
        "seed": cfg["master_seed"],
        "extra": extra,
        "outputs": sorted(str(o) for o in outputs),
    }
    (out_dir / "manifest.json").write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n")


def _run_dir(cfg: ExperimentConfig, command: str, extra: dict | None = None) -> Path:
    rid = run_id(command, cfg, extra or {})
    out = Path(cfg["out_dir"]) / command / rid
    out.mkdir(parents=True, exist_ok=True)
    return out


def _config_overrides(args) -> dict:
    overrides = {}
    for flag, key in (
        ("seed", "master_seed"),
        ("out", "out_dir"),
        ("policy", "behavior_policy"),
        ("samples", "dataset_size"),
        ("iterations", "max_iterations"),
        ("lr", "learning_rate"),
        ("episodes", "eval_episodes"),
        ("repeats", "repeats"),
        ("workers", "workers"),
    ):
        if hasattr(args, flag) and getattr(args, flag) is not None:
            overrides[key] = getattr(args, flag)
    return overrides


def cmd_gen_data(args) -> int:
    cfg = load_config(args.config, _config_overrides(args))
    network = cfg.network()
    policy = datasetmod.BehaviorPolicy(kind=cfg["behavior_policy"])
    data = datasetmod.generate(network, policy, int(cfg["dataset_size"]), int(cfg["master_seed"]))
    out_dir = _run_dir(cfg, "gen-data")
    data_path = out_dir / "dataset.bin"
    datasetmod.save(data, data_path)
    _write_manifest(out_dir, "gen-data", cfg, {"policy": policy.kind}, [data_path.name])
    print(f"wrote {len(data)} transitions ({policy.kind}) to {data_path}")
    return EXIT_OK


def _log_rows(log: agentsmod.TrainingLog):
    return [
        (it, m, s, q, g)
        for it, m, s, q, g in zip(
            log.iterations, log.mean_rewards, log.std_rewards, log.q_losses, log.g_losses
        )
    ]


def cmd_train(args) -> int:
    cfg = load_config(args.config, _config_overrides(args))
    network = cfg.network()
    train_cfg = cfg.train_config(seed=int(cfg["master_seed"]))
    extra = {"algo": args.algo, "dataset": str(args.dataset) if args.dataset else None}
    out_dir = _run_dir(cfg, "train", extra)

    if args.algo == "bcq":
        data = datasetmod.load(args.dataset)
        if data.states.shape[1] != network.obs_dim or int(data.meta.get("num_actions", -1)) != network.num_actions:
            raise DataFormatError(
                f"dataset geometry ({data.states.shape[1]} dims, {data.meta.get('num_actions')} actions) "
                f"does not match the configured network ({network.obs_dim} dims, {network.num_actions} actions)"
            )
        agent = agentsmod.build_bcq_agent(
            network.obs_dim,
            network.num_actions,
            hidden=tuple(int(h) for h in cfg["hidden_dims"]),
            learning_rate=train_cfg.learning_rate,
            threshold=float(cfg["bcq_threshold"]),
            gamma=network.discount,
            top_k=int(cfg["rollout_top_k"]),
            seed=train_cfg.seed,
        )
        log = agentsmod.train_offline(agent, data, network, train_cfg)
    else:
        agent = agentsmod.build_dqn_agent(
            network.obs_dim,
            network.num_actions,
            hidden=tuple(int(h) for h in cfg["hidden_dims"]),
            learning_rate=train_cfg.learning_rate,
            gamma=network.discount,
            seed=train_cfg.seed,
        )
        log = agentsmod.train_online_dqn(agent, network, train_cfg)

    ckpt_path = out_dir / "checkpoint.bin"
    agentsmod.save_agent(
        ckpt_path,
        agent,
        meta={
            "config_digest": datasetmod.config_digest(network),
            "train_seed": train_cfg.seed,
            "iterations": train_cfg.max_iterations,
        },
    )
    log_path = out_dir / "log.csv"
    write_csv(log_path, ("iteration", "mean_reward", "std_reward", "q_loss", "g_loss"), _log_rows(log))
    _write_manifest(out_dir, "train", cfg, extra, [ckpt_path.name, log_path.name])
    final = log.mean_rewards[-1] if log.mean_rewards else float("nan")
    print(f"trained {args.algo} for {train_cfg.max_iterations} iterations; final mean reward {final:.3f}")
    print(f"checkpoint: {ckpt_path}")
    return EXIT_OK


def _policy_for_mode(mode: str, args, cfg: ExperimentConfig, network):
    seed = int(cfg["master_seed"])
    if mode == "random":
        return evalmod.random_policy(network.num_actions, seed + 1_000_003), "random"
    agent, meta = agentsmod.load_agent(args.checkpoint)
    expected_algo = "dqn" if mode == "dqn" else "bcq"
    if meta.get("algo") != expected_algo:
        raise DataFormatError(
            f"checkpoint holds a {meta.get('algo')!r} agent but mode {mode!r} needs {expected_algo!r}"
        )
    dims = agent.q_net.layer_dims
    if dims[0] != network.obs_dim or dims[-1] != network.num_actions:
        raise DataFormatError(
            f"checkpoint architecture {dims} does not fit the configured network "
            f"({network.obs_dim} inputs, {network.num_actions} actions)"
        )
    if mode == "dqn":
        return (lambda obs: agentsmod.dqn_policy(agent, obs)), "dqn"
    if mode == "bcq":
        return (lambda obs: agentsmod.bcq_policy(agent, obs)), "bcq"
    return (lambda obs: agentsmod.bcmq_rollout_action(agent, obs, network)), "bcmq"


def cmd_eval(args) -> int:
    cfg = load_config(args.config, _config_overrides(args))
    network = cfg.network()
    n_episodes = int(cfg["eval_episodes"])
    seed = int(cfg["master_seed"])
    extra = {"mode": args.mode, "checkpoint": str(args.checkpoint) if args.checkpoint else None}
    out_dir = _run_dir(cfg, "eval", extra)

    if args.mode == "optimal":
        report = evalmod.optimal_reference(network, n_episodes, seed)
    else:
        policy, tag = _policy_for_mode(args.mode, args, cfg, network)
        report = evalmod.evaluate_policy(policy, network, n_episodes, seed, policy_tag=tag)

    returns_path = out_dir / "returns.csv"
    write_csv(returns_path, ("episode", "episode_return"), list(enumerate(report.episode_returns)))
    curve = evalmod.ccdf(report.sinr_db, grid_points=int(cfg["ccdf_grid_points"]))
    ccdf_path = out_dir / "ccdf.csv"
    write_csv(ccdf_path, ("snr_db", "ccdf"), list(zip(curve.grid_db, curve.values)))
    _write_manifest(out_dir, "eval", cfg, extra, [returns_path.name, ccdf_path.name])
    print(
        f"{report.policy_tag}: mean return {report.mean_return:.3f} over {report.n_episodes} episodes, "
        f"{report.sinr_db.size}/{report.total_sinr_samples} SINR samples in window"
    )
    return EXIT_OK


def _parse_sweep_values(axis: str, raw_values):
    if raw_values is None:
        return list(SWEEP_AXES[axis])
    out = []
    for v in raw_values:
        if axis == "lr":
            out.append(float(v))
        elif axis == "batch_size":
            out.append(int(v))
        else:
            if v not in ("uniform", "biased"):
                raise ConfigError(f"quality axis values must be uniform or biased, got {v!r}")
            out.append(v)
    return out


def _sweep_job(payload: dict) -> dict:
    """One (value, repeat) training run; top-level so process pools can pickle it."""
    cfg = ExperimentConfig(values=payload["config"])
    axis, value = payload["axis"], payload["value"]
    seed = payload["seed"]
    network = cfg.network()

    dataset_size = int(cfg["dataset_size"])
    policy_kind = cfg["behavior_policy"]
    learning_rate = None
    if axis == "lr":
        learning_rate = float(value)
    elif axis == "batch_size":
        dataset_size = int(value)
    else:
        policy_kind = str(value)

    data = datasetmod.generate(network, datasetmod.BehaviorPolicy(kind=policy_kind), dataset_size, seed)
    train_cfg = cfg.train_config(seed=seed, learning_rate=learning_rate)
    agent = agentsmod.build_bcq_agent(
        network.obs_dim,
        network.num_actions,
        hidden=tuple(int(h) for h in cfg["hidden_dims"]),
        learning_rate=train_cfg.learning_rate,
        threshold=float(cfg["bcq_threshold"]),
        gamma=network.discount,
        top_k=int(cfg["rollout_top_k"]),
        seed=seed,
    )
    log = agentsmod.train_offline(agent, data, network, train_cfg)
    final = evalmod.evaluate_policy(
        lambda obs: agentsmod.bcmq_rollout_action(agent, obs, network),
        network,
        int(cfg["eval_episodes"]),
        seed=seed + 777_001,
        policy_tag="bcmq",
    )
    return {
        "value": value,
        "repeat": payload["repeat"],
        "iterations": list(log.iterations),
        "mean_rewards": list(log.mean_rewards),
        "final_return": final.mean_return,
    }


def _value_tag(value) -> str:
    if isinstance(value, float):
        return f"{value:g}".replace("-", "m") if value < 0 else f"{value:g}"
    return str(value)


def cmd_sweep(args) -> int:
    cfg = load_config(args.config, _config_overrides(args))
    values = _parse_sweep_values(args.axis, args.values)
    repeats = int(cfg["repeats"])
    workers = int(cfg["workers"])
    master = int(cfg["master_seed"])
    extra = {"axis": args.axis, "values": [_value_tag(v) for v in values], "repeats": repeats}
    out_dir = _run_dir(cfg, "sweep", extra)

    jobs = []
    for vi, value in enumerate(values):
        for rep in range(repeats):
            jobs.append(
                {
                    "config": cfg.to_dict(),
                    "axis": args.axis,
                    "value": value,
                    "repeat": rep,
                    "seed": master ^ rep,
                }
            )
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_sweep_job, jobs))
    else:
        results = [_sweep_job(job) for job in jobs]

    outputs = []
    summary_rows = []
    for value in values:
        runs = sorted(
            (r for r in results if r["value"] == value),
            key=lambda r: r["repeat"],
        )
        grids = {tuple(r["iterations"]) for r in runs}
        if len(grids) != 1:
            raise ConfigError("sweep runs produced mismatched evaluation grids")
        iterations = runs[0]["iterations"]
        curves = np.array([r["mean_rewards"] for r in runs], dtype=np.float64)
        mean = curves.mean(axis=0)
        std = curves.std(axis=0)
        curve_path = out_dir / f"curve_{args.axis}_{_value_tag(value)}.csv"
        write_csv(
            curve_path,
            ("iteration", "mean_reward", "lo", "hi"),
            list(zip(iterations, mean, mean - std, mean + std)),
        )
        outputs.append(curve_path.name)
        finals = np.array([r["final_return"] for r in runs], dtype=np.float64)
        summary_rows.append((_value_tag(value), float(finals.mean()), float(finals.std())))
        print(f"{args.axis}={_value_tag(value)}: final return {finals.mean():.3f} +/- {finals.std():.3f}")

    summary_path = out_dir / "summary.csv"
    write_csv(summary_path, ("value", "final_mean", "final_std"), summary_rows)
    outputs.append(summary_path.name)
    _write_manifest(out_dir, "sweep", cfg, extra, outputs)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="beamrl",
        description="Two-cell beam/power control: offline batch-constrained Q-learning tooling.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", type=Path, default=None, help="JSON config file")
        p.add_argument("--seed", type=int, default=None, help="master seed override")
        p.add_argument("--out", type=str, default=None, help="output root directory")

    p_gen = sub.add_parser("gen-data", help="generate an offline transition dataset")
    add_common(p_gen)
    p_gen.add_argument("--policy", choices=("uniform", "biased"), default=None, help="behaviour policy")
    p_gen.add_argument("--samples", type=int, default=None, help="number of transitions")
    p_gen.set_defaults(func=cmd_gen_data)

    p_train = sub.add_parser("train", help="train an agent and write a checkpoint")
    add_common(p_train)
    p_train.add_argument("--algo", choices=("bcq", "dqn"), required=True)
    p_train.add_argument("--dataset", type=Path, default=None, help="dataset file (bcq only)")
    p_train.add_argument("--iterations", type=int, default=None, help="training iteration override")
    p_train.add_argument("--lr", type=float, default=None, help="learning rate override")
    p_train.set_defaults(func=cmd_train)

    p_eval = sub.add_parser("eval", help="evaluate a policy and write CCDF statistics")
    add_common(p_eval)
    p_eval.add_argument("--mode", choices=("bcq", "bcmq", "dqn", "optimal", "random"), required=True)
    p_eval.add_argument("--checkpoint", type=Path, default=None, help="agent checkpoint")
    p_eval.add_argument("--episodes", type=int, default=None, help="evaluation episode override")
    p_eval.set_defaults(func=cmd_eval)

    p_sweep = sub.add_parser("sweep", help="repeated training runs along one axis")
    add_common(p_sweep)
    p_sweep.add_argument("--axis", choices=tuple(SWEEP_AXES), required=True)
    p_sweep.add_argument("--values", nargs="+", default=None, help="axis values (defaults per axis)")
    p_sweep.add_argument("--repeats", type=int, default=None, help="repeats per value")
    p_sweep.add_argument("--workers", type=int, default=None, help="parallel worker processes")
    p_sweep.set_defaults(func=cmd_sweep)
    return parser


def _validate_usage(args, parser) -> None:
    if args.command == "train":
        if args.algo == "bcq" and args.dataset is None:
            parser.error("--algo bcq requires --dataset")
        if args.algo == "dqn" and args.dataset is not None:
            parser.error("--algo dqn is trained online and forbids --dataset")
    if args.command == "eval":
        if args.mode in ("bcq", "bcmq", "dqn") and args.checkpoint is None:
            parser.error(f"--mode {args.mode} requires --checkpoint")
        if args.mode in ("optimal", "random") and args.checkpoint is not None:
            parser.error(f"--mode {args.mode} does not take a checkpoint")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    _validate_usage(args, parser)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataFormatError as exc:
        print(f"format error: {exc}", file=sys.stderr)
        return EXIT_FORMAT
    except FileNotFoundError as exc:
        print(f"config error: missing file: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (EpisodeFinishedError, SearchBudgetError, EmptySampleError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
