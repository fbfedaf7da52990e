"""Experiment configuration: flat JSON schema, validation, stable hashing.

A config file is a single flat JSON object; every key below is optional
and overrides the default.  The same keys are exposed as CLI flags where
it makes sense.  Hashes are computed over the canonical (sorted, compact)
JSON encoding so equal configs map to equal run ids.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from .agents import TrainConfig
from .env import NetworkConfig, default_power_levels
from .errors import ConfigError
from .radio import PathLossParams

# key -> (default, docstring); None defaults are filled in code.
SCHEMA = {
    "bs_positions": ([[0.0, 0.0], [0.0, 255.0]], "base station coordinates, metres"),
    "cell_radius": (150.0, "UE drop radius around the serving BS, metres"),
    "ues_per_bs": (1, "users served per base station"),
    "num_antennas": (4, "ULA elements per base station"),
    "codebook_size": (4, "DFT codebook entries"),
    "power_levels": (None, "transmit powers in Watts, ascending; default 8 log-spaced 1 mW..2 W"),
    "episode_length": (20, "slots per episode"),
    "temperature_k": (290.0, "noise temperature, Kelvin"),
    "bandwidth_hz": (15000.0, "subcarrier bandwidth, Hz"),
    "boltzmann": (1.38e-23, "Boltzmann constant used for noise power"),
    "sinr_clip": ([-50.0, 200.0], "reward clip range for the summed linear SINR"),
    "discount": (0.3, "RL discount factor"),
    "carrier_freq_hz": (28e9, "carrier frequency, Hz"),
    "ref_distance_m": (1.0, "close-in reference distance, metres"),
    "path_loss_exponent": (3.0, "path-loss exponent beyond the reference distance"),
    "num_paths": (3, "multipath components per link"),
    "search_budget": (1_000_000, "max joint configurations for exhaustive search"),
    "bcq_threshold": (0.3, "eligibility ratio threshold tau"),
    "rollout_top_k": (2, "candidates scored by the one-step rollout"),
    "hidden_dims": ([64, 64], "hidden layer widths for Q and G networks"),
    "learning_rate": (1e-4, "Adam learning rate"),
    "tau_s": (0.995, "soft target blend factor (1 keeps the target frozen)"),
    "minibatch_size": (32, "transitions per gradient step"),
    "max_iterations": (150_000, "gradient steps (offline) / env steps (online)"),
    "eval_every": (25_000, "iterations between training-time evaluations"),
    "train_eval_episodes": (30, "episodes per training-time evaluation"),
    "replay_capacity": (20000, "online DQN replay buffer size"),
    "epsilon_start": (1.0, "initial exploration rate for online DQN"),
    "epsilon_final": (0.05, "final exploration rate for online DQN"),
    "dataset_size": (20000, "transitions per generated dataset"),
    "behavior_policy": ("uniform", "dataset collection policy: uniform or biased"),
    "eval_episodes": (1000, "episodes for standalone/final evaluation"),
    "ccdf_grid_points": (131, "grid resolution over the SINR reporting window"),
    "repeats": (10, "repeated runs per sweep value"),
    "workers": (1, "parallel worker processes for sweeps"),
    "master_seed": (1, "root seed; run i uses master_seed XOR i"),
    "out_dir": ("runs", "root directory for artifacts"),
}


@dataclass
class ExperimentConfig:
    values: dict = field(default_factory=dict)

    def __post_init__(self):
        merged = {k: v for k, (v, _) in SCHEMA.items()}
        for key, value in self.values.items():
            if key not in SCHEMA:
                raise ConfigError(f"unknown config key {key!r}")
            merged[key] = value
        if merged["power_levels"] is None:
            merged["power_levels"] = [float(p) for p in default_power_levels()]
        self.values = merged
        # Fail fast on anything the sub-configs would reject.
        self.network()
        self.train_config()
        if merged["behavior_policy"] not in ("uniform", "biased"):
            raise ConfigError(f"behavior_policy must be uniform or biased, got {merged['behavior_policy']!r}")
        if int(merged["repeats"]) < 1:
            raise ConfigError("repeats must be at least 1")
        if int(merged["workers"]) < 1:
            raise ConfigError("workers must be at least 1")
        if int(merged["eval_episodes"]) < 1:
            raise ConfigError("eval_episodes must be at least 1")
        if not 0.0 <= float(merged["bcq_threshold"]) <= 1.0:
            raise ConfigError("bcq_threshold must lie in [0, 1]")
        if int(merged["rollout_top_k"]) < 1:
            raise ConfigError("rollout_top_k must be at least 1")

    def __getitem__(self, key: str):
        return self.values[key]

    def network(self) -> NetworkConfig:
        v = self.values
        return NetworkConfig(
            bs_positions=tuple(tuple(float(c) for c in p) for p in v["bs_positions"]),
            cell_radius=float(v["cell_radius"]),
            ues_per_bs=int(v["ues_per_bs"]),
            num_antennas=int(v["num_antennas"]),
            codebook_size=int(v["codebook_size"]),
            power_levels=tuple(float(p) for p in v["power_levels"]),
            episode_length=int(v["episode_length"]),
            temperature_k=float(v["temperature_k"]),
            bandwidth_hz=float(v["bandwidth_hz"]),
            boltzmann=float(v["boltzmann"]),
            sinr_clip=(float(v["sinr_clip"][0]), float(v["sinr_clip"][1])),
            discount=float(v["discount"]),
            channel=PathLossParams(
                carrier_freq_hz=float(v["carrier_freq_hz"]),
                ref_distance_m=float(v["ref_distance_m"]),
                exponent=float(v["path_loss_exponent"]),
                num_paths=int(v["num_paths"]),
            ),
            search_budget=int(v["search_budget"]),
        )

    def train_config(self, seed: int | None = None, learning_rate: float | None = None) -> TrainConfig:
        v = self.values
        cfg = TrainConfig(
            max_iterations=int(v["max_iterations"]),
            minibatch_size=int(v["minibatch_size"]),
            learning_rate=float(learning_rate if learning_rate is not None else v["learning_rate"]),
            tau_s=float(v["tau_s"]),
            eval_every=int(v["eval_every"]),
            eval_episodes=int(v["train_eval_episodes"]),
            seed=int(seed if seed is not None else v["master_seed"]),
            replay_capacity=int(v["replay_capacity"]),
            epsilon_start=float(v["epsilon_start"]),
            epsilon_final=float(v["epsilon_final"]),
        )
        cfg.validate()
        return cfg

    def to_dict(self) -> dict:
        return dict(sorted(self.values.items()))


def load_config(path=None, overrides: dict | None = None) -> ExperimentConfig:
    """Build a config from an optional JSON file plus flag overrides."""
    values = {}
    if path is not None:
        text = Path(path).read_text()
        try:
            loaded = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: not valid JSON ({exc})") from exc
        if not isinstance(loaded, dict):
            raise ConfigError(f"{path}: config root must be a JSON object")
        values.update(loaded)
    for key, value in (overrides or {}).items():
        if value is not None:
            values[key] = value
    return ExperimentConfig(values=values)


def canonical_json(payload) -> str:
    return json.dumps(payload, sort_keys=True, separators=(",", ":"))


def run_id(command: str, config: ExperimentConfig, extra: dict | None = None) -> str:
    """Short stable hash identifying a command + configuration."""
    payload = {"command": command, "config": config.to_dict(), "extra": extra or {}}
    return hashlib.sha256(canonical_json(payload).encode("utf-8")).hexdigest()[:10]
