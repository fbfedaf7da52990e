"""Offline transition datasets: generation, storage, and sampling.

A dataset is a fixed-size batch of (state, action, reward, next_state,
done) records gathered by running a simple behaviour policy in the
environment.  Per-episode reset seeds and per-step channel seeds are
recorded alongside each transition so any stored reward can be
reproduced exactly by re-simulating through the environment.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import env as envmod
from .container import read_container, write_container
from .errors import ConfigError, DataFormatError, EmptySampleError

DATASET_KIND = "transition-dataset"
_SEED_SPACE = 2 ** 32


@dataclass(frozen=True)
class Transition:
    state_vec: np.ndarray  # float32
    action: int
    reward: float
    next_state_vec: np.ndarray  # float32
    done: bool


@dataclass(frozen=True)
class BehaviorPolicy:
    """Uniform exploration, optionally restricted to a biased subset.

    kind 'uniform' draws from all action ids; kind 'biased' draws only
    from the first ceil(|A| / 4) ids.
    """

    kind: str = "uniform"

    def __post_init__(self):
        if self.kind not in ("uniform", "biased"):
            raise ConfigError(f"unknown behaviour policy kind {self.kind!r}")

    def support(self, num_actions: int) -> np.ndarray:
        if self.kind == "biased":
            return np.arange(math.ceil(num_actions / 4))
        return np.arange(num_actions)

    def sample(self, rng: np.random.Generator, num_actions: int) -> int:
        support = self.support(num_actions)
        return int(support[rng.integers(len(support))])


@dataclass
class Dataset:
    """Column-oriented transition store plus generation metadata."""

    states: np.ndarray  # (n, obs_dim) float32
    actions: np.ndarray  # (n,) int64
    rewards: np.ndarray  # (n,) float32
    next_states: np.ndarray  # (n, obs_dim) float32
    dones: np.ndarray  # (n,) bool
    reset_seeds: np.ndarray  # (n,) uint32, shared within an episode
    channel_seeds: np.ndarray  # (n,) uint32, one per step
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return self.states.shape[0]

    def transition(self, i: int) -> Transition:
        return Transition(
            state_vec=self.states[i],
            action=int(self.actions[i]),
            reward=float(self.rewards[i]),
            next_state_vec=self.next_states[i],
            done=bool(self.dones[i]),
        )

    def __iter__(self):
        return (self.transition(i) for i in range(len(self)))


@dataclass
class Minibatch:
    """A with-replacement sample of transitions, kept column-oriented."""

    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_states: np.ndarray
    dones: np.ndarray

    def __len__(self) -> int:
        return self.states.shape[0]

    def __iter__(self):
        for i in range(len(self)):
            yield Transition(
                state_vec=self.states[i],
                action=int(self.actions[i]),
                reward=float(self.rewards[i]),
                next_state_vec=self.next_states[i],
                done=bool(self.dones[i]),
            )


def config_digest(config: envmod.NetworkConfig) -> str:
    """Stable short hash of the environment configuration."""
    payload = {
        "bs_positions": [list(p) for p in config.bs_positions],
        "cell_radius": config.cell_radius,
        "ues_per_bs": config.ues_per_bs,
        "num_antennas": config.num_antennas,
        "codebook_size": config.codebook_size,
        "power_levels": list(config.power_levels),
        "episode_length": config.episode_length,
        "temperature_k": config.temperature_k,
        "bandwidth_hz": config.bandwidth_hz,
        "boltzmann": config.boltzmann,
        "sinr_clip": list(config.sinr_clip),
        "discount": config.discount,
        "carrier_freq_hz": config.channel.carrier_freq_hz,
        "ref_distance_m": config.channel.ref_distance_m,
        "exponent": config.channel.exponent,
        "num_paths": config.channel.num_paths,
    }
    text = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]


def generate(
    config: envmod.NetworkConfig,
    policy: BehaviorPolicy,
    n_samples: int,
    seed: int,
) -> Dataset:
    """Collect exactly n_samples transitions under the behaviour policy.

    Episodes run back to back, each from a fresh reset; collection stops
    mid-episode once the quota is reached.  All randomness (positions,
    fading, action draws) derives from the single master seed, and the
    fading seeds are recorded per step so rewards can be replayed.
    """
    if n_samples < 1:
        raise ConfigError("n_samples must be at least 1")
    obs_dim = config.obs_dim
    num_actions = config.num_actions

    states = np.empty((n_samples, obs_dim), dtype=np.float32)
    actions = np.empty(n_samples, dtype=np.int64)
    rewards = np.empty(n_samples, dtype=np.float32)
    next_states = np.empty((n_samples, obs_dim), dtype=np.float32)
    dones = np.empty(n_samples, dtype=bool)
    reset_seeds = np.empty(n_samples, dtype=np.uint32)
    channel_seeds = np.empty(n_samples, dtype=np.uint32)

    master = np.random.default_rng(seed)
    collected = 0
    while collected < n_samples:
        reset_seed = int(master.integers(_SEED_SPACE))
        state = envmod.reset(config, np.random.default_rng(reset_seed))
        obs = envmod.observation(state, config)
        for _ in range(config.episode_length):
            action = policy.sample(master, num_actions)
            channel_seed = int(master.integers(_SEED_SPACE))
            outcome = envmod.step(state, action, config, np.random.default_rng(channel_seed))
            next_obs = envmod.observation(outcome.next_state, config)

            states[collected] = obs
            actions[collected] = action
            rewards[collected] = np.float32(outcome.reward)
            next_states[collected] = next_obs
            dones[collected] = outcome.done
            reset_seeds[collected] = reset_seed
            channel_seeds[collected] = channel_seed
            collected += 1

            state = outcome.next_state
            obs = next_obs
            if collected == n_samples:
                break

    meta = {
        "kind": DATASET_KIND,
        "n_samples": n_samples,
        "obs_dim": obs_dim,
        "num_actions": num_actions,
        "episode_length": config.episode_length,
        "policy": policy.kind,
        "seed": seed,
        "config_digest": config_digest(config),
    }
    return Dataset(states, actions, rewards, next_states, dones, reset_seeds, channel_seeds, meta)


def save(dataset: Dataset, path) -> None:
    """Persist to the binary container format (float32 records)."""
    n = len(dataset)
    obs_dim = dataset.states.shape[1]
    # One fused float32 record per transition keeps the payload compact;
    # seeds ride as separate integer columns.
    records = np.empty((n, 2 * obs_dim + 3), dtype=np.float32)
    records[:, :obs_dim] = dataset.states
    records[:, obs_dim] = dataset.actions.astype(np.float32)
    records[:, obs_dim + 1] = dataset.rewards
    records[:, obs_dim + 2: 2 * obs_dim + 2] = dataset.next_states
    records[:, 2 * obs_dim + 2] = dataset.dones.astype(np.float32)
    meta = dict(dataset.meta)
    meta["kind"] = DATASET_KIND
    meta["n_samples"] = n
    meta["obs_dim"] = obs_dim
    write_container(
        path,
        {
            "records": records,
            "reset_seeds": dataset.reset_seeds,
            "channel_seeds": dataset.channel_seeds,
        },
        meta=meta,
    )


def load(path) -> Dataset:
    """Read a dataset container; malformed files raise format errors."""
    arrays, meta = read_container(path)
    if meta.get("kind") != DATASET_KIND:
        raise DataFormatError(f"{path}: not a transition dataset (kind={meta.get('kind')!r})")
    for name in ("records", "reset_seeds", "channel_seeds"):
        if name not in arrays:
            raise DataFormatError(f"{path}: missing array '{name}'")
    records = arrays["records"]
    obs_dim = int(meta.get("obs_dim", -1))
    n = int(meta.get("n_samples", -1))
    if records.ndim != 2 or records.shape != (n, 2 * obs_dim + 3):
        raise DataFormatError(
            f"{path}: record block shape {records.shape} does not match header "
            f"(n={n}, obs_dim={obs_dim})"
        )
    if arrays["reset_seeds"].shape != (n,) or arrays["channel_seeds"].shape != (n,):
        raise DataFormatError(f"{path}: seed column length does not match n={n}")
    actions_f = records[:, obs_dim]
    dones_f = records[:, 2 * obs_dim + 2]
    if not np.all(actions_f == np.rint(actions_f)):
        raise DataFormatError(f"{path}: non-integer action column")
    return Dataset(
        states=records[:, :obs_dim].copy(),
        actions=actions_f.astype(np.int64),
        rewards=records[:, obs_dim + 1].copy(),
        next_states=records[:, obs_dim + 2: 2 * obs_dim + 2].copy(),
        dones=dones_f != 0.0,
        reset_seeds=arrays["reset_seeds"],
        channel_seeds=arrays["channel_seeds"],
        meta=meta,
    )


def sample_minibatch(dataset: Dataset, batch_size: int, rng: np.random.Generator) -> Minibatch:
    """Uniform sample with replacement; duplicates are expected."""
    if len(dataset) == 0:
        raise EmptySampleError("cannot sample from an empty dataset")
    if batch_size < 1:
        raise ConfigError("batch_size must be at least 1")
    idx = rng.integers(0, len(dataset), size=batch_size)
    return Minibatch(
        states=dataset.states[idx],
        actions=dataset.actions[idx],
        rewards=dataset.rewards[idx],
        next_states=dataset.next_states[idx],
        dones=dataset.dones[idx],
    )


def replay_reward(dataset: Dataset, index: int, config: envmod.NetworkConfig) -> float:
    """Recompute the stored reward of one transition from recorded seeds.

    The transition's episode is re-simulated from its reset seed, feeding
    the recorded actions and per-step channel seeds back through the
    environment.  Returns the float32-cast reward at the target step.
    """
    if not 0 <= index < len(dataset):
        raise ConfigError(f"index {index} out of range")
    t_len = config.episode_length
    start = index - (index % t_len)
    state = envmod.reset(config, np.random.default_rng(int(dataset.reset_seeds[index])))
    for j in range(start, index + 1):
        outcome = envmod.step(
            state,
            int(dataset.actions[j]),
            config,
            np.random.default_rng(int(dataset.channel_seeds[j])),
        )
        state = outcome.next_state
    return float(np.float32(outcome.reward))
