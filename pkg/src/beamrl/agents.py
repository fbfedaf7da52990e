"""Discrete batch-constrained Q-learning with a one-step rollout policy,
plus an online DQN baseline trained on the same environment.

The batch-constrained agent keeps two heads: a Q network (with a slowly
tracking target copy) and a generative network G that models the
behaviour policy's action distribution.  At decision time only actions
whose G-probability is within a threshold ratio of the most likely
action are eligible; deployment optionally looks one deterministic
index-transition ahead over the top-k eligible actions.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from . import env as envmod
from .dataset import Dataset, Minibatch, sample_minibatch
from .errors import ConfigError, EmptySampleError
from .nn import (
    DenseNet,
    AdamState,
    adam_step,
    backward,
    forward,
    forward_one,
    init_adam,
    init_dense,
    mse_loss,
    nll_loss,
    soft_update,
)


@dataclass
class TrainConfig:
    max_iterations: int = 150_000
    minibatch_size: int = 32
    learning_rate: float = 1e-4
    tau_s: float = 0.995  # soft target blend, 1 = frozen target
    eval_every: int = 25_000
    eval_episodes: int = 30
    seed: int = 0
    replay_capacity: int = 20000  # online DQN only
    epsilon_start: float = 1.0
    epsilon_final: float = 0.05

    def validate(self):
        if self.max_iterations < 1:
            raise ConfigError("max_iterations must be at least 1")
        if self.minibatch_size < 1:
            raise ConfigError("minibatch_size must be at least 1")
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be positive")
        if not 0.0 <= self.tau_s <= 1.0:
            raise ConfigError("tau_s must lie in [0, 1]")
        if self.eval_every < 1 or self.eval_episodes < 0:
            raise ConfigError("eval settings must be positive")
        if self.replay_capacity < self.minibatch_size:
            raise ConfigError("replay_capacity must hold at least one minibatch")


@dataclass
class TrainingLog:
    """Periodic evaluation rows collected during training."""

    iterations: list = field(default_factory=list)
    mean_rewards: list = field(default_factory=list)
    std_rewards: list = field(default_factory=list)
    q_losses: list = field(default_factory=list)
    g_losses: list = field(default_factory=list)
    train_env_steps: int = 0
    # Return of every completed training episode, in order. Empty for offline
    # training, where the agent never interacts with the environment.
    episode_returns: list = field(default_factory=list)

    def rows(self):
        return list(zip(self.iterations, self.mean_rewards, self.std_rewards, self.q_losses, self.g_losses))


@dataclass
class BCQAgent:
    q_net: DenseNet
    q_target: DenseNet
    g_net: DenseNet
    q_adam: AdamState
    g_adam: AdamState
    threshold: float = 0.3
    gamma: float = 0.3
    top_k: int = 2


def build_bcq_agent(
    obs_dim: int,
    num_actions: int,
    hidden=(64, 64),
    learning_rate: float = 1e-4,
    threshold: float = 0.3,
    gamma: float = 0.3,
    top_k: int = 2,
    seed: int = 0,
) -> BCQAgent:
    if not 0.0 <= threshold <= 1.0:
        raise ConfigError("threshold must lie in [0, 1]")
    if not 0.0 <= gamma < 1.0:
        raise ConfigError("gamma must lie in [0, 1)")
    if top_k < 1:
        raise ConfigError("top_k must be at least 1")
    dims = [obs_dim, *hidden, num_actions]
    q_net = init_dense(dims, seed=seed)
    g_net = init_dense(dims, seed=seed + 1, log_softmax_head=True)
    return BCQAgent(
        q_net=q_net,
        q_target=q_net.copy(),
        g_net=g_net,
        q_adam=init_adam(q_net, learning_rate),
        g_adam=init_adam(g_net, learning_rate),
        threshold=threshold,
        gamma=gamma,
        top_k=top_k,
    )


@dataclass
class DQNAgent:
    q_net: DenseNet
    q_target: DenseNet
    q_adam: AdamState
    gamma: float = 0.3


def build_dqn_agent(
    obs_dim: int,
    num_actions: int,
    hidden=(64, 64),
    learning_rate: float = 1e-4,
    gamma: float = 0.3,
    seed: int = 0,
) -> DQNAgent:
    if not 0.0 <= gamma < 1.0:
        raise ConfigError("gamma must lie in [0, 1)")
    q_net = init_dense([obs_dim, *hidden, num_actions], seed=seed)
    return DQNAgent(
        q_net=q_net,
        q_target=q_net.copy(),
        q_adam=init_adam(q_net, learning_rate),
        gamma=gamma,
    )


def allowed_mask(g_net: DenseNet, states: np.ndarray, threshold: float) -> np.ndarray:
    """Row-wise eligibility mask: G(a|s) / max_a G(a|s) >= threshold.

    The comparison is >=, so the most likely action always qualifies and
    threshold 0 admits every action.
    """
    log_probs, _ = forward(g_net, states)
    ratio = np.exp(log_probs - log_probs.max(axis=1, keepdims=True))
    return ratio >= threshold


def allowed_actions(g_net: DenseNet, state_vec: np.ndarray, threshold: float) -> np.ndarray:
    """Eligible action ids for one state, ascending."""
    mask = allowed_mask(g_net, np.asarray(state_vec, dtype=np.float64)[None, :], threshold)
    return np.flatnonzero(mask[0])


def bcq_policy(agent: BCQAgent, state_vec: np.ndarray) -> int:
    """Greedy Q over the eligible set; ties go to the smallest id."""
    ids = allowed_actions(agent.g_net, state_vec, agent.threshold)
    q = forward_one(agent.q_net, state_vec)
    return int(ids[np.argmax(q[ids])])


def bellman_targets(
    q_target: DenseNet,
    batch: Minibatch,
    gamma: float,
    mask: np.ndarray | None = None,
) -> np.ndarray:
    """One-step targets r + gamma * max_a' Q_target(s', a').

    With a mask, the max runs over eligible actions only.  Terminal
    transitions bootstrap nothing.  The masked computation degenerates
    bit-for-bit to the unmasked one when the mask admits everything.
    """
    q_next, _ = forward(q_target, batch.next_states)
    if mask is not None:
        q_next = np.where(mask, q_next, -np.inf)
    best = q_next.max(axis=1)
    return batch.rewards + gamma * np.where(batch.dones, 0.0, best)


def _q_update(q_net: DenseNet, q_adam: AdamState, batch: Minibatch, targets: np.ndarray) -> float:
    q_all, cache = forward(q_net, batch.states)
    rows = np.arange(len(batch))
    picked = q_all[rows, batch.actions]
    loss, dpicked = mse_loss(picked, targets)
    dout = np.zeros_like(q_all)
    dout[rows, batch.actions] = dpicked
    adam_step(q_net, backward(q_net, cache, dout), q_adam)
    return loss


def bcq_train_step(agent: BCQAgent, batch: Minibatch, tau_s: float):
    """One offline update: masked Bellman fit, likelihood fit, target blend.

    Returns (q_loss, g_loss).
    """
    mask = allowed_mask(agent.g_net, batch.next_states, agent.threshold)
    targets = bellman_targets(agent.q_target, batch, agent.gamma, mask=mask)
    q_loss = _q_update(agent.q_net, agent.q_adam, batch, targets)

    log_probs, g_cache = forward(agent.g_net, batch.states)
    g_loss, dlogits = nll_loss(log_probs, batch.actions)
    adam_step(agent.g_net, backward(agent.g_net, g_cache, dlogits), agent.g_adam)

    soft_update(agent.q_target, agent.q_net, tau_s)
    return q_loss, g_loss


def dqn_train_step(agent: DQNAgent, batch: Minibatch, tau_s: float) -> float:
    """One DQN update with an unconstrained max target."""
    targets = bellman_targets(agent.q_target, batch, agent.gamma, mask=None)
    q_loss = _q_update(agent.q_net, agent.q_adam, batch, targets)
    soft_update(agent.q_target, agent.q_net, tau_s)
    return q_loss


def dqn_policy(agent: DQNAgent, state_vec: np.ndarray) -> int:
    q = forward_one(agent.q_net, state_vec)
    return int(np.argmax(q))


def predict_next_state(state_vec: np.ndarray, action: int, config: envmod.NetworkConfig) -> np.ndarray:
    """Deterministic one-step model over the controllable indices.

    Applies the action's clamped power/beam deltas to the index part of
    the observation and leaves the geometric part untouched.  No channel
    redraw is involved.
    """
    n = config.num_ue
    deltas = envmod.decode_action(action, n)
    p, b = envmod.indices_from_observation(state_vec, config)
    p = np.clip(p + deltas[:, 0], 0, config.num_power_levels - 1)
    b = np.clip(b + deltas[:, 1], 0, config.codebook_size - 1)
    out = np.array(state_vec, dtype=np.float32, copy=True)
    out[:n] = p / max(config.num_power_levels - 1, 1)
    out[n:2 * n] = b / max(config.codebook_size - 1, 1)
    return out


def bcmq_rollout_action(agent: BCQAgent, state_vec: np.ndarray, config: envmod.NetworkConfig) -> int:
    """Deployment policy: score the top-k eligible actions one step ahead.

    Each candidate is scored by the best eligible Q value at its
    predicted next state.  Ties prefer the higher immediate Q(s, a) and
    then the smaller action id.  With top_k = 1 this reduces exactly to
    bcq_policy.
    """
    ids = allowed_actions(agent.g_net, state_vec, agent.threshold)
    q_now = forward_one(agent.q_net, state_vec)
    # Stable sort on (-Q, id): best-Q first, smaller id on ties.
    order = sorted(ids.tolist(), key=lambda a: (-q_now[a], a))
    candidates = order[: agent.top_k]

    best_action = None
    best_key = None
    for a in candidates:
        predicted = predict_next_state(state_vec, a, config)
        next_ids = allowed_actions(agent.g_net, predicted, agent.threshold)
        q_next = forward_one(agent.q_net, predicted)
        score = float(q_next[next_ids].max())
        key = (score, float(q_now[a]), -a)
        if best_key is None or key > best_key:
            best_key = key
            best_action = a
    return int(best_action)


def train_offline(
    agent: BCQAgent,
    data: Dataset,
    env_config: envmod.NetworkConfig,
    train_config: TrainConfig,
) -> TrainingLog:
    """Fit the agent to a fixed dataset; no environment steps for training.

    Every eval_every iterations (and at the final iteration) the frozen
    deployment policy is scored on fresh evaluation episodes.
    """
    from .evaluation import evaluate_policy  # local import avoids a cycle

    train_config.validate()
    if len(data) == 0:
        raise EmptySampleError("cannot train on an empty dataset")
    rng = np.random.default_rng(train_config.seed)
    log = TrainingLog()
    q_loss = g_loss = float("nan")
    for it in range(1, train_config.max_iterations + 1):
        batch = sample_minibatch(data, train_config.minibatch_size, rng)
        q_loss, g_loss = bcq_train_step(agent, batch, train_config.tau_s)
        if it % train_config.eval_every == 0 or it == train_config.max_iterations:
            if train_config.eval_episodes > 0:
                report = evaluate_policy(
                    lambda obs: bcmq_rollout_action(agent, obs, env_config),
                    env_config,
                    train_config.eval_episodes,
                    seed=_eval_seed(train_config.seed, it),
                    policy_tag="bcmq",
                )
                mean_r, std_r = report.mean_return, report.std_return
            else:
                mean_r = std_r = float("nan")
            log.iterations.append(it)
            log.mean_rewards.append(mean_r)
            log.std_rewards.append(std_r)
            log.q_losses.append(q_loss)
            log.g_losses.append(g_loss)
    return log


def train_online_dqn(
    agent: DQNAgent,
    env_config: envmod.NetworkConfig,
    train_config: TrainConfig,
) -> TrainingLog:
    """Online epsilon-greedy DQN with a bounded replay buffer.

    One iteration = one environment step plus (once the buffer holds a
    minibatch) one gradient update.  Epsilon decays linearly from
    epsilon_start to epsilon_final over the first half of the iteration
    budget and stays flat afterwards.

    The return of every completed training episode lands in
    log.episode_returns, so the learning curve of the behaving policy
    (exploration included) can be reconstructed after the fact.
    """
    from .evaluation import evaluate_policy

    train_config.validate()
    env = envmod.CellularEnv(env_config, seed=train_config.seed)
    rng = np.random.default_rng(train_config.seed + 1)
    replay = deque(maxlen=train_config.replay_capacity)
    log = TrainingLog()
    q_loss = float("nan")
    decay_span = max(train_config.max_iterations // 2, 1)
    obs = env.reset()
    episode_return = 0.0
    for it in range(1, train_config.max_iterations + 1):
        frac = min((it - 1) / decay_span, 1.0)
        epsilon = train_config.epsilon_start + frac * (train_config.epsilon_final - train_config.epsilon_start)
        if rng.random() < epsilon:
            action = int(rng.integers(env_config.num_actions))
        else:
            action = dqn_policy(agent, obs)
        next_obs, r, done, _ = env.step(action)
        replay.append((obs, action, np.float32(r), next_obs, done))
        episode_return += r
        if done:
            log.episode_returns.append(episode_return)
            episode_return = 0.0
            obs = env.reset()
        else:
            obs = next_obs

        if len(replay) >= train_config.minibatch_size:
            idx = rng.integers(0, len(replay), size=train_config.minibatch_size)
            rows = [replay[i] for i in idx]
            batch = Minibatch(
                states=np.stack([row[0] for row in rows]),
                actions=np.array([row[1] for row in rows], dtype=np.int64),
                rewards=np.array([row[2] for row in rows], dtype=np.float64),
                next_states=np.stack([row[3] for row in rows]),
                dones=np.array([row[4] for row in rows], dtype=bool),
            )
            q_loss = dqn_train_step(agent, batch, train_config.tau_s)

        if it % train_config.eval_every == 0 or it == train_config.max_iterations:
            if train_config.eval_episodes > 0:
                report = evaluate_policy(
                    lambda o: dqn_policy(agent, o),
                    env_config,
                    train_config.eval_episodes,
                    seed=_eval_seed(train_config.seed, it),
                    policy_tag="dqn",
                )
                mean_r, std_r = report.mean_return, report.std_return
            else:
                mean_r = std_r = float("nan")
            log.iterations.append(it)
            log.mean_rewards.append(mean_r)
            log.std_rewards.append(std_r)
            log.q_losses.append(q_loss)
            log.g_losses.append(float("nan"))
    log.train_env_steps = env.steps_taken
    return log


def _eval_seed(train_seed: int, iteration: int) -> int:
    # Distinct, reproducible evaluation stream per checkpoint.
    return (train_seed * 1_000_003 + iteration) % (2 ** 31)


def save_agent(path, agent, meta: dict | None = None) -> None:
    """Write a BCQ or DQN agent checkpoint (networks + hyperparameters)."""
    from .nn import save_checkpoint

    extra = dict(meta or {})
    if isinstance(agent, BCQAgent):
        extra.update(
            algo="bcq",
            threshold=agent.threshold,
            gamma=agent.gamma,
            top_k=agent.top_k,
            learning_rate=agent.q_adam.lr,
        )
        nets = {"q_net": agent.q_net, "q_target": agent.q_target, "g_net": agent.g_net}
    elif isinstance(agent, DQNAgent):
        extra.update(algo="dqn", gamma=agent.gamma, learning_rate=agent.q_adam.lr)
        nets = {"q_net": agent.q_net, "q_target": agent.q_target}
    else:
        raise ConfigError(f"cannot checkpoint object of type {type(agent).__name__}")
    save_checkpoint(path, nets, meta=extra)


def load_agent(path):
    """Read a checkpoint back into a fresh agent (optimiser state reset)."""
    from .errors import DataFormatError
    from .nn import load_checkpoint

    nets, meta = load_checkpoint(path)
    algo = meta.get("algo")
    lr = float(meta.get("learning_rate", 1e-4))
    if algo == "bcq":
        for name in ("q_net", "q_target", "g_net"):
            if name not in nets:
                raise DataFormatError(f"{path}: checkpoint is missing network '{name}'")
        agent = BCQAgent(
            q_net=nets["q_net"],
            q_target=nets["q_target"],
            g_net=nets["g_net"],
            q_adam=init_adam(nets["q_net"], lr),
            g_adam=init_adam(nets["g_net"], lr),
            threshold=float(meta.get("threshold", 0.3)),
            gamma=float(meta.get("gamma", 0.3)),
            top_k=int(meta.get("top_k", 2)),
        )
    elif algo == "dqn":
        for name in ("q_net", "q_target"):
            if name not in nets:
                raise DataFormatError(f"{path}: checkpoint is missing network '{name}'")
        agent = DQNAgent(
            q_net=nets["q_net"],
            q_target=nets["q_target"],
            q_adam=init_adam(nets["q_net"], lr),
            gamma=float(meta.get("gamma", 0.3)),
        )
    else:
        raise DataFormatError(f"{path}: unknown agent kind {algo!r}")
    return agent, meta
