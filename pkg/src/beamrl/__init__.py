"""Two-cell mmWave beam/power control with offline batch-constrained RL.

Modules:
    radio       channel model, path loss, beam codebooks
    env         network state, rewards, stepping, exhaustive search
    dataset     offline transition batches and their binary container
    nn          dense networks with manual backprop and Adam
    agents      batch-constrained Q-learning, rollout policy, DQN baseline
    evaluation  fresh-episode evaluation, CCDF curves, run aggregation
    config      flat JSON experiment configuration
    cli         gen-data / train / eval / sweep commands
"""

from .agents import (
    BCQAgent,
    DQNAgent,
    TrainConfig,
    allowed_actions,
    bcmq_rollout_action,
    bcq_policy,
    bcq_train_step,
    build_bcq_agent,
    build_dqn_agent,
    dqn_train_step,
    predict_next_state,
    train_offline,
    train_online_dqn,
)
from .dataset import BehaviorPolicy, Dataset, Transition, generate, load, sample_minibatch, save
from .env import CellularEnv, NetworkConfig, NetworkState, exhaustive_optimal, reset, step
from .evaluation import EvalReport, aggregate_runs, ccdf, evaluate_policy, optimal_reference
from .radio import Codebook, PathLossParams, array_response, dft_codebook, path_loss_db, sample_channel

__version__ = "0.1.0"
