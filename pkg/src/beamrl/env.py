"""Multi-cell downlink control environment.

Each base station serves its own user(s) with a codebook beam and a
discrete transmit power.  An episode fixes user positions (and hence
large-scale gains) for T slots; small-scale fading is redrawn every
slot.  Actions move every UE's power and beam index by +/-1 with
saturation at the ends, the reward is the clipped sum of linear SINRs
evaluated on the post-action state, and the per-slot optimum is
available through an exhaustive configuration search.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np

from .errors import ConfigError, EpisodeFinishedError, SearchBudgetError
from .radio import PathLossParams, dft_codebook, sample_channel


def default_power_levels(num_levels: int = 8, p_min: float = 1e-3, p_max: float = 2.0):
    """Log-spaced transmit powers in Watts, 1 mW to 2 W by default."""
    return tuple(float(p) for p in np.logspace(np.log10(p_min), np.log10(p_max), num_levels))


@dataclass(frozen=True)
class NetworkConfig:
    """Static description of the network and episode mechanics."""

    bs_positions: tuple = ((0.0, 0.0), (0.0, 255.0))
    cell_radius: float = 150.0
    ues_per_bs: int = 1
    num_antennas: int = 4
    codebook_size: int = 4
    power_levels: tuple = field(default_factory=default_power_levels)
    episode_length: int = 20
    temperature_k: float = 290.0
    bandwidth_hz: float = 15_000.0
    boltzmann: float = 1.38e-23
    sinr_clip: tuple = (-50.0, 200.0)
    discount: float = 0.3
    channel: PathLossParams = field(default_factory=PathLossParams)
    search_budget: int = 1_000_000

    def __post_init__(self):
        self.validate()

    def validate(self):
        if len(self.bs_positions) < 1:
            raise ConfigError("need at least one base station")
        positions = [tuple(map(float, p)) for p in self.bs_positions]
        if len(set(positions)) != len(positions):
            raise ConfigError("base station positions must be distinct")
        if self.cell_radius <= 0:
            raise ConfigError("cell_radius must be positive")
        if self.ues_per_bs < 1:
            raise ConfigError("ues_per_bs must be at least 1")
        if self.num_antennas < 1:
            raise ConfigError("num_antennas must be at least 1")
        if self.codebook_size < 2:
            raise ConfigError("codebook_size must be at least 2")
        if len(self.power_levels) < 2:
            raise ConfigError("need at least two power levels")
        if any(p <= 0 for p in self.power_levels):
            raise ConfigError("power levels must be positive")
        if list(self.power_levels) != sorted(self.power_levels):
            raise ConfigError("power levels must be sorted ascending")
        if self.episode_length < 1:
            raise ConfigError("episode_length must be at least 1")
        if self.temperature_k <= 0 or self.bandwidth_hz <= 0 or self.boltzmann <= 0:
            raise ConfigError("noise parameters must be positive")
        lo, hi = self.sinr_clip
        if not lo < hi:
            raise ConfigError("sinr_clip must be (low, high) with low < high")
        if not 0.0 <= self.discount < 1.0:
            raise ConfigError("discount must be in [0, 1)")
        self.channel.validate()

    @property
    def num_bs(self) -> int:
        return len(self.bs_positions)

    @property
    def num_ue(self) -> int:
        return self.num_bs * self.ues_per_bs

    @property
    def num_power_levels(self) -> int:
        return len(self.power_levels)

    @property
    def num_actions(self) -> int:
        return 4 ** self.num_ue

    @property
    def obs_dim(self) -> int:
        # power index + beam index + 2-D position per UE
        return 4 * self.num_ue

    def serving_bs(self, ue: int) -> int:
        return ue // self.ues_per_bs

    @cached_property
    def codebook_entries(self) -> np.ndarray:
        return dft_codebook(self.num_antennas, self.codebook_size).entries

    @cached_property
    def bs_array(self) -> np.ndarray:
        return np.asarray(self.bs_positions, dtype=float)


@dataclass
class NetworkState:
    """Mutable episode snapshot.

    channels[u, b] is the M-vector from BS b's array to UE u; the paired
    channel_gains hold the (position-determined) large-scale power gains.
    """

    power_idx: np.ndarray  # (num_ue,) int
    beam_idx: np.ndarray  # (num_ue,) int
    positions: np.ndarray  # (num_ue, 2) float
    channels: np.ndarray  # (num_ue, num_bs, num_antennas) complex
    channel_gains: np.ndarray  # (num_ue, num_bs) float
    slot: int = 0


@dataclass(frozen=True)
class StepOutcome:
    next_state: NetworkState
    reward: float
    per_ue_sinr: np.ndarray
    done: bool


def noise_power(config: NetworkConfig) -> float:
    """Thermal noise power k_B * T * B in Watts."""
    return config.boltzmann * config.temperature_k * config.bandwidth_hz


def decode_action(action: int, num_ue: int) -> np.ndarray:
    """Joint action id -> per-UE (power_delta, beam_delta) in {-1, +1}.

    The id is a base-4 number with UE 0 as the least significant digit;
    digit bit 1 selects the power delta sign, bit 0 the beam delta sign.
    """
    if not 0 <= action < 4 ** num_ue:
        raise ConfigError(f"action id {action} out of range for {num_ue} UEs")
    deltas = np.empty((num_ue, 2), dtype=np.int64)
    a = int(action)
    for u in range(num_ue):
        digit = a % 4
        a //= 4
        deltas[u, 0] = 1 if digit & 2 else -1
        deltas[u, 1] = 1 if digit & 1 else -1
    return deltas


def encode_action(deltas) -> int:
    """Inverse of decode_action."""
    deltas = np.asarray(deltas, dtype=np.int64)
    action = 0
    for u in range(deltas.shape[0] - 1, -1, -1):
        dp, db = deltas[u]
        if dp not in (-1, 1) or db not in (-1, 1):
            raise ConfigError("deltas must be -1 or +1")
        digit = (2 if dp > 0 else 0) + (1 if db > 0 else 0)
        action = action * 4 + digit
    return action


def _sample_all_channels(positions, config, rng):
    """Redraw fading for every (UE, BS) pair in a fixed order."""
    n_ue = positions.shape[0]
    n_bs = config.num_bs
    coeff = np.empty((n_ue, n_bs, config.num_antennas), dtype=complex)
    gains = np.empty((n_ue, n_bs))
    for u in range(n_ue):
        for b in range(n_bs):
            ch = sample_channel(positions[u], config.bs_array[b], config.num_antennas, config.channel, rng)
            coeff[u, b] = ch.coefficients
            gains[u, b] = ch.large_scale_gain
    return coeff, gains


def reset(config: NetworkConfig, rng: np.random.Generator) -> NetworkState:
    """Start an episode: drop each UE uniformly in its serving cell disk.

    Power indices start mid-scale (floor(P/2)), beams at entry 0.
    """
    n_ue = config.num_ue
    positions = np.empty((n_ue, 2))
    for u in range(n_ue):
        center = config.bs_array[config.serving_bs(u)]
        radius = config.cell_radius * np.sqrt(rng.random())
        theta = 2.0 * np.pi * rng.random()
        positions[u] = center + radius * np.array([np.cos(theta), np.sin(theta)])
    coeff, gains = _sample_all_channels(positions, config, rng)
    return NetworkState(
        power_idx=np.full(n_ue, config.num_power_levels // 2, dtype=np.int64),
        beam_idx=np.zeros(n_ue, dtype=np.int64),
        positions=positions,
        channels=coeff,
        channel_gains=gains,
        slot=0,
    )


def _beam_power_gain(state: NetworkState, config: NetworkConfig, ue: int, bs: int, beam: int) -> float:
    """|h_{ue,bs}^H v_beam|^2 at the state's current fading."""
    v = config.codebook_entries[beam]
    return float(np.abs(np.vdot(state.channels[ue, bs], v)) ** 2)


def sinr(state: NetworkState, ue: int, config: NetworkConfig) -> float:
    """Linear SINR of one UE under the current joint configuration.

    Desired power is P_u |h_{u,b(u)}^H v_u|^2; interference collects the
    co-channel transmissions of all other base stations, each using the
    beam and power of the UE it serves; thermal noise closes the sum.
    """
    own_bs = config.serving_bs(ue)
    num = config.power_levels[state.power_idx[ue]] * _beam_power_gain(state, config, ue, own_bs, state.beam_idx[ue])
    den = 0.0
    for other in range(config.num_ue):
        ob = config.serving_bs(other)
        if ob == own_bs:
            continue
        den += config.power_levels[state.power_idx[other]] * _beam_power_gain(state, config, ue, ob, state.beam_idx[other])
    den += noise_power(config)
    return num / den


def per_ue_sinr(state: NetworkState, config: NetworkConfig) -> np.ndarray:
    return np.array([sinr(state, u, config) for u in range(config.num_ue)])


def reward(state: NetworkState, config: NetworkConfig) -> float:
    """Sum of linear SINRs, clipped to the configured range."""
    total = 0.0
    for u in range(config.num_ue):
        total += sinr(state, u, config)
    lo, hi = config.sinr_clip
    return float(min(max(total, lo), hi))


def apply_action(state: NetworkState, action: int, config: NetworkConfig):
    """Clamped index update; returns (power_idx, beam_idx) arrays."""
    deltas = decode_action(action, config.num_ue)
    p = np.clip(state.power_idx + deltas[:, 0], 0, config.num_power_levels - 1)
    b = np.clip(state.beam_idx + deltas[:, 1], 0, config.codebook_size - 1)
    return p, b


def step(state: NetworkState, action: int, config: NetworkConfig, rng: np.random.Generator) -> StepOutcome:
    """Advance one slot: move indices, redraw fading, score the new state."""
    if state.slot >= config.episode_length:
        raise EpisodeFinishedError(f"episode already finished at slot {state.slot}")
    p, b = apply_action(state, action, config)
    coeff, gains = _sample_all_channels(state.positions, config, rng)
    next_state = NetworkState(
        power_idx=p,
        beam_idx=b,
        positions=state.positions,
        channels=coeff,
        channel_gains=gains,
        slot=state.slot + 1,
    )
    sinrs = per_ue_sinr(next_state, config)
    lo, hi = config.sinr_clip
    total = 0.0
    for value in sinrs:
        total += value
    r = float(min(max(total, lo), hi))
    return StepOutcome(
        next_state=next_state,
        reward=r,
        per_ue_sinr=sinrs,
        done=next_state.slot >= config.episode_length,
    )


def observation(state: NetworkState, config: NetworkConfig) -> np.ndarray:
    """Flat float32 view of the controllable and geometric state.

    Layout: power indices scaled to [0, 1] (all UEs), then beam indices
    scaled to [0, 1], then per-UE coordinates relative to the serving BS
    divided by the cell radius.
    """
    n = config.num_ue
    out = np.empty(config.obs_dim, dtype=np.float32)
    p_den = max(config.num_power_levels - 1, 1)
    b_den = max(config.codebook_size - 1, 1)
    out[:n] = state.power_idx / p_den
    out[n:2 * n] = state.beam_idx / b_den
    for u in range(n):
        center = config.bs_array[config.serving_bs(u)]
        out[2 * n + 2 * u: 2 * n + 2 * u + 2] = (state.positions[u] - center) / config.cell_radius
    return out


def indices_from_observation(obs, config: NetworkConfig):
    """Recover integer power/beam indices from an observation vector."""
    n = config.num_ue
    obs = np.asarray(obs, dtype=np.float64)
    p = np.rint(obs[:n] * max(config.num_power_levels - 1, 1)).astype(np.int64)
    b = np.rint(obs[n:2 * n] * max(config.codebook_size - 1, 1)).astype(np.int64)
    return p, b


def exhaustive_optimal(state: NetworkState, config: NetworkConfig):
    """Best (power, beam) configuration at the state's current fading.

    Every joint configuration is scored by its raw sum SINR; the best
    one is returned as (power_idx, beam_idx, clipped_reward).  Selecting
    on the raw sum rather than the clipped one keeps the search
    meaningful when many configurations saturate the reward ceiling
    (the clipped value would tie them all), while the returned reward
    still upper-bounds what any policy can earn at this fading.  Exact
    ties resolve to the smallest configuration in lexicographic
    (p_0, b_0, p_1, b_1, ...) order.
    """
    n_ue = config.num_ue
    n_p = config.num_power_levels
    n_b = config.codebook_size
    total = (n_p * n_b) ** n_ue
    if total > config.search_budget:
        raise SearchBudgetError(
            f"{total} joint configurations exceed the search budget {config.search_budget}"
        )

    # Per-UE lookup of |h_{u,b}^H v_f|^2 for every BS and beam.
    beam_gain = np.empty((n_ue, config.num_bs, n_b))
    for u in range(n_ue):
        for b in range(config.num_bs):
            for f in range(n_b):
                beam_gain[u, b, f] = _beam_power_gain(state, config, u, b, f)

    powers = np.asarray(config.power_levels)
    # Enumerate per-UE choices c_u = p_u * n_b + f_u; meshgrid in 'ij'
    # order makes the flattened grid lexicographic with UE 0 slowest,
    # matching the (p_0, b_0, p_1, b_1, ...) tie-break order.
    per_ue = np.arange(n_p * n_b)
    grids = np.meshgrid(*([per_ue] * n_ue), indexing="ij")
    choice = np.stack([g.ravel() for g in grids], axis=1)  # (total, n_ue)
    p_of = choice // n_b
    f_of = choice % n_b

    sigma = noise_power(config)
    total_sinr = np.zeros(choice.shape[0])
    for u in range(n_ue):
        own = config.serving_bs(u)
        num = powers[p_of[:, u]] * beam_gain[u, own, :][f_of[:, u]]
        den = np.zeros(choice.shape[0])
        for other in range(n_ue):
            ob = config.serving_bs(other)
            if ob == own:
                continue
            den += powers[p_of[:, other]] * beam_gain[u, ob, :][f_of[:, other]]
        den += sigma
        total_sinr += num / den
    best = int(np.argmax(total_sinr))  # first max = lexicographically smallest
    lo, hi = config.sinr_clip
    best_reward = float(min(max(total_sinr[best], lo), hi))
    return p_of[best].copy(), f_of[best].copy(), best_reward


def apply_configuration(state: NetworkState, power_idx, beam_idx) -> NetworkState:
    """State with indices replaced outright (no delta mechanics)."""
    return replace(
        state,
        power_idx=np.asarray(power_idx, dtype=np.int64),
        beam_idx=np.asarray(beam_idx, dtype=np.int64),
    )


def resample_channels(state: NetworkState, config: NetworkConfig, rng: np.random.Generator) -> NetworkState:
    """New fading draw for the same positions; slot advances by one."""
    coeff, gains = _sample_all_channels(state.positions, config, rng)
    return replace(state, channels=coeff, channel_gains=gains, slot=state.slot + 1)


class CellularEnv:
    """Stateful convenience wrapper with a gym-like reset/step interface.

    Owns its generator so that, for a fixed seed, the channel realisation
    sequence does not depend on the actions taken (every step consumes
    the same number of draws).  `steps_taken` counts environment
    interactions for offline-training bookkeeping.
    """

    def __init__(self, config: NetworkConfig, seed: int):
        self.config = config
        self.rng = np.random.default_rng(seed)
        self.state = None
        self.steps_taken = 0

    def reset(self) -> np.ndarray:
        self.state = reset(self.config, self.rng)
        return observation(self.state, self.config)

    def step(self, action: int):
        if self.state is None:
            raise EpisodeFinishedError("call reset() before step()")
        outcome = step(self.state, action, self.config, self.rng)
        self.state = outcome.next_state
        self.steps_taken += 1
        obs = observation(self.state, self.config)
        return obs, outcome.reward, outcome.done, {"per_ue_sinr": outcome.per_ue_sinr}
