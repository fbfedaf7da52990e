"""mmWave radio primitives: ULA steering, DFT codebooks, path loss, channels.

Geometry convention: base stations and users live in the 2-D plane, the
uniform linear array (ULA) at each base station has half-wavelength
spacing, and angles are measured with atan2(dy, dx) so that sin(angle)
is the quantity entering the steering phase.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

SPEED_OF_LIGHT = 299_792_458.0


@dataclass(frozen=True)
class PathLossParams:
    """Close-in reference distance path-loss model plus path-count knob.

    carrier_freq_hz : carrier frequency in Hz
    ref_distance_m  : close-in reference distance d0 (free-space anchor)
    exponent        : path-loss exponent applied beyond d0
    num_paths       : number of multipath components per link (the first
                      one is the geometric line-of-sight direction)
    """

    carrier_freq_hz: float = 28e9
    ref_distance_m: float = 1.0
    exponent: float = 3.0
    num_paths: int = 3

    def validate(self):
        if self.carrier_freq_hz <= 0:
            raise ConfigError("carrier_freq_hz must be positive")
        if self.ref_distance_m <= 0:
            raise ConfigError("ref_distance_m must be positive")
        if self.exponent <= 0:
            raise ConfigError("path-loss exponent must be positive")
        if self.num_paths < 1:
            raise ConfigError("num_paths must be at least 1")


@dataclass(frozen=True)
class Codebook:
    """A bank of unit-norm beamforming vectors, one per row."""

    entries: np.ndarray  # (num_beams, num_antennas) complex

    @property
    def num_beams(self) -> int:
        return self.entries.shape[0]

    @property
    def num_antennas(self) -> int:
        return self.entries.shape[1]


@dataclass(frozen=True)
class ChannelVector:
    """One narrowband MISO channel draw and its large-scale power gain."""

    coefficients: np.ndarray  # (num_antennas,) complex
    large_scale_gain: float


def array_response(angle: float, num_antennas: int) -> np.ndarray:
    """Unit-norm ULA steering vector for half-wavelength element spacing.

    Component m is exp(j * pi * m * sin(angle)) / sqrt(M).
    """
    if num_antennas < 1:
        raise ConfigError("num_antennas must be at least 1")
    m = np.arange(num_antennas)
    return np.exp(1j * np.pi * m * np.sin(angle)) / np.sqrt(num_antennas)


def dft_codebook(num_antennas: int, num_beams: int) -> Codebook:
    """DFT beam codebook; entry i has phases 2*pi*m*i/F, unit norm.

    With num_beams == num_antennas the entries are orthonormal.
    """
    if num_antennas < 1 or num_beams < 1:
        raise ConfigError("codebook dimensions must be at least 1")
    m = np.arange(num_antennas)
    i = np.arange(num_beams)
    phases = 2.0 * np.pi * np.outer(i, m) / num_beams
    entries = np.exp(1j * phases) / np.sqrt(num_antennas)
    return Codebook(entries=entries)


def path_loss_db(distance_m: float, params: PathLossParams) -> float:
    """Close-in path loss in dB at the given link distance.

    PL(d) = FSPL(d0) + 10 * exponent * log10(d / d0), with the free-space
    anchor FSPL(d0) = 20 * log10(4 * pi * d0 * f_c / c).  Distances below
    d0 are clamped to d0, so the model never amplifies.
    """
    if not np.isfinite(distance_m) or distance_m <= 0:
        raise ConfigError(f"distance must be positive and finite, got {distance_m}")
    d0 = params.ref_distance_m
    d = max(distance_m, d0)
    fspl_d0 = 20.0 * np.log10(4.0 * np.pi * d0 * params.carrier_freq_hz / SPEED_OF_LIGHT)
    return float(fspl_d0 + 10.0 * params.exponent * np.log10(d / d0))


def large_scale_gain(ue_pos, bs_pos, params: PathLossParams) -> float:
    """Linear power gain 10^(-PL/10) for the link geometry.

    A UE sitting exactly on the array is treated as being at d0.
    """
    delta = np.asarray(ue_pos, dtype=float) - np.asarray(bs_pos, dtype=float)
    distance = float(np.hypot(delta[0], delta[1]))
    if distance <= 0.0:
        distance = params.ref_distance_m
    return 10.0 ** (-path_loss_db(distance, params) / 10.0)


def sample_channel(
    ue_pos,
    bs_pos,
    num_antennas: int,
    params: PathLossParams,
    rng: np.random.Generator,
) -> ChannelVector:
    """Draw one geometric multipath channel between a BS array and a UE.

    h = sqrt(G / L) * sum_l g_l * a(theta_l) * sqrt(M), where G is the
    linear large-scale gain, the g_l are i.i.d. standard complex normal,
    theta_1 points from the BS to the UE, and the remaining path angles
    are uniform in [-pi/2, pi/2].  The sqrt(M) factor undoes the steering
    normalisation so that E[||h||^2] = M * G.

    The rng consumption order is fixed (path gains, then extra angles),
    which keeps channel draws reproducible and independent of the caller.
    """
    ue_pos = np.asarray(ue_pos, dtype=float)
    bs_pos = np.asarray(bs_pos, dtype=float)
    gain = large_scale_gain(ue_pos, bs_pos, params)

    num_paths = params.num_paths
    gains_re = rng.standard_normal(num_paths)
    gains_im = rng.standard_normal(num_paths)
    path_gains = (gains_re + 1j * gains_im) / np.sqrt(2.0)

    delta = ue_pos - bs_pos
    angles = np.empty(num_paths)
    angles[0] = float(np.arctan2(delta[1], delta[0]))
    if num_paths > 1:
        angles[1:] = rng.uniform(-np.pi / 2.0, np.pi / 2.0, size=num_paths - 1)

    # (L, M) matrix of steering rows; sum over paths happens below.
    m = np.arange(num_antennas)
    steering = np.exp(1j * np.pi * np.outer(np.sin(angles), m))
    coeff = np.sqrt(gain / num_paths) * (path_gains @ steering)
    return ChannelVector(coefficients=coeff, large_scale_gain=gain)
