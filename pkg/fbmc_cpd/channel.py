"""Block-fading multipath channels, AWGN and the SNR convention."""
from __future__ import annotations

import logging
from typing import Union

import attr
import numpy as np

from .utils import DATA_PATH, read_fixture_file, readonly
from .waveform import TimeSignal

LOGGER = logging.getLogger(__name__)

SeedLike = Union[None, int, np.random.SeedSequence, np.random.Generator]


@attr.s(slots=True, frozen=True)
class ChannelProfile:
    name: str = attr.ib()
    # Linear tap powers, one per sample of delay
    tap_powers: np.ndarray = attr.ib(converter=lambda v: readonly(v, float), eq=False)

    @tap_powers.validator
    def _check_powers(self, attribute, value) -> None:
        if value.ndim != 1 or len(value) == 0:
            raise ValueError(f"profile {self.name!r} needs a non-empty vector of tap powers")
        if np.any(value < 0):
            raise ValueError(f"profile {self.name!r} has negative tap powers")
        if abs(value.sum() - 1.0) > 1e-12:
            raise ValueError(f"profile {self.name!r} powers sum to {value.sum()!r}, not 1")

    @property
    def length(self) -> int:
        """L_h, the number of taps."""
        return len(self.tap_powers)


def load_profile(name: str) -> ChannelProfile:
    """Load a packaged profile from ``data/profiles.yaml`` and normalise its powers."""
    table = read_fixture_file(DATA_PATH / "profiles.yaml")
    try:
        entry = table[name]
    except KeyError:
        raise KeyError(
            f"Unknown channel profile {name!r}, available: {', '.join(sorted(table))}"
        ) from None
    powers = np.asarray(entry["tap_powers"], dtype=float)
    if len(powers) != entry["L_h"]:
        raise ValueError(f"profile {name!r}: L_h={entry['L_h']} but {len(powers)} powers given")
    return ChannelProfile(name, powers / powers.sum())


def frequency_response(impulse_response: np.ndarray, M: int) -> np.ndarray:
    """M-point DFT along the last axis, folding responses longer than M."""
    h = np.asarray(impulse_response)
    length = h.shape[-1]
    if length > M:
        padded = -(-length // M) * M
        h = np.concatenate([h, np.zeros(h.shape[:-1] + (padded - length,))], axis=-1)
        h = h.reshape(h.shape[:-1] + (padded // M, M)).sum(axis=-2)
    return np.fft.fft(h, n=M, axis=-1)


@attr.s(slots=True, frozen=True)
class ChannelSet:
    # h^(r,t), shape (N_R, N_T, L_h)
    impulse_responses: np.ndarray = attr.ib(converter=lambda v: readonly(v, complex), eq=False)
    num_subcarriers: int = attr.ib()
    # H^(r,t)_p, shape (N_R, N_T, M), always recomputed from the impulse responses
    freq_responses: np.ndarray = attr.ib(init=False, eq=False, repr=False)

    def __attrs_post_init__(self) -> None:
        if self.impulse_responses.ndim != 3:
            raise ValueError(
                f"impulse responses must be (N_R, N_T, L_h), got {self.impulse_responses.shape}"
            )
        response = readonly(frequency_response(self.impulse_responses, self.num_subcarriers))
        object.__setattr__(self, "freq_responses", response)

    @property
    def num_rx(self) -> int:
        return self.impulse_responses.shape[0]

    @property
    def num_tx(self) -> int:
        return self.impulse_responses.shape[1]

    @property
    def length(self) -> int:
        return self.impulse_responses.shape[2]

    @property
    def H(self) -> np.ndarray:
        """Channel factor of the CPD, N_R x (M N_T) with H[r, t M + p] = H^(r,t)_p."""
        return self.freq_responses.reshape(self.num_rx, -1)


@attr.s(slots=True, frozen=True)
class NoiseSpec:
    # Variance per complex time sample
    sigma2: float = attr.ib(converter=float)
    seed: SeedLike = attr.ib(default=None, eq=False)

    @sigma2.validator
    def _check_sigma2(self, attribute, value) -> None:
        if value < 0:
            raise ValueError(f"noise variance must be non-negative, got {value}")


def draw_channel(
    profile: ChannelProfile, N_T: int, N_R: int, seed: SeedLike = None, num_subcarriers: int = 32
) -> ChannelSet:
    """Independent Rayleigh taps for each (r, t) pair, tap k with variance ``tap_powers[k]``."""
    rng = np.random.default_rng(seed)
    shape = (N_R, N_T, profile.length)
    gauss = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    taps = np.sqrt(profile.tap_powers / 2) * gauss
    return ChannelSet(taps, num_subcarriers)


def apply_channel(signal: TimeSignal, channels: ChannelSet, noise: NoiseSpec) -> TimeSignal:
    """r^(r) = sum_t h^(r,t) * s^(t) + w^(r), full linear convolution.

    The noise is drawn from ``noise.seed`` with unit variance and then scaled,
    so one seed gives the same realisation shape at every SNR.
    """
    if signal.num_antennas != channels.num_tx:
        raise ValueError(
            f"signal has {signal.num_antennas} transmit antennas, channel expects {channels.num_tx}"
        )
    length = len(signal) + channels.length - 1
    received = np.zeros((channels.num_rx, length), dtype=complex)
    for r in range(channels.num_rx):
        for t in range(channels.num_tx):
            received[r] += np.convolve(channels.impulse_responses[r, t], signal.samples[t])
    if noise.sigma2 > 0:
        rng = np.random.default_rng(noise.seed)
        shape = received.shape
        white = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)
        received += np.sqrt(noise.sigma2) * white
    return TimeSignal(received)


def snr_to_sigma2(snr_db: float, signal_power: float = 1.0) -> float:
    """sigma^2 = signal_power / 10^(snr_db / 10)."""
    if signal_power <= 0:
        raise ValueError(f"signal power must be positive, got {signal_power}")
    return signal_power / 10 ** (snr_db / 10)
