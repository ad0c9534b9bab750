"""
OQAM mapping, the synthesis / analysis filter banks and the CP-OFDM baseline.

Frames are stored per transmit antenna as arrays shaped ``(N_T, M, N)``;
time signals as ``(antennas, samples)``.
"""
from __future__ import annotations

import functools
import logging
import math

import attr
import numpy as np

from .prototype import PrototypeFilter
from .utils import readonly

LOGGER = logging.getLogger(__name__)

_QUARTER_TURNS = np.array([1, 1j, -1, -1j])


def _as_frames(value, dtype) -> np.ndarray:
    array = np.array(value, dtype=dtype, copy=True)
    if array.ndim == 2:
        array = array[None, :, :]
    if array.ndim != 3:
        raise ValueError(f"expected an (N_T, M, N) or (M, N) array, got shape {array.shape}")
    array.setflags(write=False)
    return array


@attr.s(slots=True, frozen=True)
class Constellation:
    """Square QAM with unit average symbol energy and Gray-coded PAM rails."""

    # Q^2, the number of QAM points
    order: int = attr.ib(default=4)

    @order.validator
    def _check_order(self, attribute, value) -> None:
        side = math.isqrt(value)
        if value < 4 or side * side != value or side & (side - 1):
            raise ValueError(f"constellation order must be 4, 16, 64, ..., got {value}")

    @property
    def side(self) -> int:
        """Q, the number of PAM levels per real dimension."""
        return math.isqrt(self.order)

    @property
    def bits_per_level(self) -> int:
        return self.side.bit_length() - 1

    @property
    def scale(self) -> float:
        """Half the spacing between adjacent PAM levels."""
        return math.sqrt(3 / (2 * (self.order - 1)))

    @property
    def levels(self) -> np.ndarray:
        return (2 * np.arange(self.side) - self.side + 1) * self.scale

    def level_index(self, x) -> np.ndarray:
        """Index of the nearest PAM level for each real value."""
        index = np.rint((np.asarray(x, dtype=float) / self.scale + self.side - 1) / 2)
        return np.clip(index, 0, self.side - 1).astype(int)

    def slice(self, x) -> np.ndarray:
        """Nearest PAM level for each real value."""
        return (2 * self.level_index(x) - self.side + 1) * self.scale

    def decide(self, z) -> np.ndarray:
        """Nearest QAM point for each complex value."""
        z = np.asarray(z)
        return self.slice(z.real) + 1j * self.slice(z.imag)

    def bits(self, x) -> np.ndarray:
        """Gray-coded bits of real PAM values, one trailing axis per level."""
        index = self.level_index(x)
        gray = index ^ (index >> 1)
        shifts = np.arange(self.bits_per_level)[::-1]
        return (gray[..., None] >> shifts) & 1

    def random_pam(self, rng: np.random.Generator, shape) -> np.ndarray:
        return self.levels[rng.integers(0, self.side, size=shape)]

    def random_qam(self, rng: np.random.Generator, shape) -> np.ndarray:
        return self.random_pam(rng, shape) + 1j * self.random_pam(rng, shape)


@attr.s(slots=True, frozen=True)
class ModulationConfig:
    # Q^2, 4 for QPSK
    constellation_order: int = attr.ib(default=4)
    num_subcarriers: int = attr.ib(default=32)
    overlap_factor: int = attr.ib(default=4)
    # N, FBMC symbols per frame (two per OFDM symbol)
    num_symbols: int = attr.ib(default=106)
    num_tx: int = attr.ib(default=1)
    num_rx: int = attr.ib(default=2)
    # FBMC symbol slots at the start of the frame carrying the known preamble
    preamble_len: int = attr.ib(default=2)

    def __attrs_post_init__(self) -> None:
        Constellation(self.constellation_order)
        if self.num_symbols < 2 or self.num_symbols % 2:
            raise ValueError(f"number of FBMC symbols must be even, got {self.num_symbols}")
        if self.preamble_len < 2 or self.preamble_len % 2:
            raise ValueError(
                f"preamble must span whole OFDM symbols (>= 2 slots), got {self.preamble_len}"
            )
        if self.preamble_len >= self.num_symbols:
            raise ValueError("preamble leaves no room for payload")
        if self.num_tx < 1 or self.num_rx < 1:
            raise ValueError("antenna counts must be positive")

    @property
    def constellation(self) -> Constellation:
        return Constellation(self.constellation_order)

    @property
    def num_ofdm_symbols(self) -> int:
        return self.num_symbols // 2

    def as_dict(self) -> dict:
        return attr.asdict(self)


@attr.s(slots=True, frozen=True)
class OqamFrame:
    # Real OQAM symbols D^(t), shape (N_T, M, N)
    data: np.ndarray = attr.ib(converter=lambda v: _as_frames(v, float), eq=False)

    @property
    def num_tx(self) -> int:
        return self.data.shape[0]

    @property
    def num_subcarriers(self) -> int:
        return self.data.shape[1]

    @property
    def num_symbols(self) -> int:
        return self.data.shape[2]

    def stacked(self) -> np.ndarray:
        """Vertical stack of the per-antenna matrices, shape (M N_T, N)."""
        return self.data.reshape(-1, self.num_symbols)

    @classmethod
    def from_stacked(cls, stacked: np.ndarray, num_tx: int = 1) -> OqamFrame:
        stacked = np.asarray(stacked)
        return cls(stacked.reshape(num_tx, -1, stacked.shape[-1]))


@attr.s(slots=True, frozen=True)
class TimeSignal:
    # Complex baseband samples, one row per antenna
    samples: np.ndarray = attr.ib(
        converter=lambda v: readonly(np.atleast_2d(np.asarray(v, dtype=complex))), eq=False
    )

    @samples.validator
    def _check_samples(self, attribute, value) -> None:
        if value.ndim != 2:
            raise ValueError(f"samples must be (antennas, length), got shape {value.shape}")

    @property
    def num_antennas(self) -> int:
        return self.samples.shape[0]

    def __len__(self) -> int:
        return self.samples.shape[1]


def sfb_length(M: int, N: int, filter_length: int) -> int:
    """(N - 1) M/2 + L_g, the number of samples produced by the SFB."""
    return (N - 1) * (M // 2) + filter_length


def qam_to_oqam(qam_symbols: np.ndarray) -> OqamFrame:
    """Stagger QAM symbols: real part in slot 2k, imaginary part in slot 2k + 1."""
    qam = np.asarray(qam_symbols, dtype=complex)
    if qam.ndim == 2:
        qam = qam[None]
    data = np.empty(qam.shape[:-1] + (2 * qam.shape[-1],))
    data[..., 0::2] = qam.real
    data[..., 1::2] = qam.imag
    return OqamFrame(data)


def oqam_to_qam(frame: OqamFrame) -> np.ndarray:
    """Inverse of :func:`qam_to_oqam`, shape (N_T, M, N/2)."""
    data = frame.data
    return data[..., 0::2] + 1j * data[..., 1::2]


@functools.lru_cache(maxsize=16)
def _carrier_matrix(M: int, L: int) -> np.ndarray:
    """F[i, m] = exp(j 2pi m (i - (L-1)/2) / M), i < L."""
    turns = np.mod(np.outer(2 * np.arange(L) - (L - 1), np.arange(M)), 2 * M)
    return readonly(np.exp(1j * np.pi * turns / M))


def _symbol_phases(M: int, N: int) -> np.ndarray:
    # exp(j phi_{m,n}) times the (-1)^{mn} of the nM/2 shift of the carriers
    m = np.arange(M)[:, None]
    n = np.arange(N)[None, :]
    return _QUARTER_TURNS[np.mod(m + n, 4)]


def _window_index(M: int, N: int, L: int) -> np.ndarray:
    return np.arange(L)[:, None] + (M // 2) * np.arange(N)[None, :]


def sfb_modulate(frame: OqamFrame, filt: PrototypeFilter, *, fast: bool = False) -> TimeSignal:
    """Synthesis filter bank: s(l) = sum_{m,n} d_{m,n} g_{m,n}(l) per transmit antenna.

    :param fast: use an inverse FFT for the sum over subcarriers
    """
    M = filt.num_subcarriers
    if frame.num_subcarriers != M:
        raise ValueError(
            f"frame has {frame.num_subcarriers} subcarriers, filter expects {M}"
        )
    N = frame.num_symbols
    L = filt.length
    weighted = frame.data * _symbol_phases(M, N)
    if fast:
        shift = np.exp(-1j * np.pi * np.arange(M) * (L - 1) / M)
        periods = M * np.fft.ifft(weighted * shift[:, None], axis=1)
        segments = np.tile(periods, (1, filt.overlap_factor, 1))
    else:
        segments = np.einsum("im,tmn->tin", _carrier_matrix(M, L), weighted)
    segments = segments * filt.taps[None, :, None]

    samples = np.zeros((frame.num_tx, sfb_length(M, N, L)), dtype=complex)
    index = _window_index(M, N, L)
    for t in range(frame.num_tx):
        np.add.at(samples[t], index, segments[t])
    return TimeSignal(samples)


def afb_demodulate(
    signal: TimeSignal, filt: PrototypeFilter, M: int, N: int, *, fast: bool = False
) -> np.ndarray:
    """Analysis filter bank: y_{p,q} = sum_l r(l) conj(g_{p,q}(l)).

    :return: complex array shaped (antennas, M, N)
    :raises ValueError: if the signal does not cover all N symbol positions
    """
    if M != filt.num_subcarriers:
        raise ValueError(f"filter is designed for {filt.num_subcarriers} subcarriers, not {M}")
    L = filt.length
    needed = sfb_length(M, N, L)
    if len(signal) < needed:
        raise ValueError(
            f"signal too short for {N} symbols: need {needed} samples, got {len(signal)}"
        )
    windows = signal.samples[:, _window_index(M, N, L)] * filt.taps[None, :, None]
    if fast:
        folded = windows.reshape(signal.num_antennas, filt.overlap_factor, M, N).sum(axis=1)
        shift = np.exp(1j * np.pi * np.arange(M) * (L - 1) / M)
        outputs = np.fft.fft(folded, axis=1) * shift[None, :, None]
    else:
        outputs = np.einsum("im,ain->amn", _carrier_matrix(M, L).conj(), windows)
    return outputs * _symbol_phases(M, N).conj()[None]


def ofdm_modulate(qam: np.ndarray, cp_len: int) -> TimeSignal:
    """CP-OFDM modulator with a unitary IDFT, one row per transmit antenna.

    :param qam: symbols shaped (M, N_sym) or (N_T, M, N_sym)
    """
    qam = np.asarray(qam, dtype=complex)
    if qam.ndim == 2:
        qam = qam[None]
    M = qam.shape[1]
    if cp_len < 0 or cp_len >= M:
        raise ValueError(f"cyclic prefix must satisfy 0 <= cp_len < M={M}, got {cp_len}")
    body = np.fft.ifft(qam, axis=1, norm="ortho")
    with_cp = np.concatenate([body[:, M - cp_len :, :], body], axis=1)
    # symbols one after the other in time
    return TimeSignal(with_cp.transpose(0, 2, 1).reshape(qam.shape[0], -1))


def ofdm_demodulate(signal: TimeSignal, M: int, cp_len: int, num_symbols: int) -> np.ndarray:
    """CP-OFDM demodulator, returns (antennas, M, N_sym)."""
    if cp_len < 0 or cp_len >= M:
        raise ValueError(f"cyclic prefix must satisfy 0 <= cp_len < M={M}, got {cp_len}")
    needed = num_symbols * (M + cp_len)
    if len(signal) < needed:
        raise ValueError(
            f"signal too short for {num_symbols} OFDM symbols: need {needed}, got {len(signal)}"
        )
    blocks = signal.samples[:, :needed].reshape(signal.num_antennas, num_symbols, M + cp_len)
    return np.fft.fft(blocks[:, :, cp_len:], axis=2, norm="ortho").transpose(0, 2, 1)
