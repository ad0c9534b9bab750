"""
Prototype filter design and the first-order intrinsic interference weights.

The prototype is a frequency-sampling ("PHYDYAS-style") design; its
coefficients live in ``data/prototypes.yaml`` so a different prototype can be
swapped in without touching the code. The weights (beta, gamma, delta) are
never hard-coded: they are measured with inner products between translated
and modulated copies of the filter.
"""
from __future__ import annotations

from collections.abc import Sequence
import logging

import attr
import numpy as np

from .utils import DATA_PATH, read_fixture_file, readonly

LOGGER = logging.getLogger(__name__)

# Weights smaller than this are treated as exactly zero in the neighbourhood grid
WEIGHT_ZERO_TOL = 1e-6
# Tolerance when checking the measured grid against the symmetric pattern
PATTERN_TOL = 1e-9

_QUARTER_TURNS = np.array([1, 1j, -1, -1j])


@attr.s(slots=True, frozen=True)
class PrototypeFilter:
    # Real, unit-energy impulse response g, symmetric about (L_g - 1) / 2
    taps: np.ndarray = attr.ib(converter=lambda v: readonly(v, float), eq=False, repr=False)
    # Number of subcarriers M (even)
    num_subcarriers: int = attr.ib()
    # Overlap factor K, so that L_g = K * M
    overlap_factor: int = attr.ib()

    def __attrs_post_init__(self) -> None:
        taps = self.taps
        if taps.ndim != 1 or len(taps) != self.num_subcarriers * self.overlap_factor:
            raise ValueError(
                f"prototype length must be K*M = "
                f"{self.num_subcarriers * self.overlap_factor}, got {taps.shape}"
            )
        energy = float(np.sum(taps**2))
        if abs(energy - 1.0) > 1e-12:
            raise ValueError(f"prototype must have unit energy, got {energy!r}")
        if np.max(np.abs(taps - taps[::-1])) > 1e-12:
            raise ValueError("prototype taps must be symmetric about (L_g - 1) / 2")

    @property
    def length(self) -> int:
        """L_g, the number of taps."""
        return len(self.taps)

    @property
    def center(self) -> float:
        """(L_g - 1) / 2, the centre of the modulating exponentials."""
        return (self.length - 1) / 2


@attr.s(slots=True, frozen=True)
class InterferenceWeights:
    beta: float = attr.ib(converter=float)
    gamma: float = attr.ib(converter=float)
    delta: float = attr.ib(converter=float)
    # sign of the coupling across the band edge (subcarriers M-1 and 0) relative
    # to the interior pattern; -1 for an even-length filter with M % 4 == 0
    edge_sign: int = attr.ib(default=-1)

    @delta.validator
    def _check_order(self, attribute, value) -> None:
        if not self.gamma > self.beta > value > 0:
            raise ValueError(
                "interference weights must satisfy gamma > beta > delta > 0, got "
                f"beta={self.beta!r}, gamma={self.gamma!r}, delta={value!r}"
            )

    @edge_sign.validator
    def _check_edge_sign(self, attribute, value) -> None:
        if value not in (1, -1):
            raise ValueError(f"edge sign must be +1 or -1, got {value!r}")

    def neighborhood(self, p: int, num_subcarriers: int | None = None) -> np.ndarray:
        """Signed 3x3 weight grid around a point on subcarrier ``p``.

        Rows are subcarriers p-1, p, p+1 and columns are symbols q-1, q, q+1.
        The centre entry (the symbol itself) is 0. With ``num_subcarriers``
        given, the row that wraps across the band edge carries :attr:`edge_sign`.
        """
        s = -1.0 if p % 2 else 1.0
        b, g, d = self.beta, self.gamma, self.delta
        grid = np.array(
            [
                [s * d, -b, s * d],
                [-s * g, 0.0, s * g],
                [s * d, b, s * d],
            ]
        )
        if num_subcarriers is not None:
            if p == 0:
                grid[0] *= self.edge_sign
            if p == num_subcarriers - 1:
                grid[2] *= self.edge_sign
        return grid

    def as_dict(self) -> dict[str, float]:
        return {"beta": self.beta, "gamma": self.gamma, "delta": self.delta}


def load_coefficients(overlap_factor: int) -> list[float]:
    """Frequency-sampling coefficients for ``overlap_factor`` from the fixture."""
    table = read_fixture_file(DATA_PATH / "prototypes.yaml")
    try:
        return [float(c) for c in table[overlap_factor]]
    except KeyError:
        raise KeyError(
            f"No prototype coefficients for overlap factor K={overlap_factor}"
        ) from None


def design_prototype(
    M: int, K: int = 4, coefficients: Sequence[float] | None = None
) -> PrototypeFilter:
    """Frequency-sampling prototype of length ``K*M`` with unit energy.

    :param M: number of subcarriers (even, at least 4)
    :param K: overlap factor (at least 2)
    :param coefficients: H_0 .. H_{K-1}; read from ``data/prototypes.yaml`` when omitted
    """
    if M < 4 or M % 2:
        raise ValueError(f"number of subcarriers must be even and >= 4, got {M}")
    if K < 2:
        raise ValueError(f"overlap factor must be >= 2, got {K}")
    if coefficients is None:
        coefficients = load_coefficients(K)
    H = np.asarray(coefficients, dtype=float)
    if H.shape != (K,):
        raise ValueError(f"expected {K} frequency coefficients, got {H.shape[0]}")

    length = K * M
    k = np.arange(1, K)
    # sampled at half-integer points so that g(l) == g(L_g - 1 - l)
    angles = 2 * np.pi * np.outer(k, np.arange(length) + 0.5) / length
    taps = H[0] + 2 * ((-1.0) ** k * H[1:]) @ np.cos(angles)
    taps /= np.linalg.norm(taps)
    return PrototypeFilter(taps, M, K)


def ambient_phase(m, n):
    """phi_{m,n} = (m + n) pi/2 + m n pi, reduced modulo 2 pi.

    Evaluated in whole quarter turns, so the result is exact.
    """
    quarter = np.mod(np.add(m, n) + 2 * np.multiply(m, n), 4)
    phase = quarter * (np.pi / 2)
    return float(phase) if np.ndim(phase) == 0 else phase


def phase_factors(M: int, N: int) -> np.ndarray:
    """exp(j phi_{m,n}) for the M x N grid, with exact quarter-turn values."""
    m = np.arange(M)[:, None]
    n = np.arange(N)[None, :]
    return _QUARTER_TURNS[np.mod(m + n + 2 * m * n, 4)]


def modulated_pulse(filt: PrototypeFilter, m: int, n: int, length: int) -> np.ndarray:
    """Samples 0 .. length-1 of g_{m,n}(l) = g(l - nM/2) e^{j2pi m (l - (L_g-1)/2)/M} e^{j phi}."""
    M = filt.num_subcarriers
    L = filt.length
    l = np.arange(length)
    offset = l - n * (M // 2)
    inside = (offset >= 0) & (offset < L)
    envelope = np.zeros(length)
    envelope[inside] = filt.taps[offset[inside]]
    # 2 (l - centre) is an integer, so the exponent is reduced exactly modulo 2M
    turns = np.mod(m * (2 * l - (L - 1)), 2 * M)
    carrier = np.exp(1j * np.pi * turns / M)
    return envelope * carrier * _QUARTER_TURNS[int(np.mod(m + n + 2 * m * n, 4))]


def pulse_inner_product(
    filt: PrototypeFilter, source: tuple[int, int], target: tuple[int, int]
) -> complex:
    """<g_{m,n}, g_{p,q}> = sum_l g_{m,n}(l) conj(g_{p,q}(l))."""
    M = filt.num_subcarriers
    length = (max(source[1], target[1]) * (M // 2)) + filt.length
    a = modulated_pulse(filt, source[0], source[1], length)
    b = modulated_pulse(filt, target[0], target[1], length)
    return complex(np.vdot(b, a))


def measure_neighborhood(filt: PrototypeFilter, p: int, q: int) -> np.ndarray:
    """Imaginary couplings Im<g_{p+i,q+j}, g_{p,q}> for i, j in {-1, 0, 1}.

    Subcarrier indices wrap modulo M, so the grids at p = 0 and p = M-1 hold
    the couplings across the band edge. The centre entry holds the real
    self-product (the pulse energy).
    """
    if q < 1:
        raise ValueError(f"reference symbol must have a left neighbour, got q={q}")
    M = filt.num_subcarriers
    grid = np.empty((3, 3))
    for i in (-1, 0, 1):
        for j in (-1, 0, 1):
            value = pulse_inner_product(filt, ((p + i) % M, q + j), (p, q))
            grid[i + 1, j + 1] = value.real if i == j == 0 else value.imag
    grid[np.abs(grid) < WEIGHT_ZERO_TOL] = 0.0
    return grid


def compute_weights(filt: PrototypeFilter, p: int | None = None, q: int = 2) -> InterferenceWeights:
    """Measure (beta, gamma, delta) from the prototype by direct inner products.

    The measurement is repeated on a subcarrier of the other parity and on
    both band edges; every grid must follow the symmetric first-order
    pattern, the edge rows up to the measured :attr:`~InterferenceWeights.edge_sign`.

    :raises ValueError: if the prototype does not produce the expected pattern
        or ordering gamma > beta > delta > 0
    """
    M = filt.num_subcarriers
    if p is None:
        p = M // 2
    if not 1 <= p <= M - 2:
        raise ValueError(f"reference subcarrier must be away from the band edges, got p={p}")
    grid = measure_neighborhood(filt, p, q)
    sign = -1.0 if p % 2 else 1.0
    beta = grid[2, 1]
    gamma = sign * grid[1, 2]
    delta = sign * grid[2, 2]
    # subcarrier 0 seen from M-1 takes the place of the p+1 neighbour
    edge_sign = 1 if measure_neighborhood(filt, M - 1, q)[2, 1] > 0 else -1
    LOGGER.debug(
        "measured weights beta=%r gamma=%r delta=%r edge_sign=%d", beta, gamma, delta, edge_sign
    )
    weights = InterferenceWeights(beta, gamma, delta, edge_sign)

    for ref in (p, p + 1, 0, M - 1):
        measured = measure_neighborhood(filt, ref, q)
        expected = weights.neighborhood(ref, M)
        if abs(measured[1, 1] - 1.0) > 1e-12:
            raise ValueError(f"pulse energy at ({ref}, {q}) is {measured[1, 1]!r}, not 1")
        measured[1, 1] = 0.0
        if np.max(np.abs(measured - expected)) > PATTERN_TOL:
            raise ValueError(
                f"prototype couplings around subcarrier {ref} do not follow the "
                f"first-order interference pattern:\n{measured}"
            )
    return weights
