"""
Frame-level model of the intrinsic interference.

The pseudo-symbols seen after the AFB are ``C = D + j*(interference)``, with the
interference built from the first-order neighbours of every FT point::

    C = D + j [beta E D + S (-gamma D Ebar + delta Zbar D Etilde)]

Frequency is circular (``E``, ``Zbar``); time is not (``Ebar``, ``Etilde``), the
frame being surrounded by empty symbol slots. The wrap between subcarriers
M-1 and 0 carries the filter's edge sign (see
:attr:`~fbmc_cpd.prototype.InterferenceWeights.edge_sign`): with an
even-length prototype the modulator is M-antiperiodic in the subcarrier index,
so the physical corners are the negated circulant ones.
"""
from __future__ import annotations

import functools
import logging

import attr
import numpy as np

from .prototype import InterferenceWeights
from .utils import readonly
from .waveform import OqamFrame

LOGGER = logging.getLogger(__name__)


@attr.s(slots=True, frozen=True)
class StructMatrices:
    # diag(1, -1, 1, ...), M x M
    S: np.ndarray = attr.ib(eq=False)
    # skew-symmetric circulant, M x M
    E: np.ndarray = attr.ib(eq=False)
    # skew-symmetric tridiagonal Toeplitz, N x N
    Ebar: np.ndarray = attr.ib(eq=False)
    # symmetric tridiagonal Toeplitz, N x N
    Etilde: np.ndarray = attr.ib(eq=False)
    # Z + Z^-1, M x M
    Zbar: np.ndarray = attr.ib(eq=False)

    @property
    def num_subcarriers(self) -> int:
        return self.S.shape[0]

    @property
    def num_symbols(self) -> int:
        return self.Ebar.shape[0]

    @property
    def edge_sign(self) -> int:
        """Sign of the wrapped coupling, read from the corner E[M-1, 0]."""
        return int(self.E[-1, 0])

    @property
    def signs(self) -> np.ndarray:
        """Diagonal of S."""
        return np.diag(self.S)

    def as_dict(self) -> dict[str, list[list[int]]]:
        return {
            name: getattr(self, name).astype(int).tolist()
            for name in ("S", "E", "Ebar", "Etilde", "Zbar")
        }


def signed_shift(M: int, edge_sign: int = -1) -> np.ndarray:
    """Cyclic downshift Z of size M whose wrapped entry Z[0, M-1] is ``edge_sign``."""
    if edge_sign not in (1, -1):
        raise ValueError(f"edge sign must be +1 or -1, got {edge_sign!r}")
    Z = np.eye(M, k=-1)
    Z[0, M - 1] = edge_sign
    return Z


@functools.lru_cache(maxsize=32)
def build_struct_matrices(M: int, N: int, edge_sign: int = -1) -> StructMatrices:
    """Structured matrices of the frame model, cached per ``(M, N, edge_sign)``.

    ``edge_sign=+1`` gives the plain circulant E and Zbar; the default matches
    an even-length prototype with M a multiple of 4.

    :raises ValueError: if M is odd or below 4, or N < 2
    """
    if M < 4 or M % 2:
        raise ValueError(f"number of subcarriers must be even and >= 4, got {M}")
    if N < 2:
        raise ValueError(f"number of symbols must be >= 2, got {N}")
    Z = signed_shift(M, edge_sign)
    return StructMatrices(
        S=readonly(np.diag((-1.0) ** np.arange(M))),
        E=readonly(Z.T - Z),
        Ebar=readonly(np.eye(N, k=1) - np.eye(N, k=-1)),
        Etilde=readonly(np.eye(N, k=1) + np.eye(N, k=-1)),
        Zbar=readonly(Z + Z.T),
    )


@attr.s(slots=True, frozen=True)
class VirtualFrame:
    # Complex pseudo-symbols C^(t), shape (N_T, M, N)
    data: np.ndarray = attr.ib(
        converter=lambda v: readonly(v if np.ndim(v) == 3 else np.asarray(v)[None], complex),
        eq=False,
    )

    @property
    def num_tx(self) -> int:
        return self.data.shape[0]

    def stacked(self) -> np.ndarray:
        """C of the CPD, shape (M N_T, N)."""
        return self.data.reshape(-1, self.data.shape[-1])

    @classmethod
    def from_stacked(cls, stacked: np.ndarray, num_tx: int = 1) -> VirtualFrame:
        stacked = np.asarray(stacked)
        return cls(stacked.reshape(num_tx, -1, stacked.shape[-1]))


def pseudo_symbols(
    D: np.ndarray, weights: InterferenceWeights, structs: StructMatrices | None = None
) -> np.ndarray:
    """Apply the frame model to real arrays shaped (..., M, N)."""
    D = np.asarray(D, dtype=float)
    M, N = D.shape[-2:]
    if structs is None:
        structs = build_struct_matrices(M, N, weights.edge_sign)
    if (structs.num_subcarriers, structs.num_symbols) != (M, N):
        raise ValueError(
            f"structured matrices are for {structs.num_subcarriers}x{structs.num_symbols}, "
            f"data is {M}x{N}"
        )
    if structs.edge_sign != weights.edge_sign:
        raise ValueError(
            f"structured matrices wrap with sign {structs.edge_sign}, "
            f"weights with {weights.edge_sign}"
        )
    s = structs.signs[:, None]
    interference = weights.beta * (structs.E @ D) + s * (
        -weights.gamma * (D @ structs.Ebar)
        + weights.delta * (structs.Zbar @ D @ structs.Etilde)
    )
    return D + 1j * interference


def virtualize(
    frame: OqamFrame, weights: InterferenceWeights, structs: StructMatrices | None = None
) -> VirtualFrame:
    """Pseudo-symbols of every transmit antenna; ``Re{C} == D`` exactly."""
    return VirtualFrame(pseudo_symbols(frame.data, weights, structs))


def devirtualize(frame: VirtualFrame) -> OqamFrame:
    return OqamFrame(frame.data.real)


def neighborhood_oracle(D: np.ndarray, weights: InterferenceWeights) -> np.ndarray:
    """Pseudo-symbols by explicit summation over each point's 3x3 neighbourhood.

    Slow reference form of :func:`pseudo_symbols` for a single (M, N) matrix.
    """
    D = np.asarray(D, dtype=float)
    M, N = D.shape
    interference = np.zeros((M, N))
    for p in range(M):
        grid = weights.neighborhood(p, M)
        for q in range(N):
            total = 0.0
            for i in (-1, 0, 1):
                for j in (-1, 0, 1):
                    n = q + j
                    if 0 <= n < N:
                        total += grid[i + 1, j + 1] * D[(p + i) % M, n]
            interference[p, q] = total
    return D + 1j * interference


def build_interference_operator(
    M: int, N: int, weights: InterferenceWeights, structs: StructMatrices | None = None
) -> np.ndarray:
    """G such that vec(C) = G vec(D), column-major vectorisation."""
    if structs is None:
        structs = build_struct_matrices(M, N, weights.edge_sign)
    identity = np.eye(N)
    imag = (
        weights.beta * np.kron(identity, structs.E)
        - weights.gamma * np.kron(structs.Ebar.T, structs.S)
        + weights.delta * np.kron(structs.Etilde.T, structs.S @ structs.Zbar)
    )
    return np.eye(M * N) + 1j * imag


@attr.s(slots=True, frozen=True)
class InterferenceHistogram:
    bin_centers: np.ndarray = attr.ib(eq=False)
    density: np.ndarray = attr.ib(eq=False)
    mean: float = attr.ib()
    variance: float = attr.ib()
    count: int = attr.ib()

    @property
    def standard_error(self) -> float:
        """Standard error of :attr:`mean`."""
        return float(np.sqrt(self.variance / self.count))


def interference_histogram(C, bins: int = 50) -> InterferenceHistogram:
    """Normalised histogram of Im{C} over all entries.

    :param C: a :class:`VirtualFrame` or any complex array
    """
    if bins < 10:
        raise ValueError(f"histogram needs at least 10 bins, got {bins}")
    data = C.data if isinstance(C, VirtualFrame) else np.asarray(C)
    values = np.imag(data).ravel()
    if values.size == 0:
        raise ValueError("no pseudo-symbols to histogram")
    # symmetric about zero so that mirrored bins line up
    span = float(np.abs(values).max())
    density, edges = np.histogram(values, bins=bins, range=(-span, span), density=True)
    return InterferenceHistogram(
        bin_centers=(edges[:-1] + edges[1:]) / 2,
        density=density,
        mean=float(values.mean()),
        variance=float(values.var()),
        count=values.size,
    )
