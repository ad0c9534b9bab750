"""
The received M x N x N_R tensor and the algebra of its constrained CPD.

With ``Y[m, n, r]`` the AFB output of antenna ``r`` and the known factor
``Gamma = [I_M ... I_M]``, the three unfoldings factor as::

    unfold2(Y) = (H kr Gamma) C          # (M N_R) x N
    unfold3(Y) = (C^T kr Gamma) H^T      # (M N) x N_R
    unfold1(Y) = (H kr C^T) Gamma^T      # (N N_R) x M

Vectorisation is column-major everywhere.
"""
from __future__ import annotations

import logging

import attr
import numpy as np

from .utils import readonly

LOGGER = logging.getLogger(__name__)


@attr.s(slots=True, frozen=True)
class ReceivedTensor:
    # Y[m, n, r], shape (M, N, N_R)
    Y: np.ndarray = attr.ib(converter=lambda v: readonly(v, complex), eq=False)

    @Y.validator
    def _check_tensor(self, attribute, value) -> None:
        if value.ndim != 3 or 0 in value.shape:
            raise ValueError(f"received tensor must be M x N x N_R, got shape {value.shape}")
        if not np.all(np.isfinite(value)):
            raise ValueError("received tensor has non-finite entries")

    @classmethod
    def from_afb(cls, outputs: np.ndarray) -> ReceivedTensor:
        """Build from per-antenna AFB outputs shaped (N_R, M, N)."""
        return cls(np.moveaxis(np.asarray(outputs), 0, -1))

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.Y.shape

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.Y))

    def unfold1(self) -> np.ndarray:
        return unfold1(self.Y)

    def unfold2(self) -> np.ndarray:
        return unfold2(self.Y)

    def unfold3(self) -> np.ndarray:
        return unfold3(self.Y)

    def columns(self, stop: int) -> ReceivedTensor:
        """Sub-tensor of the first ``stop`` symbol columns."""
        return ReceivedTensor(self.Y[:, :stop, :])


def _array(Y) -> np.ndarray:
    return Y.Y if isinstance(Y, ReceivedTensor) else np.asarray(Y)


def unfold1(Y) -> np.ndarray:
    """Horizontal slices: block r of N rows is Y[:, :, r]^T."""
    Y = _array(Y)
    M, N, N_R = Y.shape
    return Y.transpose(2, 1, 0).reshape(N_R * N, M)


def unfold2(Y) -> np.ndarray:
    """Frontal slices stacked vertically: block r of M rows is Y[:, :, r]."""
    Y = _array(Y)
    M, N, N_R = Y.shape
    return Y.transpose(2, 0, 1).reshape(N_R * M, N)


def unfold3(Y) -> np.ndarray:
    """Column r is vec(Y[:, :, r])."""
    Y = _array(Y)
    M, N, N_R = Y.shape
    return Y.reshape(M * N, N_R, order="F")


def fold1(Y1: np.ndarray, M: int, N: int, N_R: int) -> np.ndarray:
    return np.asarray(Y1).reshape(N_R, N, M).transpose(2, 1, 0)


def fold2(Y2: np.ndarray, M: int, N: int, N_R: int) -> np.ndarray:
    return np.asarray(Y2).reshape(N_R, M, N).transpose(1, 2, 0)


def fold3(Y3: np.ndarray, M: int, N: int, N_R: int) -> np.ndarray:
    return np.asarray(Y3).reshape(M, N, N_R, order="F")


def known_factor(M: int, N_T: int = 1) -> np.ndarray:
    """Gamma = [I_M I_M ... I_M], N_T copies side by side."""
    if M < 1 or N_T < 1:
        raise ValueError(f"known factor needs positive sizes, got M={M}, N_T={N_T}")
    return np.tile(np.eye(M), (1, N_T))


def khatri_rao(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Columnwise Kronecker product, A-index major."""
    A = np.asarray(A)
    B = np.asarray(B)
    if A.ndim != 2 or B.ndim != 2:
        raise ValueError("Khatri-Rao product needs two matrices")
    if A.shape[1] != B.shape[1]:
        raise ValueError(
            f"Khatri-Rao product needs equal column counts, got {A.shape[1]} and {B.shape[1]}"
        )
    return np.einsum("ir,jr->ijr", A, B).reshape(-1, A.shape[1])


def cpd_tensor(Gamma: np.ndarray, C: np.ndarray, H: np.ndarray) -> np.ndarray:
    """[[Gamma, C^T, H]] as an M x N x N_R array."""
    M = Gamma.shape[0]
    N = C.shape[1]
    N_R = H.shape[0]
    return fold2(khatri_rao(H, Gamma) @ C, M, N, N_R)


def cpd_cost(Y, Gamma: np.ndarray, C: np.ndarray, H: np.ndarray, unfolding: int = 2) -> float:
    """Frobenius norm of Y - [[Gamma, C^T, H]] computed through one unfolding."""
    Y = _array(Y)
    if unfolding == 1:
        residual = unfold1(Y) - khatri_rao(H, C.T) @ Gamma.T
    elif unfolding == 2:
        residual = unfold2(Y) - khatri_rao(H, Gamma) @ C
    elif unfolding == 3:
        residual = unfold3(Y) - khatri_rao(C.T, Gamma) @ H.T
    else:
        raise ValueError(f"unfolding must be 1, 2 or 3, got {unfolding}")
    return float(np.linalg.norm(residual))


@attr.s(slots=True, frozen=True)
class KrFactors:
    # N_R x M
    H: np.ndarray = attr.ib(eq=False)
    # M x N, row m holds the symbols of subcarrier m
    C: np.ndarray = attr.ib(eq=False)
    # subcarriers whose column of Y1 was all zero
    flagged: tuple[int, ...] = attr.ib(default=())


def kr_factorize(Y1: np.ndarray, N_R: int) -> KrFactors:
    """Rank-1 factorisation of every column of a SIMO ``unfold1`` matrix.

    Column m reshaped to N_R x N is approximated by H[:, m] C[m, :] through its
    dominant singular pair; the split of the singular value between the two
    factors is arbitrary (per-column scaling ambiguity).
    """
    Y1 = np.asarray(Y1)
    rows, M = Y1.shape
    if rows % N_R:
        raise ValueError(f"{rows} rows cannot be split over {N_R} antennas")
    N = rows // N_R
    H = np.zeros((N_R, M), dtype=complex)
    C = np.zeros((M, N), dtype=complex)
    flagged = []
    for m in range(M):
        block = Y1[:, m].reshape(N_R, N)
        if not np.any(block):
            flagged.append(m)
            continue
        u, s, vh = np.linalg.svd(block, full_matrices=False)
        root = np.sqrt(s[0])
        H[:, m] = root * u[:, 0]
        C[m, :] = root * vh[0]
    if flagged:
        LOGGER.warning("Khatri-Rao factorisation: zero columns %s", flagged)
    return KrFactors(H, C, tuple(flagged))


@attr.s(slots=True, frozen=True)
class Identifiability:
    holds: bool = attr.ib()
    simo_condition: bool = attr.ib()
    single_tx: bool = attr.ib()

    @property
    def identifiable(self) -> bool:
        """Generic condition met and no multi-antenna transmit ambiguity."""
        return self.holds and self.single_tx


def check_identifiability(M: int, N: int, N_T: int, N_R: int) -> Identifiability:
    """M + min(N, M N_T) + min(N_R, M N_T) >= 2 M N_T + 2, and its SIMO form N_R >= 2."""
    if min(M, N, N_T, N_R) < 1:
        raise ValueError("dimensions must be positive")
    columns = M * N_T
    holds = M + min(N, columns) + min(N_R, columns) >= 2 * columns + 2
    return Identifiability(
        holds=bool(holds), simo_condition=(N_T == 1 and N_R >= 2), single_tx=(N_T == 1)
    )
