"""
Covariance of the AFB output noise and the weighted least-squares updates.

White time-domain noise of variance sigma^2 leaves the analysis filter bank
correlated in time and frequency. Truncated to first-order neighbours, the
covariance of ``vec(Y^(r))`` is ``sigma^2 * Bbar`` with::

    Bbar = I_N (x) B + J_N (x) S A+ + J_N^T (x) S A-

where ``J_N`` is the N x N upshift. Antennas are independent, so the
covariance of ``vec(Y3)`` is ``sigma^2 * (I_NR (x) Bbar)``.

All solves are dense; this is meant for small frames.
"""
from __future__ import annotations

import functools
import logging

import attr
import numpy as np
import scipy.linalg as la

from .als import RankDeficiencyError
from .interference import signed_shift
from .prototype import InterferenceWeights, PrototypeFilter
from .tensor import khatri_rao, unfold1, unfold2
from .utils import readonly, unvec, vec
from .waveform import TimeSignal, afb_demodulate, sfb_length

LOGGER = logging.getLogger(__name__)

# Bbar eigenvalues below this trigger the ridge
MIN_EIGENVALUE = 1e-10
RIDGE = 1e-8


def build_B(M: int, beta: float, edge_sign: int = -1) -> np.ndarray:
    """Frequency-direction covariance within one symbol.

    The corners follow the same band-edge sign as E in the frame model.
    """
    if M < 4 or M % 2:
        raise ValueError(f"number of subcarriers must be even and >= 4, got {M}")
    Z = signed_shift(M, edge_sign)
    return np.eye(M) + 1j * beta * (Z.T - Z)


def build_Apm(
    M: int, gamma: float, delta: float, sign: int, edge_sign: int = -1
) -> np.ndarray:
    """A+ (``sign=+1``) or A- (``sign=-1``): correlation with the next / previous symbol."""
    if M < 4:
        raise ValueError(f"number of subcarriers must be >= 4, got {M}")
    if sign not in (1, -1):
        raise ValueError(f"sign must be +1 or -1, got {sign}")
    Z = signed_shift(M, edge_sign)
    T = sign * gamma * np.eye(M) + delta * (Z + Z.T)
    return 1j * T


def assemble_Bbar(
    B: np.ndarray, Aplus: np.ndarray, Aminus: np.ndarray, S: np.ndarray, N: int
) -> np.ndarray:
    """Block tridiagonal, block Toeplitz (MN) x (MN) matrix."""
    if N < 1:
        raise ValueError(f"number of symbols must be positive, got {N}")
    return (
        np.kron(np.eye(N), B)
        + np.kron(np.eye(N, k=1), S @ Aplus)
        + np.kron(np.eye(N, k=-1), S @ Aminus)
    )


@attr.s(slots=True, frozen=True)
class NoiseCovarianceModel:
    B: np.ndarray = attr.ib(eq=False, repr=False)
    Aplus: np.ndarray = attr.ib(eq=False, repr=False)
    Aminus: np.ndarray = attr.ib(eq=False, repr=False)
    S: np.ndarray = attr.ib(eq=False, repr=False)
    Bbar: np.ndarray = attr.ib(eq=False, repr=False)
    sigma2: float = attr.ib(default=1.0, converter=float)

    @classmethod
    def build(
        cls, M: int, N: int, weights: InterferenceWeights, sigma2: float = 1.0
    ) -> NoiseCovarianceModel:
        return attr.evolve(_normalized_model(M, N, weights), sigma2=sigma2)

    @property
    def num_subcarriers(self) -> int:
        return self.B.shape[0]

    @property
    def num_symbols(self) -> int:
        return self.Bbar.shape[0] // self.B.shape[0]

    def Cw3(self, N_R: int) -> np.ndarray:
        """Covariance of vec(Y3) noise, sigma^2 (I_NR (x) Bbar)."""
        return self.sigma2 * np.kron(np.eye(N_R), self.Bbar)

    def min_eigenvalue(self) -> float:
        return float(la.eigvalsh(self.Bbar)[0])


@functools.lru_cache(maxsize=16)
def _normalized_model(M: int, N: int, weights: InterferenceWeights) -> NoiseCovarianceModel:
    S = np.diag((-1.0) ** np.arange(M))
    B = build_B(M, weights.beta, weights.edge_sign)
    Aplus = build_Apm(M, weights.gamma, weights.delta, +1, weights.edge_sign)
    Aminus = build_Apm(M, weights.gamma, weights.delta, -1, weights.edge_sign)
    Bbar = assemble_Bbar(B, Aplus, Aminus, S, N)
    return NoiseCovarianceModel(
        readonly(B), readonly(Aplus), readonly(Aminus), readonly(S), readonly(Bbar)
    )


@attr.s(slots=True, frozen=True)
class WeightMatrix:
    """Cholesky factor of a (possibly ridged) Bbar, ready for repeated solves."""

    factor: tuple = attr.ib(eq=False, repr=False)
    # ridge added to the diagonal, 0 when Bbar was already positive definite
    ridge: float = attr.ib(default=0.0)

    @property
    def regularized(self) -> bool:
        return self.ridge > 0

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        """Bbar^-1 rhs."""
        return la.cho_solve(self.factor, rhs)


def regularize(Bbar: np.ndarray) -> tuple[np.ndarray, float]:
    """Shift Bbar so that its smallest eigenvalue is at least ``RIDGE``.

    :return: the (possibly shifted) matrix and the ridge that was added
    """
    smallest = float(la.eigvalsh(Bbar)[0])
    if smallest >= MIN_EIGENVALUE:
        return Bbar, 0.0
    ridge = abs(smallest) + RIDGE
    LOGGER.warning(
        "noise covariance has eigenvalue %.3e, adding a ridge of %.3e", smallest, ridge
    )
    return Bbar + ridge * np.eye(len(Bbar)), ridge


def factorize(Bbar: np.ndarray) -> WeightMatrix:
    matrix, ridge = regularize(np.asarray(Bbar))
    try:
        factor = la.cho_factor(matrix)
    except la.LinAlgError as exc:
        raise RankDeficiencyError(f"noise covariance is not positive definite: {exc}") from exc
    return WeightMatrix(factor, ridge)


def _as_weight(Bbar) -> WeightMatrix:
    return Bbar if isinstance(Bbar, WeightMatrix) else factorize(Bbar)


def _solve_normal(normal: np.ndarray, rhs: np.ndarray, what: str) -> np.ndarray:
    try:
        return la.solve(normal, rhs, assume_a="her")
    except la.LinAlgError as exc:
        raise RankDeficiencyError(f"{what} normal matrix is singular: {exc}") from exc


@attr.s(slots=True, frozen=True)
class PermutationMaps:
    # w2 = w3[perm23], where w2 = vec(unfold2 stacking) and w3 = vec(unfold3 stacking)
    perm23: np.ndarray = attr.ib(eq=False)
    # w1 = w3[perm13]
    perm13: np.ndarray = attr.ib(eq=False)

    @property
    def P23(self) -> np.ndarray:
        return np.eye(len(self.perm23))[self.perm23]

    @property
    def P13(self) -> np.ndarray:
        return np.eye(len(self.perm13))[self.perm13]

    def as_dict(self) -> dict[str, list[int]]:
        return {"perm23": self.perm23.tolist(), "perm13": self.perm13.tolist()}


def build_permutations(M: int, N: int, N_R: int) -> PermutationMaps:
    """Index maps between the vectorised unfoldings, found by tracking positions."""
    if min(M, N, N_R) < 1:
        raise ValueError("dimensions must be positive")
    position = np.arange(M * N * N_R).reshape((M, N, N_R), order="F")
    return PermutationMaps(
        perm23=readonly(vec(unfold2(position))), perm13=readonly(vec(unfold1(position)))
    )


def unfold2_to_unfold3(Y2: np.ndarray, perms: PermutationMaps, M: int, N: int) -> np.ndarray:
    """Y3 from Y2 through w3 = P23^T w2."""
    w3 = np.empty(len(perms.perm23), dtype=np.result_type(Y2))
    w3[perms.perm23] = vec(Y2)
    return unvec(w3, (M * N, len(w3) // (M * N)))


def wls_update_H(Y3: np.ndarray, C: np.ndarray, Gamma: np.ndarray, Bbar) -> np.ndarray:
    """Per-antenna GLS channel estimate with weight Bbar^-1.

    :param Bbar: the covariance (dense array) or a prepared :class:`WeightMatrix`
    """
    weight = _as_weight(Bbar)
    Phi = khatri_rao(C.T, Gamma)
    weighted = weight.solve(Phi)
    normal = Phi.conj().T @ weighted
    rhs = weighted.conj().T @ Y3
    return _solve_normal(normal, rhs, "channel").T


def wls_update_C(
    Y2: np.ndarray, H: np.ndarray, Gamma: np.ndarray, Bbar, perms: PermutationMaps
) -> np.ndarray:
    """GLS symbol estimate summed over receive antennas.

    ``vec(Y^(r)) = (I_N (x) Gamma diag(H[r])) vec(C)``, each antenna weighted by Bbar^-1.
    """
    weight = _as_weight(Bbar)
    M = Gamma.shape[0]
    rows = Gamma.shape[1]
    N = Y2.shape[1]
    Y3 = unfold2_to_unfold3(Y2, perms, M, N)
    size = rows * N
    normal = np.zeros((size, size), dtype=complex)
    rhs = np.zeros(size, dtype=complex)
    identity = np.eye(N)
    for r in range(H.shape[0]):
        Psi = np.kron(identity, Gamma * H[r][None, :])
        weighted = weight.solve(Psi)
        normal += Psi.conj().T @ weighted
        rhs += weighted.conj().T @ Y3[:, r]
    return unvec(_solve_normal(normal, rhs, "symbol"), (rows, N))


def build_Cw1(Bbar: np.ndarray, perm13: np.ndarray, N_R: int, sigma2: float = 1.0) -> np.ndarray:
    """Covariance of vec(Y1) noise, P13 (sigma^2 I_NR (x) Bbar) P13^T."""
    Cw3 = sigma2 * np.kron(np.eye(N_R), Bbar)
    return Cw3[np.ix_(perm13, perm13)]


def empirical_noise_cov(
    filt: PrototypeFilter,
    M: int,
    N: int,
    trials: int,
    seed=None,
    *,
    sigma2: float = 1.0,
    num_rx: int = 1,
    batch: int = 2000,
) -> np.ndarray:
    """Sample covariance of the AFB output for white time-domain noise.

    The returned matrix covers ``vec(Y3)``, i.e. the per-antenna column-major
    vectors stacked over ``num_rx`` independent antennas.
    """
    if trials < 1000:
        raise ValueError(f"empirical covariance needs at least 1000 trials, got {trials}")
    rng = np.random.default_rng(seed)
    length = sfb_length(M, N, filt.length)
    size = M * N * num_rx
    accumulator = np.zeros((size, size), dtype=complex)
    done = 0
    while done < trials:
        count = min(batch, trials - done)
        shape = (count * num_rx, length)
        noise = np.sqrt(sigma2 / 2) * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))
        outputs = afb_demodulate(TimeSignal(noise), filt, M, N, fast=True)
        # vec(Y3) runs over m, then n, then r
        samples = outputs.reshape(count, num_rx, M, N).transpose(0, 1, 3, 2).reshape(count, size)
        accumulator += samples.T @ samples.conj()
        done += count
    return accumulator / trials


__all__ = (
    "NoiseCovarianceModel",
    "PermutationMaps",
    "WeightMatrix",
    "assemble_Bbar",
    "build_Apm",
    "build_B",
    "build_Cw1",
    "build_permutations",
    "empirical_noise_cov",
    "factorize",
    "regularize",
    "unfold2_to_unfold3",
    "wls_update_C",
    "wls_update_H",
)
