"""
Least-squares building blocks of the alternating estimator.

Every update solves one factor of ``Y = [[Gamma, C^T, H]]`` exactly with the
other factor fixed, through an SVD-based pseudo-inverse that refuses to work
on numerically rank-deficient systems.
"""
from __future__ import annotations

import logging

import attr
import numpy as np
import scipy.linalg as la

from .tensor import khatri_rao
from .waveform import Constellation

LOGGER = logging.getLogger(__name__)

# Singular values below PINV_RTOL * s_max count as zero
PINV_RTOL = 1e-10
# Minimum preamble energy per CPD column for the scaling fit
SCALING_MIN_ENERGY = 1e-9


class RankDeficiencyError(ValueError):
    """A least-squares system of the estimator has no unique solution."""


def lstsq_pinv(A: np.ndarray, B: np.ndarray, what: str = "system matrix") -> np.ndarray:
    """A^+ B for a full column rank ``A``.

    :raises RankDeficiencyError: if ``A`` has fewer rows than columns or a
        singular value below ``PINV_RTOL`` times the largest one
    """
    rows, cols = A.shape
    if rows < cols:
        raise RankDeficiencyError(
            f"{what} is {rows}x{cols}: fewer equations than unknowns"
        )
    u, s, vh = la.svd(A, full_matrices=False)
    if s[0] == 0:
        raise RankDeficiencyError(f"{what} is identically zero")
    if s[-1] < PINV_RTOL * s[0]:
        raise RankDeficiencyError(
            f"{what} is rank deficient: smallest singular value {s[-1]:.3e} "
            f"is below {PINV_RTOL:g} x {s[0]:.3e}"
        )
    return vh.conj().T @ ((u.conj().T @ B) / s[:, None])


def _check_columns(factor: np.ndarray, label: str) -> None:
    dead = np.flatnonzero(~np.any(factor, axis=0))
    if dead.size:
        raise RankDeficiencyError(f"{label} has all-zero columns {dead.tolist()}")


def als_update_C(Y2: np.ndarray, H: np.ndarray, Gamma: np.ndarray) -> np.ndarray:
    """C = (H kr Gamma)^+ Y2."""
    _check_columns(H, "channel factor H")
    return lstsq_pinv(khatri_rao(H, Gamma), Y2, "H kr Gamma")


def als_update_H(Y3: np.ndarray, C: np.ndarray, Gamma: np.ndarray) -> np.ndarray:
    """H = [(C^T kr Gamma)^+ Y3]^T."""
    _check_columns(C.T, "symbol factor C^T")
    return lstsq_pinv(khatri_rao(C.T, Gamma), Y3, "C^T kr Gamma").T


@attr.s(slots=True, frozen=True)
class ScalingFix:
    # alpha_k, one per CPD column (row of C)
    alpha: np.ndarray = attr.ib(eq=False)
    # diag(alpha) C
    C: np.ndarray = attr.ib(eq=False)

    def apply_to_H(self, H: np.ndarray) -> np.ndarray:
        """H diag(alpha)^-1, keeping (H kr Gamma) C unchanged."""
        return H / self.alpha[None, :]


def resolve_scaling(C_hat: np.ndarray, known: np.ndarray, n_pre: int | None = None) -> ScalingFix:
    """Fit one complex scale per row of ``C_hat`` to the known preamble.

    ``alpha_k = sum_q conj(c_kq) k_kq / sum_q |c_kq|^2`` over the preamble
    columns, then ``C_fixed = diag(alpha) C_hat``.

    :param known: known pseudo-symbols of the preamble, shape (rows, n_pre)
    :raises RankDeficiencyError: if a row of the estimate carries no energy
        over the preamble
    """
    known = np.asarray(known)
    if n_pre is None:
        n_pre = known.shape[1]
    if n_pre < 1:
        raise ValueError("scaling needs at least one preamble column")
    estimate = C_hat[:, :n_pre]
    energy = np.sum(np.abs(estimate) ** 2, axis=1)
    weak = np.flatnonzero(energy < SCALING_MIN_ENERGY)
    if weak.size:
        raise RankDeficiencyError(
            f"cannot resolve scaling: no preamble energy in rows {weak.tolist()}"
        )
    alpha = np.sum(estimate.conj() * known[:, :n_pre], axis=1) / energy
    if not np.all(np.abs(alpha) > 0):
        raise RankDeficiencyError("cannot resolve scaling: preamble is orthogonal to the estimate")
    LOGGER.debug(
        "scaling resolved: |alpha| in [%.3g, %.3g]", np.abs(alpha).min(), np.abs(alpha).max()
    )
    return ScalingFix(alpha, alpha[:, None] * C_hat)


def decide(
    C: np.ndarray,
    constellation: Constellation,
    system: str = "fbmc",
    known: np.ndarray | None = None,
) -> np.ndarray:
    """Hard decisions on a stacked C, with the leading columns forced to ``known``.

    FBMC frames are sliced on the real part; CP-OFDM frames on the QAM grid.
    """
    if system == "ofdm":
        decisions = constellation.decide(C)
    elif system == "fbmc":
        decisions = constellation.slice(np.real(C))
    else:
        raise ValueError(f"unknown system {system!r}, expected 'fbmc' or 'ofdm'")
    if known is not None:
        decisions[:, : known.shape[1]] = known
    return decisions
