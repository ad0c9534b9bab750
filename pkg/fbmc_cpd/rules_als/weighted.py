"""Half-steps weighted by the inverse AFB-noise covariance."""
from ..noisecov import wls_update_C, wls_update_H
from .state_als import StateAls


def _require_weight(state: StateAls) -> None:
    if state.weight is None or state.perms is None:
        raise ValueError("weighted updates need the noise covariance of the frame")


def update_c_weighted(state: StateAls) -> None:
    _require_weight(state)
    state.C = wls_update_C(state.Y2, state.H, state.Gamma, state.weight, state.perms)


def update_h_weighted(state: StateAls) -> None:
    _require_weight(state)
    state.H = wls_update_H(state.Y3, state.C, state.Gamma, state.weight)
