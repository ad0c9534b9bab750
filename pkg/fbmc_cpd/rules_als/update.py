"""Plain least-squares half-steps."""
from ..als import als_update_C, als_update_H
from .state_als import StateAls


def update_c(state: StateAls) -> None:
    state.C = als_update_C(state.Y2, state.H, state.Gamma)


def update_h(state: StateAls) -> None:
    state.H = als_update_H(state.Y3, state.C, state.Gamma)
