"""Steps that project the symbol estimate on the alphabet and rebuild the pseudo-symbols."""
from ..als import decide
from ..interference import pseudo_symbols
from .state_als import StateAls


def detect(state: StateAls) -> None:
    state.D = decide(state.C, state.constellation, state.system, state.preamble.data)


def revirtualize(state: StateAls) -> None:
    if state.system == "ofdm":
        state.C = state.D.astype(complex)
        return
    M = state.num_subcarriers
    N = state.D.shape[1]
    frames = state.D.reshape(state.num_tx, M, N)
    state.C = pseudo_symbols(frames, state.weights, state.structs).reshape(-1, N)
