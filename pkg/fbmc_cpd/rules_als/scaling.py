import logging

from ..als import resolve_scaling as fit_scaling
from .state_als import StateAls

LOGGER = logging.getLogger(__name__)


def resolve_scaling(state: StateAls) -> None:
    """Remove the per-column scaling ambiguity once, using the preamble."""
    if state.scaling is not None:
        return
    preamble = state.preamble
    fix = fit_scaling(state.C, preamble.symbols, preamble.exact)
    state.C = fix.C
    state.H = fix.apply_to_H(state.H)
    state.scaling = fix
    LOGGER.debug("iteration %d: scaling resolved", state.iteration)
