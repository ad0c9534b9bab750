import logging

from ..tensor import cpd_cost
from .state_als import StateAls

LOGGER = logging.getLogger(__name__)


def cost(state: StateAls) -> None:
    value = cpd_cost(state.tensor, state.Gamma, state.C, state.H)
    state.cost_trace.append(value)
    LOGGER.debug("iteration %d: cost %.6e", state.iteration, value)
