__all__ = (
    "StateAls",
    "cost",
    "detect",
    "resolve_scaling",
    "revirtualize",
    "update_c",
    "update_c_weighted",
    "update_h",
    "update_h_weighted",
)

from .cost import cost
from .informed import detect, revirtualize
from .scaling import resolve_scaling
from .state_als import StateAls
from .update import update_c, update_h
from .weighted import update_c_weighted, update_h_weighted
