__all__ = ("informed", "structure_blind", "weighted")

from . import informed, structure_blind, weighted
