"""
class AlsCore

Runs the rules of one estimator iteration. The plain iterations use the
``simple`` chain, the informed ones the ``informed`` chain.
"""
from __future__ import annotations

from .ruler import RuleFunc, Ruler
from .rules_als import (
    StateAls,
    cost,
    detect,
    resolve_scaling,
    revirtualize,
    update_c,
    update_c_weighted,
    update_h,
    update_h_weighted,
)

_BOTH = {"alt": ["simple", "informed"]}
_INFORMED = {"alt": ["informed"]}

_rules: list[tuple[str, RuleFunc, dict]] = [
    ("update_c", update_c, _BOTH),
    ("update_c_weighted", update_c_weighted, _BOTH),
    ("resolve_scaling", resolve_scaling, _INFORMED),
    ("detect", detect, _INFORMED),
    ("revirtualize", revirtualize, _INFORMED),
    ("update_h", update_h, _BOTH),
    ("update_h_weighted", update_h_weighted, _BOTH),
    ("cost", cost, _BOTH),
]


class AlsCore:
    def __init__(self):
        self.ruler = Ruler()
        for name, rule, options in _rules:
            self.ruler.push(name, rule, options)

    def process(self, state: StateAls) -> None:
        """Executes one iteration of the active chain."""
        chain = "informed" if state.informed_phase else "simple"
        for rule in self.ruler.getRules(chain):
            rule(state)
