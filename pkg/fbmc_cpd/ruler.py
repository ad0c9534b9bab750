"""
class Ruler

The ordered, named steps of one estimator iteration. Each step belongs to one
or more chains (the iteration phases): a rule registered with
``{"alt": ["simple", "informed"]}`` runs in the plain and in the informed
iterations, ``{"alt": ["informed"]}`` only once the estimator has switched to
informed steps. The chain ``""`` holds every enabled rule.

You will not need this class directly unless you add your own steps; presets
select rules through :meth:`JointEstimator.configure`.
"""
from __future__ import annotations

from collections.abc import Callable, Iterable, Mapping

import attr

# rule(state: StateAls) -> None
RuleFunc = Callable


@attr.s(slots=True)
class Rule:
    name: str = attr.ib()
    fn: RuleFunc = attr.ib(repr=False)
    alt: list[str] = attr.ib(factory=list)
    enabled: bool = attr.ib(default=True)


def _chains_of(options: Mapping | None) -> list[str]:
    return list((options or {}).get("alt", []))


class Ruler:
    def __init__(self):
        self._rules: list[Rule] = []
        # chain name -> active functions, rebuilt lazily after every edit
        self._chains: dict[str, list[RuleFunc]] | None = None

    def _find(self, name: str) -> int:
        for index, rule in enumerate(self._rules):
            if rule.name == name:
                return index
        raise KeyError(f"Estimator rule not found: {name}")

    def _insert(self, index: int, name: str, fn: RuleFunc, options: Mapping | None) -> None:
        if any(rule.name == name for rule in self._rules):
            raise ValueError(f"Estimator rule already registered: {name}")
        self._rules.insert(index, Rule(name, fn, _chains_of(options)))
        self._chains = None

    def _build_chains(self) -> dict[str, list[RuleFunc]]:
        active = [rule for rule in self._rules if rule.enabled]
        chains: dict[str, list[RuleFunc]] = {"": [rule.fn for rule in active]}
        for rule in active:
            for chain in rule.alt:
                chains.setdefault(chain, [])
        for chain, fns in chains.items():
            if chain:
                fns.extend(rule.fn for rule in active if chain in rule.alt)
        return chains

    def at(self, ruleName: str, fn: RuleFunc, options=None) -> None:
        """Replace the function and chains of a rule, keeping its position.

        :raises: KeyError if name not found
        """
        rule = self._rules[self._find(ruleName)]
        rule.fn = fn
        rule.alt = _chains_of(options)
        self._chains = None

    def before(self, beforeName: str, ruleName: str, fn: RuleFunc, options=None) -> None:
        """Insert a rule in front of ``beforeName``.

        :raises: KeyError if name not found
        """
        self._insert(self._find(beforeName), ruleName, fn, options)

    def after(self, afterName: str, ruleName: str, fn: RuleFunc, options=None) -> None:
        """Insert a rule behind ``afterName``.

        :raises: KeyError if name not found
        """
        self._insert(self._find(afterName) + 1, ruleName, fn, options)

    def push(self, ruleName: str, fn: RuleFunc, options=None) -> None:
        self._insert(len(self._rules), ruleName, fn, options)

    def _switch(self, names: str | Iterable[str], value: bool, ignoreInvalid: bool) -> list[str]:
        known = {rule.name: rule for rule in self._rules}
        switched = []
        for name in [names] if isinstance(names, str) else names:
            if name not in known:
                if ignoreInvalid:
                    continue
                raise KeyError(f"Rules manager: invalid rule name {name}")
            known[name].enabled = value
            switched.append(name)
        self._chains = None
        return switched

    def enable(self, names: str | Iterable[str], ignoreInvalid: bool = False) -> list[str]:
        """Enable rules with given names.

        :raises: KeyError if name not found and not ignoreInvalid
        :return: list of found rule names
        """
        return self._switch(names, True, ignoreInvalid)

    def enableOnly(self, names: str | Iterable[str], ignoreInvalid: bool = False) -> list[str]:
        """Enable exactly the given rules."""
        for rule in self._rules:
            rule.enabled = False
        return self.enable(names, ignoreInvalid)

    def disable(self, names: str | Iterable[str], ignoreInvalid: bool = False) -> list[str]:
        """Disable rules with given names.

        :raises: KeyError if name not found and not ignoreInvalid
        :return: list of found rule names
        """
        return self._switch(names, False, ignoreInvalid)

    def getRules(self, chainName: str) -> list[RuleFunc]:
        """Active functions of a chain, in rule order; unknown chains are empty."""
        if self._chains is None:
            self._chains = self._build_chains()
        return self._chains.get(chainName, [])

    def get_all_rules(self) -> list[str]:
        return [rule.name for rule in self._rules]

    def get_active_rules(self) -> list[str]:
        return [rule.name for rule in self._rules if rule.enabled]
