"""Informed alternating least squares.

After ``n_simple_iters`` plain iterations every C update is followed by a
hard decision and a rebuild of the pseudo-symbols, which replaces the
least-squares C before the channel update.
"""
from . import structure_blind


def make():
    config = structure_blind.make()
    config["options"]["informed"] = True
    config["components"]["als"]["rules"] = [
        "update_c",
        "resolve_scaling",
        "detect",
        "revirtualize",
        "update_h",
        "cost",
    ]
    return config
