"""Informed iterations with both half-steps weighted by the AFB-noise covariance.

The covariance is dense, (MN) x (MN): only use this on small frames.
"""
from . import informed


def make():
    config = informed.make()
    config["options"]["weighted"] = True
    config["components"]["als"]["rules"] = [
        "update_c_weighted",
        "resolve_scaling",
        "detect",
        "revirtualize",
        "update_h_weighted",
        "cost",
    ]
    return config
