"""Plain alternating least squares.

The finite alphabet and the interference structure are only used once the
loop has finished: the scaling is then fixed from the preamble and the
symbols are sliced.
"""


def make():
    return {
        "options": {
            "informed": False,  # no detection / re-virtualisation inside the loop
            "max_iters": 200,
            "tol": 1e-6,  # relative cost decrease that stops the loop
            "n_simple_iters": 2,
            "init": "random",  # or "khatri_rao" (SIMO only)
            "seed": None,  # seed of the random channel initialisation
        },
        "components": {"als": {"rules": ["update_c", "update_h", "cost"]}},
    }
