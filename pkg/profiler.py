"""A script for profiling.

To generate and read results:
  - `tox -e profile`
  - `firefox .tox/prof/output.svg`
"""
import attr

from fbmc_cpd import load_scenario
from fbmc_cpd.harness import run_trial

scenario = attr.evolve(load_scenario("peda"), trials_per_point=1)

# Run this a few times to emphasize over imports and other overhead above
for trial in range(10):
    run_trial(scenario, 20.0, trial)
