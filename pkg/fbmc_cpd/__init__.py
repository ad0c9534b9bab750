"""Link-level simulation of FBMC/OQAM with constrained-CPD receivers"""
__all__ = (
    "AlsConfig",
    "JointEstimator",
    "ModulationConfig",
    "Scenario",
    "compute_weights",
    "design_prototype",
    "joint_estimate",
    "load_scenario",
    "run_scenario",
)
__version__ = "0.1.0"

from .harness import Scenario, load_scenario, run_scenario
from .prototype import compute_weights, design_prototype
from .receiver import AlsConfig, JointEstimator, joint_estimate
from .waveform import ModulationConfig
