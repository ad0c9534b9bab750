from __future__ import annotations

from collections.abc import Mapping
from typing import TYPE_CHECKING, Any

import numpy as np

from ..tensor import ReceivedTensor

if TYPE_CHECKING:
    from ..als import ScalingFix
    from ..interference import StructMatrices
    from ..noisecov import PermutationMaps, WeightMatrix
    from ..prototype import InterferenceWeights
    from ..receiver import Preamble
    from ..waveform import Constellation


class StateAls:
    """Everything one run of the alternating estimator reads and updates."""

    def __init__(
        self,
        tensor: ReceivedTensor,
        Gamma: np.ndarray,
        H: np.ndarray,
        preamble: Preamble,
        constellation: Constellation,
        options: Mapping[str, Any],
        *,
        weights: InterferenceWeights | None = None,
        structs: StructMatrices | None = None,
        system: str = "fbmc",
    ):
        self.tensor = tensor
        # unfoldings are fixed for the whole run
        self.Y2 = tensor.unfold2()
        self.Y3 = tensor.unfold3()
        self.Gamma = Gamma
        self.H = H
        self.C: np.ndarray | None = None
        # last hard decisions, stacked (M N_T) x N; real for FBMC, QAM for OFDM
        self.D: np.ndarray | None = None
        self.preamble = preamble
        self.constellation = constellation
        self.options = options
        self.weights = weights
        self.structs = structs
        self.system = system
        self.weight: WeightMatrix | None = None
        self.perms: PermutationMaps | None = None
        self.scaling: ScalingFix | None = None
        self.iteration = 0
        self.informed_phase = False
        self.cost_trace: list[float] = []

    @property
    def num_subcarriers(self) -> int:
        return self.Gamma.shape[0]

    @property
    def num_tx(self) -> int:
        return self.Gamma.shape[1] // self.Gamma.shape[0]
