"""
Joint channel estimation and data detection.

:class:`JointEstimator` runs the alternating least-squares loop over the
received tensor; the steps of one iteration are rules of :class:`AlsCore`
selected by a preset (``structure_blind``, ``informed`` or ``weighted``).
The non-iterative baselines and the error metrics live here as well.
"""
from __future__ import annotations

from collections.abc import Iterable, Mapping
import logging
from typing import Any

import attr
import numpy as np

from . import presets
from .als import (
    RankDeficiencyError,
    ScalingFix,
    als_update_C,
    als_update_H,
    decide,
    resolve_scaling,
)
from .als_core import AlsCore
from .interference import StructMatrices, build_struct_matrices, pseudo_symbols
from .noisecov import NoiseCovarianceModel, build_permutations, factorize
from .prototype import InterferenceWeights
from .rules_als import StateAls
from .rules_als import detect as detect_rule
from .rules_als import resolve_scaling as scaling_rule
from .tensor import ReceivedTensor, cpd_cost, kr_factorize
from .waveform import Constellation, ModulationConfig, OqamFrame, qam_to_oqam

LOGGER = logging.getLogger(__name__)

# Cost relative to ||Y|| below which the fit is exact
EXACT_FIT = 1e-12

MODES = ("structure_blind", "informed", "weighted", "training_only", "perfect_csi")

_PRESETS = {
    "structure_blind": presets.structure_blind.make(),
    "informed": presets.informed.make(),
    "weighted": presets.weighted.make(),
}


@attr.s(slots=True, frozen=True)
class AlsConfig:
    max_iters: int = attr.ib(default=200)
    # relative cost decrease that stops the loop
    tol: float = attr.ib(default=1e-6)
    # plain iterations before the informed steps start
    n_simple_iters: int = attr.ib(default=2)
    mode: str = attr.ib(default="informed")
    seed: int | None = attr.ib(default=None)
    init: str = attr.ib(default="random")

    @max_iters.validator
    def _check_max_iters(self, attribute, value) -> None:
        if value < 1:
            raise ValueError(f"max_iters must be >= 1, got {value}")

    @tol.validator
    def _check_tol(self, attribute, value) -> None:
        if not value > 0:
            raise ValueError(f"tol must be positive, got {value}")

    @n_simple_iters.validator
    def _check_simple(self, attribute, value) -> None:
        if value < 1:
            raise ValueError(f"n_simple_iters must be >= 1, got {value}")

    @mode.validator
    def _check_mode(self, attribute, value) -> None:
        if value not in MODES:
            raise ValueError(f"unknown receiver mode {value!r}, expected one of {MODES}")

    @init.validator
    def _check_init(self, attribute, value) -> None:
        if value not in ("random", "khatri_rao"):
            raise ValueError(f"unknown initialisation {value!r}")

    def options(self) -> dict[str, Any]:
        """Estimator options overriding the preset defaults."""
        return {
            "max_iters": self.max_iters,
            "tol": self.tol,
            "n_simple_iters": self.n_simple_iters,
            "seed": self.seed,
            "init": self.init,
        }


@attr.s(slots=True, frozen=True)
class Preamble:
    # known decisions of the first n_pre columns, stacked (M N_T) x n_pre
    data: np.ndarray = attr.ib(eq=False)
    # known pseudo-symbols of those columns
    symbols: np.ndarray = attr.ib(eq=False)
    # leading columns whose pseudo-symbols do not depend on the payload
    exact: int = attr.ib()

    @property
    def n_pre(self) -> int:
        return self.data.shape[1]

    def frames(self, num_tx: int) -> np.ndarray:
        """The known data as (N_T, M, n_pre)."""
        return self.data.reshape(num_tx, -1, self.n_pre)


def make_preamble(
    modulation: ModulationConfig,
    weights: InterferenceWeights | None = None,
    seed=0,
    system: str = "fbmc",
) -> Preamble:
    """Pseudo-random known symbols at the start of the frame.

    For FBMC the first ``preamble_len`` symbol slots carry random PAM levels;
    their pseudo-symbols are computed with the payload taken as zero, which
    is exact for all but the last preamble column. For CP-OFDM the preamble
    covers the same air time, ``preamble_len / 2`` OFDM symbols of QAM.
    """
    rng = np.random.default_rng(seed)
    constellation = modulation.constellation
    M, N_T = modulation.num_subcarriers, modulation.num_tx
    if system == "fbmc":
        if weights is None:
            raise ValueError("an FBMC preamble needs the interference weights")
        n_pre = modulation.preamble_len
        data = constellation.random_pam(rng, (N_T, M, n_pre))
        padded = np.concatenate([data, np.zeros((N_T, M, 1))], axis=-1)
        symbols = pseudo_symbols(padded, weights)[..., :n_pre]
        exact = n_pre - 1
    elif system == "ofdm":
        n_pre = modulation.preamble_len // 2
        data = constellation.random_qam(rng, (N_T, M, n_pre))
        symbols = data
        exact = n_pre
    else:
        raise ValueError(f"unknown system {system!r}, expected 'fbmc' or 'ofdm'")
    return Preamble(data.reshape(-1, n_pre), symbols.reshape(-1, n_pre), exact)


@attr.s(slots=True, frozen=True)
class ReceiverReport:
    # N_R x (M N_T)
    H_hat: np.ndarray = attr.ib(eq=False)
    D_hat: OqamFrame = attr.ib(eq=False)
    # final symbol factor, (M N_T) x N
    C_hat: np.ndarray = attr.ib(eq=False, repr=False)
    iterations: int = attr.ib()
    cost_trace: tuple[float, ...] = attr.ib(converter=tuple, repr=False)
    converged: bool = attr.ib()
    mode: str = attr.ib(default="informed")
    # per-column scale applied to C (None when no fit was needed)
    scaling: np.ndarray | None = attr.ib(default=None, eq=False, repr=False)
    # True when the noise covariance had to be ridged
    regularized: bool = attr.ib(default=False)


def _mode_name(options: Mapping) -> str:
    if options.get("weighted"):
        return "weighted"
    return "informed" if options.get("informed") else "structure_blind"


def _as_frame(decisions: np.ndarray, num_tx: int, system: str) -> OqamFrame:
    if system == "ofdm":
        return qam_to_oqam(decisions.reshape(num_tx, -1, decisions.shape[1]))
    return OqamFrame.from_stacked(decisions, num_tx)


class JointEstimator:
    def __init__(self, config: str | Mapping = "informed", options_update: Mapping | None = None):
        """Alternating least-squares receiver.

        :param config: name of a preset or a pre-defined dictionary
        :param options_update: dictionary merged into ``config["options"]``
        """
        self.core = AlsCore()
        if options_update and not isinstance(options_update, Mapping):
            raise TypeError(f"options_update should be a mapping: {options_update}")
        self.configure(config, options_update=options_update)

    def __repr__(self) -> str:
        return f"{self.__class__.__module__}.{self.__class__.__name__}()"

    def __getitem__(self, name: str) -> Any:
        return {"als": self.core}[name]

    def configure(
        self, presets: str | Mapping, options_update: Mapping | None = None
    ) -> JointEstimator:
        """Load a preset (or a config dictionary) and enable exactly its rules."""
        if isinstance(presets, str):
            if presets not in _PRESETS:
                raise KeyError(f"Wrong fbmc-cpd preset '{presets}', check name")
            config = _PRESETS[presets]
        else:
            config = presets

        if not config:
            raise ValueError("Wrong fbmc-cpd config, can't be empty")

        options = dict(config.get("options", {}) or {})
        if options_update:
            options.update(options_update)
        self.options = options

        for name, component in config.get("components", {}).items():
            rules = component.get("rules", None)
            if rules:
                self[name].ruler.enableOnly(rules)
        return self

    def get_all_rules(self) -> list[str]:
        return self.core.ruler.get_all_rules()

    def get_active_rules(self) -> list[str]:
        return self.core.ruler.get_active_rules()

    def enable(self, names: str | Iterable[str], ignoreInvalid: bool = False) -> JointEstimator:
        """Enable list or rules. (chainable)"""
        self.core.ruler.enable(names, ignoreInvalid)
        return self

    def disable(self, names: str | Iterable[str], ignoreInvalid: bool = False) -> JointEstimator:
        """Disable list or rules. (chainable)"""
        self.core.ruler.disable(names, ignoreInvalid)
        return self

    def _initial_channel(self, tensor: ReceivedTensor, num_tx: int) -> np.ndarray:
        M, _, N_R = tensor.shape
        rng = np.random.default_rng(self.options.get("seed"))
        shape = (N_R, M * num_tx)
        H = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)
        init = self.options.get("init", "random")
        if init == "khatri_rao":
            if num_tx != 1:
                LOGGER.warning("Khatri-Rao initialisation needs a single transmit antenna")
                return H
            factors = kr_factorize(tensor.unfold1(), N_R)
            usable = np.ones(M, dtype=bool)
            usable[list(factors.flagged)] = False
            H[:, usable] = factors.H[:, usable]
        elif init != "random":
            raise ValueError(f"unknown initialisation {init!r}")
        return H

    def estimate(
        self,
        tensor: ReceivedTensor,
        preamble: Preamble,
        Gamma: np.ndarray,
        constellation: Constellation | None = None,
        *,
        weights: InterferenceWeights | None = None,
        structs: StructMatrices | None = None,
        system: str = "fbmc",
    ) -> ReceiverReport:
        """Run the loop until the cost settles or ``max_iters`` is reached.

        Non-convergence is reported, not raised.

        :raises RankDeficiencyError: if a least-squares step has no unique solution
        """
        if "cost" not in self.get_active_rules():
            raise ValueError("the estimator chain needs the 'cost' rule")
        constellation = constellation or Constellation()
        options = self.options
        M, N, N_R = tensor.shape
        num_tx = Gamma.shape[1] // M
        if system == "fbmc":
            if weights is None:
                raise ValueError("FBMC estimation needs the interference weights")
            structs = structs or build_struct_matrices(M, N, weights.edge_sign)

        state = StateAls(
            tensor,
            Gamma,
            self._initial_channel(tensor, num_tx),
            preamble,
            constellation,
            options,
            weights=weights,
            structs=structs,
            system=system,
        )
        if options.get("weighted"):
            if system != "fbmc":
                raise ValueError("weighted updates are only defined for FBMC frames")
            model = NoiseCovarianceModel.build(M, N, weights)
            state.weight = factorize(model.Bbar)
            state.perms = build_permutations(M, N, N_R)

        informed = bool(options.get("informed"))
        n_simple = options["n_simple_iters"]
        tol = options["tol"]
        floor = EXACT_FIT * tensor.norm
        converged = False
        for iteration in range(1, options["max_iters"] + 1):
            state.iteration = iteration
            state.informed_phase = informed and iteration > n_simple
            self.core.process(state)
            if informed and not state.informed_phase:
                continue
            trace = state.cost_trace
            if trace[-1] <= floor:
                converged = True
                break
            if len(trace) >= 2 and abs(trace[-2] - trace[-1]) <= tol * trace[-2]:
                converged = True
                break
        if not converged:
            LOGGER.debug("no convergence after %d iterations", state.iteration)

        scaling_rule(state)
        if not informed or state.D is None:
            detect_rule(state)

        return ReceiverReport(
            H_hat=state.H,
            D_hat=_as_frame(state.D, num_tx, system),
            C_hat=state.C,
            iterations=state.iteration,
            cost_trace=state.cost_trace,
            converged=converged,
            mode=_mode_name(options),
            scaling=state.scaling.alpha,
            regularized=bool(state.weight is not None and state.weight.regularized),
        )


def joint_estimate(
    tensor: ReceivedTensor,
    cfg: AlsConfig,
    preamble: Preamble,
    Gamma: np.ndarray,
    weights: InterferenceWeights | None = None,
    structs: StructMatrices | None = None,
    *,
    constellation: Constellation | None = None,
    system: str = "fbmc",
) -> ReceiverReport:
    """Estimate H and detect D with the receiver selected by ``cfg.mode``."""
    if cfg.mode == "training_only":
        return training_only_estimate(tensor, preamble, Gamma, constellation, system=system)
    if cfg.mode == "perfect_csi":
        raise ValueError(
            "perfect-CSI equalisation needs the true channel: use equalize_perfect_csi"
        )
    estimator = JointEstimator(cfg.mode, cfg.options())
    return estimator.estimate(
        tensor, preamble, Gamma, constellation, weights=weights, structs=structs, system=system
    )


def training_only_estimate(
    tensor: ReceivedTensor,
    preamble: Preamble,
    Gamma: np.ndarray,
    constellation: Constellation | None = None,
    *,
    system: str = "fbmc",
) -> ReceiverReport:
    """Channel from the preamble columns alone, then one symbol update and detection.

    Every preamble column enters the channel fit, including the trailing one
    whose pseudo-symbols are only approximate because they see the payload.
    The interference it carries is left in the estimate, so this baseline
    floors at high SNR.
    """
    constellation = constellation or Constellation()
    num_tx = Gamma.shape[1] // Gamma.shape[0]
    known = tensor.columns(preamble.n_pre)
    H = als_update_H(known.unfold3(), preamble.symbols, Gamma)
    C = als_update_C(tensor.unfold2(), H, Gamma)
    decisions = decide(C, constellation, system, preamble.data)
    return ReceiverReport(
        H_hat=H,
        D_hat=_as_frame(decisions, num_tx, system),
        C_hat=C,
        iterations=0,
        cost_trace=[cpd_cost(tensor, Gamma, C, H)],
        converged=True,
        mode="training_only",
    )


def equalize_perfect_csi(
    tensor: ReceivedTensor,
    H_true: np.ndarray,
    Gamma: np.ndarray,
    constellation: Constellation | None = None,
    *,
    system: str = "fbmc",
) -> OqamFrame:
    """One symbol update with the true channel followed by detection.

    Takes no interference weights: with H known, neither the symbol update nor
    the decision on Re{C} uses the frame model.
    """
    constellation = constellation or Constellation()
    num_tx = Gamma.shape[1] // Gamma.shape[0]
    C = als_update_C(tensor.unfold2(), H_true, Gamma)
    return _as_frame(decide(C, constellation, system), num_tx, system)


def nmse(H_hat: np.ndarray, H_true: np.ndarray) -> float:
    """||H_hat - H||_F^2 / ||H||_F^2."""
    H_true = np.asarray(H_true)
    reference = np.linalg.norm(H_true) ** 2
    if reference == 0:
        raise ValueError("NMSE is undefined for an all-zero reference channel")
    return float(np.linalg.norm(np.asarray(H_hat) - H_true) ** 2 / reference)


def ber(
    D_hat: OqamFrame | np.ndarray,
    D_true: OqamFrame | np.ndarray,
    preamble_len: int = 0,
    constellation: Constellation | None = None,
) -> float:
    """Fraction of wrong Gray-coded bits over the payload columns."""
    constellation = constellation or Constellation()
    estimate = D_hat.data if isinstance(D_hat, OqamFrame) else np.asarray(D_hat)
    truth = D_true.data if isinstance(D_true, OqamFrame) else np.asarray(D_true)
    if estimate.shape != truth.shape:
        raise ValueError(f"frames differ in shape: {estimate.shape} vs {truth.shape}")
    payload = (Ellipsis, slice(preamble_len, None))
    errors = constellation.bits(estimate[payload]) != constellation.bits(truth[payload])
    if errors.size == 0:
        raise ValueError("no payload columns to count")
    return float(errors.mean())


__all__ = (
    "AlsConfig",
    "JointEstimator",
    "Preamble",
    "RankDeficiencyError",
    "ReceiverReport",
    "ScalingFix",
    "als_update_C",
    "als_update_H",
    "ber",
    "detect",
    "equalize_perfect_csi",
    "joint_estimate",
    "make_preamble",
    "nmse",
    "resolve_scaling",
    "training_only_estimate",
)
