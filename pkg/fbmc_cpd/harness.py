"""
Monte Carlo link-level experiments.

A scenario fixes the waveform, channel profile, SNR grid and receivers to
compare. Every (SNR, trial) pair draws its data, channel and noise from
``SeedSequence([seed, trial])``, so all receivers of a trial see the same
realisation and the same trial index gives the same channel at every SNR.
"""
from __future__ import annotations

from collections.abc import Iterable, Sequence
from concurrent.futures import ProcessPoolExecutor
import csv
import functools
import logging
import math
from pathlib import Path

import attr
import numpy as np

from .als import RankDeficiencyError
from .channel import (
    ChannelProfile,
    NoiseSpec,
    apply_channel,
    draw_channel,
    load_profile,
    snr_to_sigma2,
)
from .interference import build_struct_matrices, interference_histogram, virtualize
from .prototype import compute_weights, design_prototype
from .receiver import (
    AlsConfig,
    ber,
    equalize_perfect_csi,
    joint_estimate,
    make_preamble,
    nmse,
)
from .tensor import ReceivedTensor, check_identifiability, known_factor
from .utils import DATA_PATH, read_fixture_file
from .waveform import (
    ModulationConfig,
    OqamFrame,
    afb_demodulate,
    ofdm_demodulate,
    ofdm_modulate,
    oqam_to_qam,
    qam_to_oqam,
    sfb_modulate,
)

LOGGER = logging.getLogger(__name__)

RECEIVER_MODES = (
    "informed",
    "structure_blind",
    "training_only",
    "perfect_csi",
    "cp_ofdm",
    "weighted",
)
CSV_HEADER = (
    "system",
    "mode",
    "snr_db",
    "nmse",
    "ber",
    "avg_iterations",
    "iter_std",
    "trials",
    "flagged",
    "seed",
)
# Rows with more flagged trials than this fraction are unreliable
FLAGGED_LIMIT = 0.01

_SCENARIO_KEYS = {
    "name",
    "modulation",
    "profile",
    "cp_len",
    "snr_grid_db",
    "trials_per_point",
    "receiver_modes",
    "seed",
    "receiver",
}
_RECEIVER_KEYS = {"max_iters", "tol", "n_simple_iters", "init"}


def _check_modes(instance, attribute, value) -> None:
    unknown = [mode for mode in value if mode not in RECEIVER_MODES]
    if unknown or not value:
        raise ValueError(f"receiver modes must be a non-empty subset of {RECEIVER_MODES}")


@attr.s(slots=True, frozen=True)
class Scenario:
    name: str = attr.ib()
    modulation: ModulationConfig = attr.ib()
    profile: ChannelProfile = attr.ib()
    snr_grid_db: tuple[float, ...] = attr.ib(converter=lambda v: tuple(float(x) for x in v))
    trials_per_point: int = attr.ib(default=500)
    receiver_modes: tuple[str, ...] = attr.ib(
        default=("informed", "structure_blind", "training_only", "perfect_csi", "cp_ofdm"),
        converter=tuple,
        validator=_check_modes,
    )
    cp_len: int = attr.ib(default=8)
    seed: int = attr.ib(default=0)
    # template for the iterative receivers, its mode is replaced per run
    receiver: AlsConfig = attr.ib(factory=AlsConfig)

    @snr_grid_db.validator
    def _check_grid(self, attribute, value) -> None:
        if not value:
            raise ValueError("SNR grid must not be empty")

    @trials_per_point.validator
    def _check_trials(self, attribute, value) -> None:
        if value < 1:
            raise ValueError(f"trials_per_point must be >= 1, got {value}")

    @cp_len.validator
    def _check_cp(self, attribute, value) -> None:
        if not 0 <= value < self.modulation.num_subcarriers:
            raise ValueError(f"cyclic prefix must be in [0, M), got {value}")


def _reject_unknown(section: dict, allowed: set[str], where: str) -> None:
    unknown = sorted(set(section) - allowed)
    if unknown:
        raise KeyError(f"Unknown {where} keys: {', '.join(unknown)}")


def parse_scenario(document: dict) -> Scenario:
    """Build a :class:`Scenario` from one parsed scenario document."""
    _reject_unknown(document, _SCENARIO_KEYS, "scenario")
    modulation = dict(document.get("modulation", {}))
    _reject_unknown(modulation, set(attr.fields_dict(ModulationConfig)), "modulation")
    receiver = dict(document.get("receiver", {}))
    _reject_unknown(receiver, _RECEIVER_KEYS, "receiver")
    kwargs = {
        key: document[key]
        for key in ("trials_per_point", "receiver_modes", "cp_len", "seed")
        if key in document
    }
    return Scenario(
        name=document.get("name", "scenario"),
        modulation=ModulationConfig(**modulation),
        profile=load_profile(document.get("profile", "peda")),
        snr_grid_db=document.get("snr_grid_db", ()),
        receiver=AlsConfig(**receiver),
        **kwargs,
    )


def load_scenario(name_or_path: str | Path) -> Scenario:
    """Load a packaged scenario by name (``peda``, ``vehb``) or a scenario file."""
    packaged = DATA_PATH / "scenarios" / f"{name_or_path}.scenario"
    path = packaged if packaged.is_file() else Path(name_or_path)
    document = read_fixture_file(path)
    if not isinstance(document, dict):
        raise ValueError(f"{path} does not hold a scenario mapping")
    return parse_scenario(document)


@attr.s(slots=True, frozen=True)
class TrialMetrics:
    system: str = attr.ib()
    mode: str = attr.ib()
    nmse: float = attr.ib()
    ber: float = attr.ib()
    iterations: int = attr.ib()
    flagged: bool = attr.ib(default=False)


def _nonnegative_or_nan(instance, attribute, value) -> None:
    if not (math.isnan(value) or value >= 0):
        raise ValueError(f"{attribute.name} must be >= 0, got {value}")


@attr.s(slots=True, frozen=True)
class ResultRow:
    system: str = attr.ib()
    mode: str = attr.ib()
    snr_db: float = attr.ib()
    nmse: float = attr.ib(validator=_nonnegative_or_nan)
    ber: float = attr.ib(validator=_nonnegative_or_nan)
    avg_iterations: float = attr.ib()
    iter_std: float = attr.ib()
    trials: int = attr.ib()
    flagged: int = attr.ib()
    seed: int = attr.ib()

    @ber.validator
    def _check_ber(self, attribute, value) -> None:
        if value > 1:
            raise ValueError(f"ber must be <= 1, got {value}")

    @property
    def reliable(self) -> bool:
        return self.flagged <= FLAGGED_LIMIT * self.trials

    def as_csv(self) -> list[str]:
        values = attr.astuple(self)
        return [f"{v:.10g}" if isinstance(v, float) else str(v) for v in values]


@attr.s(slots=True, frozen=True)
class LinkContext:
    """Everything a trial needs that does not depend on the trial."""

    scenario: Scenario = attr.ib()
    filt = attr.ib(eq=False)
    weights = attr.ib(eq=False)
    structs = attr.ib(eq=False)
    Gamma: np.ndarray = attr.ib(eq=False)
    fbmc_preamble = attr.ib(eq=False)
    ofdm_preamble = attr.ib(eq=False)


@functools.lru_cache(maxsize=4)
def build_context(scenario: Scenario) -> LinkContext:
    mod = scenario.modulation
    filt = design_prototype(mod.num_subcarriers, mod.overlap_factor)
    weights = compute_weights(filt)
    ofdm_preamble = None
    if "cp_ofdm" in scenario.receiver_modes:
        ofdm_preamble = make_preamble(mod, seed=scenario.seed, system="ofdm")
    return LinkContext(
        scenario=scenario,
        filt=filt,
        weights=weights,
        structs=build_struct_matrices(mod.num_subcarriers, mod.num_symbols, weights.edge_sign),
        Gamma=known_factor(mod.num_subcarriers, mod.num_tx),
        fbmc_preamble=make_preamble(mod, weights, seed=scenario.seed),
        ofdm_preamble=ofdm_preamble,
    )


def _flagged(system: str, mode: str, exc: Exception) -> TrialMetrics:
    LOGGER.warning("%s/%s trial flagged: %s", system, mode, exc)
    return TrialMetrics(system, mode, math.nan, math.nan, 0, flagged=True)


def _init_seed(sequence: np.random.SeedSequence) -> int:
    return int(sequence.generate_state(1)[0])


def run_trial(scenario: Scenario, snr_db: float, trial_seed: int) -> list[TrialMetrics]:
    """One transmit / channel / receive cycle for every receiver mode of the scenario.

    :param trial_seed: trial index, combined with the scenario seed
    """
    context = build_context(scenario)
    mod = scenario.modulation
    M, N, N_T, N_R = mod.num_subcarriers, mod.num_symbols, mod.num_tx, mod.num_rx
    constellation = mod.constellation
    data_seq, channel_seq, fbmc_noise, ofdm_noise, init_seq = np.random.SeedSequence(
        [scenario.seed, trial_seed]
    ).spawn(5)

    preamble = context.fbmc_preamble
    n_pre = preamble.n_pre
    payload = constellation.random_pam(np.random.default_rng(data_seq), (N_T, M, N - n_pre))
    frame = OqamFrame(np.concatenate([preamble.frames(N_T), payload], axis=-1))
    channels = draw_channel(scenario.profile, N_T, N_R, channel_seq, M)
    sigma2 = snr_to_sigma2(snr_db, N_T)
    H_true = channels.H

    results = []
    fbmc_modes = [mode for mode in scenario.receiver_modes if mode != "cp_ofdm"]
    if fbmc_modes:
        received = apply_channel(
            sfb_modulate(frame, context.filt, fast=True), channels, NoiseSpec(sigma2, fbmc_noise)
        )
        tensor = ReceivedTensor.from_afb(afb_demodulate(received, context.filt, M, N, fast=True))
        for mode in fbmc_modes:
            try:
                if mode == "perfect_csi":
                    D_hat = equalize_perfect_csi(tensor, H_true, context.Gamma, constellation)
                    results.append(
                        TrialMetrics("fbmc", mode, 0.0, ber(D_hat, frame, n_pre, constellation), 0)
                    )
                    continue
                cfg = attr.evolve(scenario.receiver, mode=mode, seed=_init_seed(init_seq))
                report = joint_estimate(
                    tensor,
                    cfg,
                    preamble,
                    context.Gamma,
                    context.weights,
                    context.structs,
                    constellation=constellation,
                )
                results.append(
                    TrialMetrics(
                        "fbmc",
                        mode,
                        nmse(report.H_hat, H_true),
                        ber(report.D_hat, frame, n_pre, constellation),
                        report.iterations,
                    )
                )
            except RankDeficiencyError as exc:
                results.append(_flagged("fbmc", mode, exc))

    if "cp_ofdm" in scenario.receiver_modes:
        ofdm_pre = context.ofdm_preamble
        # same payload bits as the FBMC frame, QAM on the OFDM symbols
        qam = np.concatenate(
            [ofdm_pre.frames(N_T), oqam_to_qam(OqamFrame(payload))], axis=-1
        )
        num_ofdm = mod.num_ofdm_symbols
        received = apply_channel(
            ofdm_modulate(qam, scenario.cp_len), channels, NoiseSpec(sigma2, ofdm_noise)
        )
        tensor = ReceivedTensor.from_afb(
            ofdm_demodulate(received, M, scenario.cp_len, num_ofdm)
        )
        try:
            cfg = attr.evolve(scenario.receiver, mode="informed", seed=_init_seed(init_seq))
            report = joint_estimate(
                tensor, cfg, ofdm_pre, context.Gamma, constellation=constellation, system="ofdm"
            )
            results.append(
                TrialMetrics(
                    "cp_ofdm",
                    "informed",
                    nmse(report.H_hat, H_true),
                    ber(report.D_hat, qam_to_oqam(qam), n_pre, constellation),
                    report.iterations,
                )
            )
        except RankDeficiencyError as exc:
            results.append(_flagged("cp_ofdm", "informed", exc))
    return results


def aggregate(
    scenario: Scenario, snr_db: float, trials: Sequence[list[TrialMetrics]]
) -> list[ResultRow]:
    """Average the metrics of the trials of one SNR point, in trial order."""
    grouped: dict[tuple[str, str], list[TrialMetrics]] = {}
    for metrics in trials:
        for item in metrics:
            grouped.setdefault((item.system, item.mode), []).append(item)
    rows = []
    for (system, mode), items in grouped.items():
        good = [item for item in items if not item.flagged]
        flagged = len(items) - len(good)
        iterations = np.array([item.iterations for item in good], dtype=float)
        row = ResultRow(
            system=system,
            mode=mode,
            snr_db=float(snr_db),
            nmse=float(np.mean([item.nmse for item in good])) if good else math.nan,
            ber=float(np.mean([item.ber for item in good])) if good else math.nan,
            avg_iterations=float(iterations.mean()) if good else math.nan,
            iter_std=float(iterations.std()) if good else math.nan,
            trials=len(items),
            flagged=flagged,
            seed=scenario.seed,
        )
        if not row.reliable:
            LOGGER.warning(
                "%s/%s at %g dB: %d of %d trials flagged, row unreliable",
                system,
                mode,
                snr_db,
                flagged,
                len(items),
            )
        rows.append(row)
    return rows


def _run_job(job: tuple[Scenario, float, int]) -> list[TrialMetrics]:
    return run_trial(*job)


def run_scenario(
    scenario: Scenario, out: str | Path | None = None, *, workers: int = 1
) -> list[ResultRow]:
    """Monte Carlo over the SNR grid; rows are identical for any number of workers."""
    mod = scenario.modulation
    check = check_identifiability(mod.num_subcarriers, mod.num_symbols, mod.num_tx, mod.num_rx)
    if not check.identifiable:
        LOGGER.warning(
            "scenario %r is not identifiable (N_T=%d, N_R=%d), simulating anyway",
            scenario.name,
            mod.num_tx,
            mod.num_rx,
        )
    jobs = [
        (scenario, snr, trial)
        for snr in scenario.snr_grid_db
        for trial in range(scenario.trials_per_point)
    ]
    LOGGER.info(
        "scenario %r: %d SNR points x %d trials",
        scenario.name,
        len(scenario.snr_grid_db),
        scenario.trials_per_point,
    )
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_job, jobs, chunksize=8))
    else:
        results = [_run_job(job) for job in jobs]

    rows = []
    per_point = scenario.trials_per_point
    for index, snr in enumerate(scenario.snr_grid_db):
        chunk = results[index * per_point : (index + 1) * per_point]
        rows.extend(aggregate(scenario, snr, chunk))
        LOGGER.info("scenario %r: %g dB done", scenario.name, snr)
    if out is not None:
        write_csv(rows, out)
    return rows


def write_csv(rows: Iterable[ResultRow], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for row in rows:
            writer.writerow(row.as_csv())


def emit_histogram(
    scenario: Scenario, out: str | Path | None = None, frames: int = 200, bins: int = 50
):
    """Histogram of the imaginary part of the pseudo-symbols of random frames.

    Written as ``bin_center,density`` when ``out`` is given.
    """
    if frames < 1:
        raise ValueError(f"need at least one frame, got {frames}")
    context = build_context(scenario)
    mod = scenario.modulation
    rng = np.random.default_rng(scenario.seed)
    shape = (frames * mod.num_tx, mod.num_subcarriers, mod.num_symbols)
    data = OqamFrame(mod.constellation.random_pam(rng, shape))
    histogram = interference_histogram(virtualize(data, context.weights, context.structs), bins)
    if out is not None:
        np.savetxt(
            out,
            np.column_stack([histogram.bin_centers, histogram.density]),
            fmt="%.10g",
            delimiter=",",
            header="bin_center,density",
            comments="",
        )
    return histogram
