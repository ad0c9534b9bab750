import numpy as np
import pytest

from fbmc_cpd import AlsConfig, joint_estimate
from fbmc_cpd.channel import NoiseSpec, apply_channel, draw_channel, load_profile
from fbmc_cpd.interference import build_struct_matrices
from fbmc_cpd.prototype import compute_weights, design_prototype
from fbmc_cpd.receiver import make_preamble
from fbmc_cpd.tensor import ReceivedTensor, known_factor
from fbmc_cpd.waveform import ModulationConfig, OqamFrame, afb_demodulate, sfb_modulate


@pytest.fixture(scope="module")
def link():
    mod = ModulationConfig()
    filt = design_prototype(mod.num_subcarriers, mod.overlap_factor)
    weights = compute_weights(filt)
    preamble = make_preamble(mod, weights, seed=1)
    rng = np.random.default_rng(2)
    payload = mod.constellation.random_pam(
        rng, (1, mod.num_subcarriers, mod.num_symbols - preamble.n_pre)
    )
    frame = OqamFrame(np.concatenate([preamble.frames(1), payload], axis=-1))
    channels = draw_channel(load_profile("peda"), 1, mod.num_rx, 3, mod.num_subcarriers)
    received = apply_channel(sfb_modulate(frame, filt, fast=True), channels, NoiseSpec(0.01, 4))
    outputs = afb_demodulate(received, filt, mod.num_subcarriers, mod.num_symbols, fast=True)
    return {
        "mod": mod,
        "filt": filt,
        "frame": frame,
        "tensor": ReceivedTensor.from_afb(outputs),
        "weights": weights,
        "structs": build_struct_matrices(mod.num_subcarriers, mod.num_symbols),
        "preamble": preamble,
        "Gamma": known_factor(mod.num_subcarriers),
    }


@pytest.mark.benchmark(group="filter-bank")
def test_sfb_fast(benchmark, link):
    benchmark(sfb_modulate, link["frame"], link["filt"], fast=True)


@pytest.mark.benchmark(group="filter-bank")
def test_sfb_direct(benchmark, link):
    benchmark(sfb_modulate, link["frame"], link["filt"])


@pytest.mark.benchmark(group="receiver")
@pytest.mark.parametrize("mode", ["structure_blind", "informed"])
def test_joint_estimate(benchmark, link, mode):
    cfg = AlsConfig(mode=mode, seed=5)
    benchmark(
        joint_estimate,
        link["tensor"],
        cfg,
        link["preamble"],
        link["Gamma"],
        link["weights"],
        link["structs"],
    )
