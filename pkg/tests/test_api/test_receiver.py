import numpy as np
import pytest

from fbmc_cpd import AlsConfig, joint_estimate
from fbmc_cpd.als import als_update_H, decide
from fbmc_cpd.channel import NoiseSpec, apply_channel, draw_channel, load_profile
from fbmc_cpd.interference import pseudo_symbols
from fbmc_cpd.prototype import compute_weights, design_prototype
from fbmc_cpd.receiver import (
    RankDeficiencyError,
    ber,
    equalize_perfect_csi,
    make_preamble,
    nmse,
    resolve_scaling,
    training_only_estimate,
)
from fbmc_cpd.tensor import ReceivedTensor, cpd_tensor, known_factor
from fbmc_cpd.waveform import (
    Constellation,
    ModulationConfig,
    OqamFrame,
    afb_demodulate,
    qam_to_oqam,
    sfb_modulate,
)

M, N, N_R = 8, 10, 2


@pytest.fixture(scope="module")
def weights():
    return compute_weights(design_prototype(M))


@pytest.fixture
def link(weights):
    """Noiseless synthetic frame that follows the CPD model exactly."""
    mod = ModulationConfig(num_subcarriers=M, num_symbols=N, num_rx=N_R)
    preamble = make_preamble(mod, weights, seed=4)
    rng = np.random.default_rng(8)
    payload = mod.constellation.random_pam(rng, (1, M, N - preamble.n_pre))
    frame = OqamFrame(np.concatenate([preamble.frames(1), payload], axis=-1))
    C = pseudo_symbols(frame.data, weights)[0]
    H = rng.standard_normal((N_R, M)) + 1j * rng.standard_normal((N_R, M))
    Gamma = known_factor(M)
    return {
        "preamble": preamble,
        "frame": frame,
        "H": H,
        "C": C,
        "Gamma": Gamma,
        "tensor": ReceivedTensor(cpd_tensor(Gamma, C, H)),
    }


def _estimate(link, weights, **kwargs):
    return joint_estimate(
        link["tensor"], AlsConfig(seed=1, **kwargs), link["preamble"], link["Gamma"], weights
    )


def test_preamble_symbols_are_exact_where_promised(link, weights):
    preamble = link["preamble"]
    assert preamble.n_pre == 2
    assert preamble.exact == 1
    np.testing.assert_array_equal(preamble.data, link["frame"].data[0, :, :2])
    np.testing.assert_allclose(preamble.symbols[:, 0], link["C"][:, 0])


def test_informed_recovers_noiseless_frame(link, weights):
    report = _estimate(link, weights, mode="informed")
    assert report.converged
    assert report.iterations <= 3
    assert report.mode == "informed"
    assert nmse(report.H_hat, link["H"]) < 1e-12
    np.testing.assert_allclose(report.D_hat.data, link["frame"].data)
    assert ber(report.D_hat, link["frame"], 2) == 0.0


def test_structure_blind_recovers_noiseless_frame(link, weights):
    report = _estimate(link, weights, mode="structure_blind")
    assert report.converged
    assert report.mode == "structure_blind"
    assert nmse(report.H_hat, link["H"]) < 1e-12
    np.testing.assert_allclose(report.C_hat, link["C"], atol=1e-9)
    np.testing.assert_allclose(report.D_hat.data, link["frame"].data)


def test_weighted_recovers_noiseless_frame(link, weights):
    report = _estimate(link, weights, mode="weighted")
    assert report.mode == "weighted"
    assert nmse(report.H_hat, link["H"]) < 1e-10
    np.testing.assert_allclose(report.D_hat.data, link["frame"].data)


def test_khatri_rao_initialisation(link, weights):
    report = _estimate(link, weights, mode="informed", init="khatri_rao")
    assert nmse(report.H_hat, link["H"]) < 1e-12


def test_cost_never_increases(link, weights):
    rng = np.random.default_rng(2)
    Y = link["tensor"].Y
    noise = rng.standard_normal(Y.shape) + 1j * rng.standard_normal(Y.shape)
    noisy = ReceivedTensor(Y + 0.05 * noise)
    report = joint_estimate(
        noisy, AlsConfig(mode="structure_blind", seed=3), link["preamble"], link["Gamma"], weights
    )
    trace = np.array(report.cost_trace)
    assert len(trace) == report.iterations
    assert np.all(np.diff(trace) <= 1e-9 * trace[0])


def test_non_convergence_is_reported(link, weights):
    rng = np.random.default_rng(2)
    Y = link["tensor"].Y
    noise = rng.standard_normal(Y.shape) + 1j * rng.standard_normal(Y.shape)
    noisy = ReceivedTensor(Y + 0.3 * noise)
    cfg = AlsConfig(mode="structure_blind", seed=3, max_iters=1, tol=1e-15)
    report = joint_estimate(noisy, cfg, link["preamble"], link["Gamma"], weights)
    assert not report.converged
    assert report.iterations == 1


def test_perfect_csi(link):
    D_hat = equalize_perfect_csi(link["tensor"], link["H"], link["Gamma"])
    np.testing.assert_allclose(D_hat.data, link["frame"].data)
    with pytest.raises(ValueError, match="equalize_perfect_csi"):
        joint_estimate(
            link["tensor"], AlsConfig(mode="perfect_csi"), link["preamble"], link["Gamma"]
        )


def test_training_only_fbmc(link, weights):
    report = joint_estimate(
        link["tensor"], AlsConfig(mode="training_only"), link["preamble"], link["Gamma"], weights
    )
    assert report.iterations == 0
    assert report.mode == "training_only"
    assert report.H_hat.shape == (N_R, M)
    np.testing.assert_array_equal(report.D_hat.data[0, :, :2], link["preamble"].data)


def test_training_only_keeps_trailing_preamble_interference(link):
    report = training_only_estimate(link["tensor"], link["preamble"], link["Gamma"])
    assert nmse(report.H_hat, link["H"]) > 1e-4
    exact = link["tensor"].columns(link["preamble"].exact)
    H = als_update_H(exact.unfold3(), link["preamble"].symbols[:, :1], link["Gamma"])
    assert nmse(H, link["H"]) < 1e-20


def test_perfect_csi_flat_channel_averages_antennas():
    rng = np.random.default_rng(12)
    Y = rng.standard_normal((M, N, 3)) + 1j * rng.standard_normal((M, N, 3))
    D_hat = equalize_perfect_csi(ReceivedTensor(Y), np.ones((3, M)), known_factor(M))
    expected = Constellation(4).slice(Y.mean(axis=2).real)
    np.testing.assert_allclose(D_hat.data[0], expected)


def test_decide_slices_real_parts():
    qpsk = Constellation(4)
    level = np.sqrt(0.5)
    C = np.array([[0.9 + 0.4j, -0.1 - 2.0j, -0.3 + 0.3j]])
    np.testing.assert_allclose(decide(C, qpsk), [[level, -level, -level]])
    np.testing.assert_allclose(decide(C, qpsk, known=np.ones((1, 1))), [[1.0, -level, -level]])
    qam = decide(np.array([[0.9 - 0.1j]]), qpsk, "ofdm")
    np.testing.assert_allclose(qam, [[level - level * 1j]])
    with pytest.raises(ValueError, match="unknown system"):
        decide(C, qpsk, "dmt")


def test_ofdm_training_and_joint_estimation():
    mod = ModulationConfig(num_subcarriers=M, num_symbols=N, num_rx=N_R)
    preamble = make_preamble(mod, system="ofdm", seed=6)
    assert (preamble.n_pre, preamble.exact) == (1, 1)
    rng = np.random.default_rng(7)
    qam = mod.constellation.random_qam(rng, (M, N // 2))
    qam[:, :1] = preamble.data
    H = rng.standard_normal((N_R, M)) + 1j * rng.standard_normal((N_R, M))
    Gamma = known_factor(M)
    tensor = ReceivedTensor(cpd_tensor(Gamma, qam, H))
    truth = qam_to_oqam(qam)

    trained = training_only_estimate(tensor, preamble, Gamma, system="ofdm")
    assert nmse(trained.H_hat, H) < 1e-12
    np.testing.assert_allclose(trained.D_hat.data, truth.data)

    report = joint_estimate(
        tensor, AlsConfig(mode="informed", seed=2), preamble, Gamma, system="ofdm"
    )
    assert nmse(report.H_hat, H) < 1e-12
    assert report.D_hat.num_symbols == N
    assert ber(report.D_hat, truth, 2) == 0.0


def test_filter_bank_link():
    """Real SFB / AFB with a flat channel: only higher-order leakage is unmodelled."""
    M_link, N_link = 32, 40
    filt = design_prototype(M_link)
    weights = compute_weights(filt)
    mod = ModulationConfig(num_subcarriers=M_link, num_symbols=N_link, num_rx=2)
    preamble = make_preamble(mod, weights, seed=3)
    rng = np.random.default_rng(10)
    payload = mod.constellation.random_pam(rng, (1, M_link, N_link - 2))
    frame = OqamFrame(np.concatenate([preamble.frames(1), payload], axis=-1))
    channels = draw_channel(load_profile("flat"), 1, 2, seed=5, num_subcarriers=M_link)
    received = apply_channel(sfb_modulate(frame, filt, fast=True), channels, NoiseSpec(0.0))
    tensor = ReceivedTensor.from_afb(afb_demodulate(received, filt, M_link, N_link, fast=True))

    report = joint_estimate(
        tensor, AlsConfig(mode="informed", seed=4), preamble, known_factor(M_link), weights
    )
    assert nmse(report.H_hat, channels.H) < 1e-2
    assert ber(report.D_hat, frame, 2) < 1e-2


def test_scaling_needs_energy():
    C_hat = np.ones((3, 4), dtype=complex)
    C_hat[1, :2] = 0
    with pytest.raises(RankDeficiencyError, match="rows \\[1\\]"):
        resolve_scaling(C_hat, np.ones((3, 2)))
    fix = resolve_scaling(2 * np.ones((2, 3)), np.ones((2, 1)))
    np.testing.assert_allclose(fix.alpha, 0.5)
    np.testing.assert_allclose(fix.C, 1.0)
    np.testing.assert_allclose(fix.apply_to_H(np.ones((1, 2))), 2.0)


def test_rank_deficient_channel(link, weights):
    tensor = ReceivedTensor(np.zeros((M, N, N_R)))
    with pytest.raises(RankDeficiencyError):
        training_only_estimate(tensor, link["preamble"], link["Gamma"])


def test_metrics():
    H = np.array([[1.0, 2.0], [2.0, 0.0]])
    assert nmse(H, H) == 0.0
    assert nmse(2 * H, H) == pytest.approx(1.0)
    with pytest.raises(ValueError, match="all-zero"):
        nmse(H, np.zeros((2, 2)))

    qam = Constellation(16)
    truth = np.full((1, 2, 4), qam.levels[0])
    estimate = truth.copy()
    estimate[0, 1, 3] = qam.levels[2]
    # 2 bits per level, 4 payload levels after a 2-column preamble
    assert ber(estimate, truth, 2, qam) == pytest.approx(2 / 8)
    assert ber(estimate, truth, 0, qam) == pytest.approx(2 / 16)
    with pytest.raises(ValueError, match="differ in shape"):
        ber(estimate[..., :3], truth)
    with pytest.raises(ValueError, match="no payload"):
        ber(estimate, truth, 4, qam)


@pytest.mark.parametrize(
    "kwargs",
    [{"mode": "fast"}, {"max_iters": 0}, {"tol": 0.0}, {"n_simple_iters": 0}, {"init": "svd"}],
)
def test_als_config_validation(kwargs):
    with pytest.raises(ValueError):
        AlsConfig(**kwargs)
