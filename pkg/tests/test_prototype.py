import numpy as np
import pytest

from fbmc_cpd.prototype import (
    InterferenceWeights,
    PrototypeFilter,
    ambient_phase,
    compute_weights,
    design_prototype,
    load_coefficients,
    measure_neighborhood,
    modulated_pulse,
    phase_factors,
    pulse_inner_product,
)


@pytest.fixture(scope="module")
def filt():
    return design_prototype(32, 4)


def test_design_shape(filt):
    assert filt.length == 128
    assert filt.center == 63.5
    assert np.sum(filt.taps**2) == pytest.approx(1.0, abs=1e-12)
    np.testing.assert_allclose(filt.taps, filt.taps[::-1], atol=1e-12)
    assert not filt.taps.flags.writeable


@pytest.mark.parametrize("M,K", [(3, 4), (2, 4), (16, 1)])
def test_design_bad_sizes(M, K):
    with pytest.raises(ValueError):
        design_prototype(M, K)


def test_design_coefficient_count():
    with pytest.raises(ValueError, match="expected 4 frequency coefficients"):
        design_prototype(16, 4, coefficients=[1.0, 0.5])


def test_load_coefficients():
    assert load_coefficients(4)[0] == 1.0
    assert len(load_coefficients(3)) == 3
    with pytest.raises(KeyError, match="K=9"):
        load_coefficients(9)


def test_prototype_checks():
    with pytest.raises(ValueError, match="K\\*M"):
        PrototypeFilter(np.ones(10) / np.sqrt(10), 4, 4)
    with pytest.raises(ValueError, match="unit energy"):
        PrototypeFilter(np.ones(16), 4, 4)
    taps = np.arange(1, 17, dtype=float)
    with pytest.raises(ValueError, match="symmetric"):
        PrototypeFilter(taps / np.linalg.norm(taps), 4, 4)


def test_weights_values(filt):
    weights = compute_weights(filt)
    assert weights.beta == pytest.approx(0.2393, abs=2e-3)
    assert weights.gamma == pytest.approx(0.5644, abs=2e-3)
    assert weights.delta == pytest.approx(0.2058, abs=2e-3)


def test_weights_do_not_depend_on_reference(filt):
    reference = compute_weights(filt).as_dict()
    for p, q in [(5, 2), (12, 2), (16, 4)]:
        assert compute_weights(filt, p=p, q=q).as_dict() == pytest.approx(reference, abs=1e-12)


@pytest.mark.parametrize("p", [6, 7])
def test_measured_grid_follows_pattern(filt, p):
    weights = compute_weights(filt)
    grid = measure_neighborhood(filt, p, 3)
    assert grid[1, 1] == pytest.approx(1.0, abs=1e-12)
    grid[1, 1] = 0.0
    np.testing.assert_allclose(grid, weights.neighborhood(p), atol=1e-9)


def test_neighborhood_signs():
    weights = InterferenceWeights(0.2, 0.5, 0.1)
    even = weights.neighborhood(4)
    odd = weights.neighborhood(5)
    # the frequency neighbours keep their sign, the others flip with parity
    np.testing.assert_array_equal(even[:, 1], odd[:, 1])
    np.testing.assert_array_equal(even[:, [0, 2]], -odd[:, [0, 2]])
    assert even[1, 2] == 0.5
    assert even[2, 1] == 0.2


def test_edge_sign_is_measured(filt):
    weights = compute_weights(filt)
    assert weights.edge_sign == -1
    for p in (0, 31):
        grid = measure_neighborhood(filt, p, 3)
        grid[1, 1] = 0.0
        np.testing.assert_allclose(grid, weights.neighborhood(p, 32), atol=1e-9)
    # across the edge the coupling is the negated interior one
    np.testing.assert_allclose(weights.neighborhood(31, 32)[2], -weights.neighborhood(31)[2])
    np.testing.assert_array_equal(weights.neighborhood(5, 32), weights.neighborhood(5))


def test_reference_away_from_band_edge(filt):
    with pytest.raises(ValueError, match="band edges"):
        compute_weights(filt, p=0)
    with pytest.raises(ValueError, match="band edges"):
        compute_weights(filt, p=31)


def test_edge_sign_values():
    with pytest.raises(ValueError, match="edge sign"):
        InterferenceWeights(0.2, 0.5, 0.1, 0)
    assert InterferenceWeights(0.2, 0.5, 0.1).as_dict() == {"beta": 0.2, "gamma": 0.5, "delta": 0.1}


def test_weights_ordering():
    with pytest.raises(ValueError, match="gamma > beta > delta > 0"):
        InterferenceWeights(0.5, 0.2, 0.1)
    with pytest.raises(ValueError):
        InterferenceWeights(0.2, 0.5, 0.0)


def test_rectangular_prototype_rejected():
    rectangle = design_prototype(16, 4, coefficients=[1.0, 0.0, 0.0, 0.0])
    with pytest.raises(ValueError):
        compute_weights(rectangle)


def test_measure_needs_left_neighbour(filt):
    with pytest.raises(ValueError, match="left neighbour"):
        measure_neighborhood(filt, 3, 0)


def test_ambient_phase():
    assert ambient_phase(0, 0) == 0.0
    assert ambient_phase(1, 0) == pytest.approx(np.pi / 2)
    assert ambient_phase(1, 1) == 0.0
    assert ambient_phase(2, 1) == pytest.approx(3 * np.pi / 2)
    phases = ambient_phase(np.arange(4)[:, None], np.arange(3)[None, :])
    assert phases.shape == (4, 3)
    np.testing.assert_allclose(phase_factors(4, 3), np.exp(1j * phases), atol=1e-15)


def test_phase_factors_are_exact():
    factors = phase_factors(8, 6)
    assert set(np.unique(factors)) <= {1, 1j, -1, -1j}


def test_pulses_are_real_orthogonal(filt):
    assert pulse_inner_product(filt, (3, 2), (3, 2)) == pytest.approx(1.0, abs=1e-12)
    for source in [(4, 2), (3, 3), (4, 3), (5, 2), (3, 4)]:
        assert abs(pulse_inner_product(filt, source, (3, 2)).real) < 1e-2


def test_modulated_pulse_support(filt):
    pulse = modulated_pulse(filt, 2, 3, 400)
    start = 3 * 16
    assert np.all(pulse[:start] == 0)
    assert np.all(pulse[start + filt.length :] == 0)
    np.testing.assert_allclose(np.abs(pulse[start : start + filt.length]), np.abs(filt.taps))
