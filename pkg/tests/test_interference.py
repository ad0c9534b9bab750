import numpy as np
import pytest

from fbmc_cpd.interference import (
    VirtualFrame,
    build_interference_operator,
    build_struct_matrices,
    devirtualize,
    interference_histogram,
    neighborhood_oracle,
    pseudo_symbols,
    virtualize,
)
from fbmc_cpd.prototype import (
    InterferenceWeights,
    compute_weights,
    design_prototype,
    pulse_inner_product,
)
from fbmc_cpd.utils import vec
from fbmc_cpd.waveform import Constellation, OqamFrame

WEIGHTS = InterferenceWeights(0.2393, 0.5644, 0.2058)


@pytest.fixture
def data():
    rng = np.random.default_rng(21)
    return Constellation(16).random_pam(rng, (8, 6))


def test_struct_matrices(data_regression):
    structs = build_struct_matrices(4, 3)
    assert structs.num_subcarriers == 4
    assert structs.num_symbols == 3
    data_regression.check(structs.as_dict())


def test_struct_matrices_circulant_corners():
    plain = build_struct_matrices(4, 3, edge_sign=1)
    assert plain.edge_sign == 1
    np.testing.assert_array_equal(plain.E[0], [0, 1, 0, -1])
    np.testing.assert_array_equal(plain.Zbar[0], [0, 1, 0, 1])
    physical = build_struct_matrices(4, 3)
    assert physical.edge_sign == -1
    np.testing.assert_array_equal(physical.E[0], [0, 1, 0, 1])
    np.testing.assert_array_equal(physical.Zbar[0], [0, 1, 0, -1])
    np.testing.assert_array_equal(physical.Ebar, plain.Ebar)
    with pytest.raises(ValueError, match="edge sign"):
        build_struct_matrices(4, 3, edge_sign=0)


def test_struct_matrix_properties():
    structs = build_struct_matrices(8, 5)
    np.testing.assert_array_equal(structs.E, -structs.E.T)
    np.testing.assert_array_equal(structs.Ebar, -structs.Ebar.T)
    np.testing.assert_array_equal(structs.Etilde, structs.Etilde.T)
    np.testing.assert_array_equal(structs.Zbar, structs.Zbar.T)
    np.testing.assert_array_equal(structs.signs, [1, -1, 1, -1, 1, -1, 1, -1])
    assert build_struct_matrices(8, 5) is structs


@pytest.mark.parametrize("M,N", [(5, 4), (2, 4), (8, 1)])
def test_struct_matrices_bad_sizes(M, N):
    with pytest.raises(ValueError):
        build_struct_matrices(M, N)


@pytest.mark.parametrize("edge_sign", [-1, 1])
def test_matches_neighbourhood_sum(edge_sign):
    weights = InterferenceWeights(0.2393, 0.5644, 0.2058, edge_sign)
    rng = np.random.default_rng(21)
    frames = Constellation(16).random_pam(rng, (50, 8, 6))
    batch = pseudo_symbols(frames, weights)
    for frame, virtual in zip(frames, batch):
        assert np.max(np.abs(virtual - neighborhood_oracle(frame, weights))) < 1e-12


@pytest.mark.parametrize("p", [0, 7])
def test_operator_matches_coupling_across_band_edge(p):
    M, N = 8, 4
    filt = design_prototype(M)
    weights = compute_weights(filt)
    assert weights.edge_sign == -1
    G = build_interference_operator(M, N, weights)
    plain = build_interference_operator(M, N, weights, build_struct_matrices(M, N, edge_sign=1))
    wrapped = (p - 1) % M if p == 0 else (p + 1) % M
    for q in (1, 2):
        for m in ((p - 1) % M, p, (p + 1) % M):
            for n in (q - 1, q, q + 1):
                if (m, n) == (p, q):
                    continue
                measured = pulse_inner_product(filt, (m, n), (p, q)).imag
                assert G[p + q * M, m + n * M].imag == pytest.approx(measured, abs=1e-8)
                if m == wrapped and n == q:
                    assert plain[p + q * M, m + n * M].imag == pytest.approx(-measured, abs=1e-8)


def test_operator_form(data):
    G = build_interference_operator(8, 6, WEIGHTS)
    np.testing.assert_allclose(G @ vec(data), vec(pseudo_symbols(data, WEIGHTS)))


def test_single_symbol_spreads_to_neighbours():
    D = np.zeros((8, 5))
    D[3, 2] = 1.0
    C = pseudo_symbols(D, WEIGHTS)
    b, g, d = WEIGHTS.beta, WEIGHTS.gamma, WEIGHTS.delta
    expected = [[d, b, d], [-g, 0, g], [d, -b, d]]
    np.testing.assert_allclose(C[2:5, 1:4].imag, expected)
    assert C[3, 2] == 1.0
    assert np.count_nonzero(C) == 9


def test_real_part_is_data(data):
    frame = OqamFrame(np.stack([data, -data]))
    virtual = virtualize(frame, WEIGHTS)
    assert virtual.num_tx == 2
    np.testing.assert_array_equal(virtual.data.real, frame.data)
    np.testing.assert_array_equal(devirtualize(virtual).data, frame.data)
    assert virtual.stacked().shape == (16, 6)
    np.testing.assert_array_equal(
        VirtualFrame.from_stacked(virtual.stacked(), 2).data, virtual.data
    )


def test_structs_must_match(data):
    with pytest.raises(ValueError, match="structured matrices"):
        pseudo_symbols(data, WEIGHTS, build_struct_matrices(8, 4))
    with pytest.raises(ValueError, match="wrap with sign"):
        pseudo_symbols(data, WEIGHTS, build_struct_matrices(8, 6, edge_sign=1))


def test_histogram():
    weights = compute_weights(design_prototype(16))
    rng = np.random.default_rng(4)
    frames = OqamFrame(Constellation(4).random_pam(rng, (100, 16, 20)))
    histogram = interference_histogram(virtualize(frames, weights), bins=40)
    assert histogram.count == 100 * 16 * 20
    assert len(histogram.bin_centers) == 40
    np.testing.assert_allclose(histogram.bin_centers, -histogram.bin_centers[::-1], atol=1e-12)
    width = histogram.bin_centers[1] - histogram.bin_centers[0]
    assert np.sum(histogram.density) * width == pytest.approx(1.0)
    assert abs(histogram.mean) < 3 * histogram.standard_error
    full = 0.5 * (2 * weights.beta**2 + 2 * weights.gamma**2 + 4 * weights.delta**2)
    # edge symbols miss one time neighbour
    assert 0.85 * full < histogram.variance < full


def test_histogram_errors():
    with pytest.raises(ValueError, match="10 bins"):
        interference_histogram(np.zeros((4, 4), dtype=complex), bins=5)
    with pytest.raises(ValueError, match="no pseudo-symbols"):
        interference_histogram(np.zeros((0,), dtype=complex))
