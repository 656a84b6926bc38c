import numpy as np
import pytest

from analysis.hamiltonian import (ModelParams, SectorOperator, build_operator, dense_matrix, diagonal_energy,
                                  full_space_matrix)
from data.sector_basis import build_sector
from utils.errors import InvalidParameterError


@pytest.mark.parametrize("n_sites", [2, 4, 6, 8, 12, 16])
def test_vacuum_configuration_has_zero_diagonal_energy(n_sites):
    assert diagonal_energy("01" * (n_sites // 2), ModelParams(1.0, 0.7)) == 0.0


@pytest.mark.parametrize("n_sites", [2, 4, 6, 8, 12, 16])
@pytest.mark.parametrize("mu", [0.1, -1.0])
def test_fully_charged_configuration(n_sites, mu):
    energy = diagonal_energy("10" * (n_sites // 2), ModelParams(1.0, mu))
    assert energy == pytest.approx(n_sites * mu + n_sites // 2)


def test_single_configuration_values():
    params = ModelParams(1.0, 0.1)
    assert diagonal_energy("001", params) == pytest.approx(1.2)
    assert diagonal_energy("010", params) == 0.0
    assert diagonal_energy("1100", params) == pytest.approx(3.2)


def test_background_field_shifts_every_link():
    plain = diagonal_energy("0110", ModelParams(1.0, 0.3))
    shifted = diagonal_energy("0110", ModelParams(1.0, 0.3, epsilon0=0.5))
    # links carry L = 0, 0, 1
    assert shifted - plain == pytest.approx(3 * 0.25 + 0.5 * 2 * 1)


@pytest.mark.parametrize("n_sites,n_up", [(4, 2), (5, 3), (6, 3), (7, 3), (8, 4)])
@pytest.mark.parametrize("params", [ModelParams(1.0, 0.1), ModelParams(0.4, -0.6, 0.25)])
def test_sector_operator_matches_pauli_reference(n_sites, n_up, params):
    op = build_operator(n_sites, n_up, params)
    reference = full_space_matrix(n_sites, params).toarray()
    idx = op.basis.states
    np.testing.assert_allclose(dense_matrix(op), reference[np.ix_(idx, idx)], atol=1e-12)


def test_full_space_reference_conserves_charge():
    reference = full_space_matrix(6, ModelParams(1.0, 0.2)).toarray()
    ones = np.array([bin(k).count("1") for k in range(64)])
    rows, cols = np.nonzero(np.abs(reference) > 0)
    assert np.all(ones[rows] == ones[cols])


def test_matvec_agrees_with_sparse_matrix():
    op = build_operator(10, 5, ModelParams(0.8, 0.3))
    v = np.random.default_rng(3).standard_normal(op.size)
    np.testing.assert_allclose(op @ v, op.sparse_matrix() @ v, atol=1e-12)
    assert (op.sparse_matrix() != op.sparse_matrix().T).nnz == 0


def test_threaded_matvec_is_bit_identical():
    op = build_operator(12, 6, ModelParams(1.0, 0.1))
    v = np.random.default_rng(0).standard_normal(op.size)
    np.testing.assert_array_equal(op.apply(v, workers=1), op.apply(v, workers=3))


def test_on_the_fly_hops_match_tabulated_hops():
    params = ModelParams(1.0, 0.1)
    tabulated = build_operator(10, 5, params)
    streamed = SectorOperator(build_sector(10, 5), params, bond_table_limit=0)
    v = np.random.default_rng(1).standard_normal(tabulated.size)
    np.testing.assert_array_equal(tabulated.apply(v, workers=2), streamed.apply(v, workers=2))


def test_hopping_counts():
    op = build_operator(4, 2, ModelParams(1.0, 0.0))
    counts = dict(zip(op.basis.bitstrings(), op.hopping_counts()))
    assert counts["0101"] == 3
    assert counts["0011"] == 1


@pytest.mark.parametrize("kwargs", [{"x": -1.0, "mu": 0.0}, {"x": np.inf, "mu": 0.0}, {"x": 1.0, "mu": np.nan}])
def test_invalid_params_rejected(kwargs):
    with pytest.raises(InvalidParameterError):
        ModelParams(**kwargs)


def test_wrong_vector_length_rejected():
    op = build_operator(4, 2, ModelParams(1.0, 0.1))
    with pytest.raises(InvalidParameterError):
        op.apply(np.ones(5))
