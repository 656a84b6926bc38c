import logging

import numpy as np
import pytest

from analysis.ansatz import (ELEVEN_TERM, FOUR_TERM, NINE_TERM, SIX_TERM, hamiltonian_sector_for,
                             reconstruct_state, table_from_states, to_hamiltonian_frame)
from analysis.hamiltonian import ModelParams, build_operator
from analysis.overlaps import OverlapCalculus, projected_hamiltonian
from analysis.recursion import (CalculusInputs, TableInputs, ad_recursion, afw_recursion, audit_afw_energy,
                                audit_reduced_hamiltonian, literal_reduced_hamiltonian, lowest_eigenpair,
                                recurrence_residuals, reduced_hamiltonian)
from utils.errors import InvalidParameterError
from utils.helpers import LOGGER_NAME


@pytest.fixture
def seeds(reference):
    states, energies = reference
    return {n: states[n] for n in range(1, 9)}, {n: energies[n] for n in range(1, 9)}


def test_lowest_eigenpair_sign_and_degeneracy():
    energy, vector = lowest_eigenpair(np.array([[2.0, -1.0], [-1.0, 2.0]]))
    assert energy == pytest.approx(1.0)
    np.testing.assert_allclose(vector, [1 / np.sqrt(2), 1 / np.sqrt(2)])
    energy, vector = lowest_eigenpair(np.diag([1.0, 1.0, 2.0]))
    assert energy == 1.0
    np.testing.assert_allclose(vector, [1.0, 0.0, 0.0], atol=1e-14)
    with pytest.raises(InvalidParameterError):
        lowest_eigenpair(np.array([[0.0, 1.0], [0.0, 0.0]]))


@pytest.mark.parametrize("n_sites", [10, 11, 12])
def test_literal_four_term_matrix_is_exact(reference, params, n_sites):
    states, energies = reference
    inputs = TableInputs(FOUR_TERM, table_from_states(FOUR_TERM, states, range(2, 13)), energies)
    literal = literal_reduced_hamiltonian(FOUR_TERM, n_sites, params, inputs)
    oracle = projected_hamiltonian(FOUR_TERM, n_sites, params, energies, OverlapCalculus(states))
    np.testing.assert_allclose(literal, oracle, atol=1e-12)


def test_reduced_hamiltonian_without_hopping(reference):
    states, energies = reference
    table = table_from_states(FOUR_TERM, states, range(2, 13))
    h = reduced_hamiltonian(FOUR_TERM, 12, ModelParams(0.0, 0.1), energies, table)
    expected = [energies[8] + 3.2, energies[10] + 1.2, energies[10], energies[9] + 1.2]
    np.testing.assert_allclose(h, np.diag(expected), atol=1e-12)
    assert lowest_eigenpair(h)[0] == pytest.approx(min(expected))


def test_audit_flags_six_term_slips(reference, params, caplog):
    states, energies = reference
    inputs = TableInputs(SIX_TERM, table_from_states(SIX_TERM, states, range(2, 13)), energies)
    with caplog.at_level(logging.WARNING, logger=LOGGER_NAME):
        found = audit_reduced_hamiltonian(SIX_TERM, 12, params, inputs, OverlapCalculus(states))
    assert any(d.row == 3 and d.col == 3 for d in found)
    diagonal = next(d for d in found if d.row == d.col == 3)
    assert diagonal.literal == pytest.approx(energies[8])
    assert diagonal.oracle == pytest.approx(energies[10])
    assert len(caplog.records) == len(found)


def test_audit_is_silent_for_four_terms(reference, params, caplog):
    states, energies = reference
    inputs = TableInputs(FOUR_TERM, table_from_states(FOUR_TERM, states, range(2, 13)), energies)
    with caplog.at_level(logging.WARNING, logger=LOGGER_NAME):
        assert audit_reduced_hamiltonian(FOUR_TERM, 11, params, inputs, OverlapCalculus(states)) == []
    assert not caplog.records


def test_ad_is_variational(reference, params, seeds):
    _, exact = reference
    result = ad_recursion(FOUR_TERM, params, *seeds, n_target=12)
    assert sorted(result.energies) == [9, 10, 11, 12]
    for n, energy in result.energies.items():
        assert energy >= exact[n] - 1e-9


def test_ad_energy_is_the_energy_of_the_reconstructed_state(params, seeds):
    states, energies = seeds
    result = ad_recursion(FOUR_TERM, params, states, energies, n_target=11)
    psi = to_hamiltonian_frame(reconstruct_state(FOUR_TERM, states, result.table, 11))
    op = build_operator(11, hamiltonian_sector_for(11), params)
    assert float(psi.amplitudes @ op.apply(psi.amplitudes)) == pytest.approx(result.energies[11], abs=1e-9)


def test_larger_basis_lowers_the_first_prediction(params, seeds):
    nine = ad_recursion(NINE_TERM, params, *seeds, n_target=9)
    eleven = ad_recursion(ELEVEN_TERM, params, *seeds, n_target=9)
    assert eleven.energies[9] <= nine.energies[9] + 1e-12


def test_literal_ad_follows_exact_ad_from_exact_seeds(params, seeds):
    exact = ad_recursion(FOUR_TERM, params, *seeds, n_target=10)
    literal = ad_recursion(FOUR_TERM, params, *seeds, n_target=10, transcription="literal")
    for n in (9, 10):
        assert literal.energies[n] == pytest.approx(exact.energies[n], abs=1e-10)


@pytest.mark.parametrize("label,prefix_energy,step", [("0011", 3.2, 4), ("01", 1.2, 2), ("10", 0.0, 2)])
def test_single_term_fixed_weights(params, seeds, label, prefix_energy, step):
    _, energies = seeds
    weights = {name: 0.0 for name in FOUR_TERM.labels}
    weights[label] = 2.0
    result = afw_recursion(FOUR_TERM, params, weights, *seeds, n_target=13)
    chain = dict(energies)
    for n in range(9, 14):
        chain[n] = chain[n - step] + prefix_energy
        assert result.energies[n] == pytest.approx(chain[n], abs=1e-10)


def test_afw_is_variational(reference, params, seeds):
    _, exact = reference
    states, _ = seeds
    table = table_from_states(FOUR_TERM, states, range(2, 9))
    fixed = dict(zip(FOUR_TERM.labels, table.weights_at(8, FOUR_TERM)))
    result = afw_recursion(FOUR_TERM, params, fixed, *seeds, n_target=12)
    for n, energy in result.energies.items():
        assert energy >= exact[n] - 1e-9


def test_literal_afw_energy_at_unit_coupling(params, seeds):
    states, energies = seeds
    calculus = OverlapCalculus(states)
    inputs = CalculusInputs(FOUR_TERM, calculus, energies)
    weights = {"0011": 0.3, "01": 0.5, "10": 0.7, "110": 0.4}
    for n in (9, 10):
        assert abs(audit_afw_energy(FOUR_TERM, n, params, weights, inputs)) < 1e-10


def _synthetic_table(spec, seeds, n_max):
    weights = {label: 1.0 / np.sqrt(len(spec)) for label in spec.labels}
    states = dict(seeds)
    for n in range(max(seeds) + 1, n_max + 1):
        states[n] = reconstruct_state(spec, seeds, weights, n)
    return table_from_states(spec, states, range(2, n_max + 1))


@pytest.mark.parametrize("spec,names,sizes", [
    (FOUR_TERM, ("f",), range(10, 13)),
    (NINE_TERM, ("f", "g", "p"), range(9, 13)),
    (ELEVEN_TERM, ("p",), range(9, 13)),
])
def test_closed_form_recurrences_hold_on_self_similar_states(params, seeds, spec, names, sizes):
    states, _ = seeds
    table = _synthetic_table(spec, states, 12)
    frame = recurrence_residuals(spec, table, params.x, sizes)
    checked = frame[frame["name"].isin(names)]
    assert len(checked) == len(names) * len(sizes)
    assert checked["difference"].abs().max() < 1e-12


def test_recursion_preconditions(params, seeds):
    states, energies = seeds
    with pytest.raises(InvalidParameterError):
        ad_recursion(FOUR_TERM, ModelParams(1.0, 0.1, 0.2), states, energies, 10)
    with pytest.raises(InvalidParameterError):
        ad_recursion(ELEVEN_TERM, params, {n: states[n] for n in range(1, 6)}, energies, 10)
    with pytest.raises(InvalidParameterError):
        ad_recursion(FOUR_TERM, params, states, energies, 10, transcription="loose")
    with pytest.raises(InvalidParameterError):
        afw_recursion(FOUR_TERM, params, {"01": 1.0}, states, energies, 10)


def test_result_frame(params, seeds):
    frame = ad_recursion(FOUR_TERM, params, *seeds, n_target=10).to_frame()
    assert list(frame.columns) == ["N", "energy", "energy_per_site", "method", "spec"]
    assert frame["N"].tolist() == [9, 10]
    assert (frame["method"] == "AD").all()
