import numpy as np
import pytest

from analysis.ansatz import (ELEVEN_TERM, FOUR_TERM, NINE_TERM, SIX_TERM, AnsatzSpec, AnsatzTerm, WeightTable,
                             ansatz_sector, assemble, coverage_deficit, extract_weight, fidelity, fixed_weights_from,
                             get_spec, prefix_offset, projector_norm, projector_norms, reconstruct_state,
                             table_from_states, validate_spec, weight_series, weights_converged)
from analysis.hamiltonian import ModelParams
from analysis.overlaps import ansatz_gram
from utils.errors import InvalidParameterError, ZeroNormError

ALL_SPECS = [FOUR_TERM, SIX_TERM, NINE_TERM, ELEVEN_TERM]


def test_term_tables():
    assert FOUR_TERM.labels == ["0011", "01", "10", "110"]
    assert [t.flipped for t in FOUR_TERM] == [False, False, False, True]
    assert [len(s) for s in ALL_SPECS] == [4, 6, 9, 11]
    assert [s.max_offset for s in ALL_SPECS] == [4, 6, 6, 8]
    assert set(NINE_TERM.labels) < set(ELEVEN_TERM.labels)


@pytest.mark.parametrize("name,expected", [("4", FOUR_TERM), (6, SIX_TERM), ("9-term", NINE_TERM),
                                           (ELEVEN_TERM, ELEVEN_TERM)])
def test_get_spec(name, expected):
    assert get_spec(name) is expected


def test_unknown_spec():
    with pytest.raises(InvalidParameterError):
        get_spec("5")


@pytest.mark.parametrize("prefix,constant", [
    ("0011", 3), ("01", 1), ("10", 0), ("110", 1), ("11100", 3), ("001011", 5),
    ("100011", 3), ("1001", 1), ("1010", 0), ("10110", 1), ("1011100", 3), ("10001011", 5),
])
def test_prefix_offsets(prefix, constant):
    mu = 0.1
    expected = constant if prefix in ("10", "1010") else constant + 2 * mu
    assert prefix_offset(prefix, ModelParams(1.0, mu)) == pytest.approx(expected)


@pytest.mark.parametrize("terms", [
    (AnsatzTerm("01"), AnsatzTerm("0110")),
    (AnsatzTerm("0011"), AnsatzTerm("0010")),
    (AnsatzTerm("0"), AnsatzTerm("10")),
    (AnsatzTerm("110", flipped=False), AnsatzTerm("01")),
    (AnsatzTerm("0001"), AnsatzTerm("10")),
])
def test_invalid_specs_rejected(terms):
    with pytest.raises(InvalidParameterError):
        validate_spec(AnsatzSpec("bad", terms))


def test_weight_of_a_prefixed_state(random_state):
    tail = random_state(7, ansatz_sector(7), seed=3)
    psi = tail.with_prefix("01")
    assert extract_weight(psi, tail, FOUR_TERM.term("01")) == pytest.approx(1.0)
    assert extract_weight(psi, tail, FOUR_TERM.term("10")) == 0.0


def test_flipped_term_weight(random_state):
    small = random_state(5, ansatz_sector(5), seed=9)
    psi = small.flipped().with_prefix("110")
    assert psi.n_up == ansatz_sector(8)
    assert extract_weight(psi, small, FOUR_TERM.term("110")) == pytest.approx(1.0)


def test_weight_size_mismatch(random_state):
    with pytest.raises(InvalidParameterError):
        extract_weight(random_state(8, 4), random_state(5, 3), FOUR_TERM.term("01"))


def test_weights_bounded_by_projector_norms(reference):
    states, _ = reference
    psi = states[12]
    norms = projector_norms(psi, ELEVEN_TERM)
    assert sum(v * v for v in norms.values()) <= 1.0 + 1e-12
    assert projector_norm(psi, "") == pytest.approx(1.0)
    for term in ELEVEN_TERM:
        weight = extract_weight(psi, states[term.tail_size(12)], term)
        assert abs(weight) <= norms[term.label] + 1e-12


@pytest.mark.parametrize("spec", ALL_SPECS, ids=lambda s: s.name)
@pytest.mark.parametrize("n_sites", [10, 11, 12])
def test_ansatz_basis_is_orthonormal(reference, spec, n_sites):
    states, _ = reference
    np.testing.assert_allclose(ansatz_gram(spec, n_sites, states), np.eye(len(spec)), atol=1e-12)


def test_coverage_deficit():
    assert coverage_deficit([0.0, 0.0]) == 1.0
    assert coverage_deficit({"a": 0.6, "b": 0.8}) == pytest.approx(0.0)


def test_fidelity(random_state):
    a = random_state(6, 3, seed=0)
    assert fidelity(a, a) == pytest.approx(1.0)
    with pytest.raises(InvalidParameterError):
        fidelity(a, random_state(6, 2))


def test_weight_table_is_append_only():
    table = WeightTable("4-term")
    table.set_weights(6, {"01": 0.5, "10": 0.5})
    with pytest.raises(InvalidParameterError):
        table.set_weights(6, {"01": 0.1})
    with pytest.raises(InvalidParameterError):
        table.set_weights(8, {"01": 0.9, "10": 0.9})
    with pytest.raises(InvalidParameterError):
        table.set_aux(6, "q", 0.1)
    with pytest.raises(InvalidParameterError):
        table.weight(7, "01")


def test_weight_table_csv_keeps_labels(tmp_path, reference):
    states, _ = reference
    table = table_from_states(FOUR_TERM, states, range(5, 11))
    path = table.to_csv(str(tmp_path / "weights.csv"))
    restored = WeightTable.read_csv(path, "4-term")
    assert restored.weight(8, "0011") == table.weight(8, "0011")
    assert restored.aux_value(9, "f") == table.aux_value(9, "f")
    assert restored.sizes() == table.sizes()
    assert restored.entries == table.entries
    assert restored.aux == table.aux


def test_weight_series_deficit_is_a_probability(dense_provider, params):
    table = weight_series(params, 6, 10, "4", dense_provider)
    for n in range(6, 11):
        assert -1e-12 <= table.coverage_deficit(n, FOUR_TERM) <= 1.0
    plot = table.to_plot_frame(FOUR_TERM)
    assert plot["normalized"].abs().max() == pytest.approx(1.0)
    assert fixed_weights_from(table, FOUR_TERM).keys() == set(FOUR_TERM.labels)


def test_weights_converged_on_constant_table():
    table = WeightTable("4-term")
    for n in (6, 8, 10):
        table.set_weights(n, dict(zip(FOUR_TERM.labels, [0.5, 0.5, 0.5, 0.5])))
    assert weights_converged(table, FOUR_TERM, 10)
    assert not weights_converged(table, FOUR_TERM, 12)


def _self_similar(spec, seeds, n_max):
    weights = {label: 1.0 / np.sqrt(len(spec)) for label in spec.labels}
    built = {n: reconstruct_state(spec, seeds, weights, n) for n in range(max(seeds) + 1, n_max + 1)}
    return weights, {**seeds, **built}


@pytest.mark.parametrize("spec", ALL_SPECS, ids=lambda s: s.name)
def test_reconstructed_states_reproduce_their_weights(reference, spec):
    states, _ = reference
    seeds = {n: states[n] for n in range(1, 9)}
    weights, synthetic = _self_similar(spec, seeds, 12)
    for n in range(9, 13):
        psi = synthetic[n]
        assert psi.norm() == pytest.approx(1.0, abs=1e-12)
        assert psi.n_up == ansatz_sector(n)
        for term in spec:
            extracted = extract_weight(psi, synthetic[term.tail_size(n)], term)
            assert extracted == pytest.approx(weights[term.label], abs=1e-12)


def test_reconstruction_with_exact_weights_is_faithful(reference):
    states, _ = reference
    seeds = {n: states[n] for n in range(1, 9)}
    table = table_from_states(FOUR_TERM, states, range(2, 10))
    rebuilt = reconstruct_state(FOUR_TERM, seeds, table, 9)
    projected = sum(table.weight(9, label) ** 2 for label in FOUR_TERM.labels)
    assert fidelity(rebuilt, states[9]) == pytest.approx(projected, rel=1e-10)


def test_assembled_projection_overlaps_by_the_covered_weight(reference):
    states, _ = reference
    table = table_from_states(SIX_TERM, states, [12])
    weights = table.weights_at(12, SIX_TERM)
    projection = assemble(SIX_TERM, 12, states, weights)
    covered = float(np.sum(weights ** 2))
    assert projection.norm() ** 2 == pytest.approx(covered, rel=1e-10)
    assert fidelity(projection.normalized(), states[12]) == pytest.approx(covered, rel=1e-10)


def test_reconstruction_needs_seeds(reference):
    states, _ = reference
    with pytest.raises(InvalidParameterError):
        reconstruct_state(FOUR_TERM, {1: states[1], 2: states[2]}, {label: 0.5 for label in FOUR_TERM.labels}, 12)


def test_zero_weights_have_no_state(reference):
    states, _ = reference
    seeds = {n: states[n] for n in range(1, 9)}
    with pytest.raises(ZeroNormError):
        reconstruct_state(FOUR_TERM, seeds, {label: 0.0 for label in FOUR_TERM.labels}, 10)
