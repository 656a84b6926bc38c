import numpy as np
import pytest

from analysis.eigensolver import apply_phase_convention, dense_ground_state, ground_state
from analysis.hamiltonian import ModelParams, build_operator
from utils.errors import ConvergenceError


@pytest.mark.parametrize("x,mu", [(1.0, 0.1), (0.5, -0.4), (2.0, 1.5)])
def test_two_site_closed_form(x, mu):
    op = build_operator(2, 1, ModelParams(x, mu))
    half = (1 + 2 * mu) / 2
    expected = half - np.sqrt(half ** 2 + x ** 2)
    assert ground_state(op).energy == pytest.approx(expected, abs=1e-12)
    assert dense_ground_state(op).energy == pytest.approx(expected, abs=1e-12)


@pytest.mark.parametrize("n_sites", [6, 7, 8, 10])
@pytest.mark.parametrize("x,mu", [(1.0, 0.1), (0.6, -0.7)])
def test_lanczos_matches_dense(n_sites, x, mu):
    op = build_operator(n_sites, (n_sites + 1) // 2, ModelParams(x, mu))
    lanczos = ground_state(op, tol=1e-10)
    dense = dense_ground_state(op)
    assert lanczos.residual <= 1e-10
    assert lanczos.energy == pytest.approx(dense.energy, abs=1e-9)
    overlap = float(lanczos.state.amplitudes @ dense.state.amplitudes)
    assert abs(overlap) == pytest.approx(1.0, abs=1e-9)
    # a deflated Ritz value bounds the first excitation from above
    assert lanczos.gap >= dense.gap - 1e-9


def test_phase_convention_makes_largest_entry_positive():
    v = apply_phase_convention(np.array([0.1, -0.9, 0.3]))
    np.testing.assert_array_equal(v, [-0.1, 0.9, -0.3])
    tie = apply_phase_convention(np.array([-0.5, 0.5]))
    np.testing.assert_array_equal(tie, [0.5, -0.5])


def test_same_seed_is_deterministic():
    op = build_operator(10, 5, ModelParams(1.0, 0.1))
    a, b = ground_state(op, seed=7), ground_state(op, seed=7)
    assert a.energy == b.energy
    np.testing.assert_array_equal(a.state.amplitudes, b.state.amplitudes)


def test_budget_exhaustion_raises():
    op = build_operator(10, 5, ModelParams(1.0, 0.1))
    with pytest.raises(ConvergenceError) as info:
        ground_state(op, max_iter=1, krylov_dim=2)
    assert info.value.best_residual > 1e-10


def test_single_state_sector():
    op = build_operator(3, 0, ModelParams(1.0, 0.1))
    result = ground_state(op)
    assert result.energy == pytest.approx(op.diagonal[0])
    assert result.gap is None and not result.degenerate


@pytest.mark.parametrize("n_sites", [8, 10, 12])
def test_restarted_gap_estimate_converges(n_sites):
    op = build_operator(n_sites, n_sites // 2, ModelParams(1.0, 0.1))
    lanczos = ground_state(op, tol=1e-10)
    assert lanczos.gap == pytest.approx(dense_ground_state(op).gap, abs=1e-6)
