"""
Lowest eigenpair of a sector Hamiltonian.

Restarted Lanczos with full reorthogonalization for production use and a dense
eigendecomposition as the small-size oracle.
"""
import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
import scipy.linalg

from analysis.hamiltonian import SectorOperator, dense_matrix
from config import config
from data.sector_basis import SectorState
from utils.errors import ConvergenceError, InvalidParameterError
from utils.helpers import LOGGER_NAME

logger = logging.getLogger(LOGGER_NAME)

PHASE_CONVENTION = "max-abs-positive/lowest-index"


@dataclass(frozen=True)
class GroundStateResult:
    """Lowest eigenpair plus solver diagnostics."""

    energy: float
    state: SectorState
    residual: float
    n_iterations: int
    gap: Optional[float] = None
    degenerate: bool = False


def apply_phase_convention(vector: np.ndarray) -> np.ndarray:
    """Flip the sign so the largest-magnitude entry is positive.

    Entries within 1e-12 (relative) of the maximum count as ties; the one with
    the lowest index decides.
    """
    vector = np.asarray(vector, dtype=np.float64)
    magnitudes = np.abs(vector)
    peak = magnitudes.max() if magnitudes.size else 0.0
    if peak == 0.0:
        return vector.copy()
    lead = int(np.argmax(magnitudes >= peak * (1.0 - 1e-12)))
    return -vector if vector[lead] < 0 else vector.copy()


def _residual(op: SectorOperator, vector: np.ndarray, energy: float) -> float:
    return float(np.linalg.norm(op.apply(vector) - energy * vector))


def _lanczos_cycle(op: SectorOperator, start: np.ndarray, krylov_dim: int, deflate: Optional[np.ndarray] = None):
    """One Lanczos cycle with full (twice) reorthogonalization.

    Returns Ritz values, the lowest Ritz vector and the number of matvecs.
    With deflate given, the Krylov space is kept orthogonal to that vector.
    """
    n = start.shape[0]
    m = min(krylov_dim, n)
    basis = np.empty((m, n))
    alphas, betas = [], []
    v = start / np.linalg.norm(start)
    basis[0] = v
    matvecs = 0
    k = 0
    for j in range(m):
        w = op.apply(basis[j])
        matvecs += 1
        alpha = float(basis[j] @ w)
        alphas.append(alpha)
        k = j + 1
        for _ in range(2):
            w -= basis[:k].T @ (basis[:k] @ w)
            if deflate is not None:
                w -= deflate * (deflate @ w)
        beta = float(np.linalg.norm(w))
        if j == m - 1 or beta <= 1e-12 * max(1.0, abs(alpha)):
            break
        betas.append(beta)
        basis[k] = w / beta
    alphas = np.array(alphas)
    if k == 1:
        theta = alphas.copy()
        coeffs = np.ones((1, 1))
    else:
        theta, coeffs = scipy.linalg.eigh_tridiagonal(alphas, np.array(betas[:k - 1]))
    ritz = basis[:k].T @ coeffs[:, 0]
    return theta, ritz / np.linalg.norm(ritz), matvecs


def _estimate_gap(op: SectorOperator, ground: np.ndarray, energy: float, krylov_dim: int,
                  rng: np.random.Generator, tol: float) -> Tuple[Optional[float], int]:
    """First excitation gap from Lanczos cycles deflated against the ground state.

    Cycles restart from the excited Ritz vector until its residual drops below
    sqrt(tol) or GAP_MAX_CYCLES is spent. The Ritz value never undershoots the
    first excited energy, so an unconverged estimate is an upper bound.

    Returns:
        (gap, matvecs); gap is None for single-state sectors
    """
    if op.size < 2:
        return None, 0
    start = rng.standard_normal(op.size)
    start -= ground * (ground @ start)
    if np.linalg.norm(start) == 0.0:
        return None, 0
    matvecs = 0
    for _ in range(config.GAP_MAX_CYCLES):
        theta, ritz, used = _lanczos_cycle(op, start, krylov_dim, deflate=ground)
        matvecs += used + 1
        if _residual(op, ritz, float(theta[0])) <= np.sqrt(tol):
            break
        start = ritz
    else:
        logger.info(f"Gap estimate for N={op.n_sites} stopped after {config.GAP_MAX_CYCLES} cycles")
    return float(theta[0] - energy), matvecs


def ground_state(op: SectorOperator, tol: Optional[float] = None, max_iter: Optional[int] = None,
                 seed: int = 0, krylov_dim: Optional[int] = None,
                 estimate_gap: Optional[bool] = None) -> GroundStateResult:
    """Lowest eigenpair by restarted Lanczos.

    Args:
        op: Sector Hamiltonian
        tol: Residual tolerance on ||Hv - Ev||
        max_iter: Total matrix-vector product budget
        seed: Seed of the random start vector
        krylov_dim: Krylov space dimension per restart cycle
        estimate_gap: Run a deflated pass to estimate the gap

    Returns:
        GroundStateResult with the phase convention applied
    """
    tol = config.SOLVER_TOL if tol is None else tol
    max_iter = config.SOLVER_MAX_ITER if max_iter is None else max_iter
    krylov_dim = config.KRYLOV_DIM if krylov_dim is None else krylov_dim
    estimate_gap = config.ESTIMATE_GAP if estimate_gap is None else estimate_gap
    if tol <= 0:
        raise InvalidParameterError(f"tol must be positive, got {tol}")
    if op.size == 0:
        raise InvalidParameterError("Empty sector")

    rng = np.random.default_rng(seed)
    vector = rng.standard_normal(op.size)
    total = 0
    best_residual = np.inf
    energy = np.inf
    while True:
        theta, vector, used = _lanczos_cycle(op, vector, krylov_dim)
        total += used
        energy = float(theta[0])
        residual = _residual(op, vector, energy)
        total += 1
        best_residual = min(best_residual, residual)
        if residual <= tol:
            break
        if total >= max_iter:
            raise ConvergenceError(f"Lanczos did not converge for N={op.n_sites}", best_residual, total)

    vector = apply_phase_convention(vector)
    energy = float(vector @ op.apply(vector))
    gap = None
    if estimate_gap:
        gap, used = _estimate_gap(op, vector, energy, krylov_dim, rng, tol)
        total += used
    degenerate = gap is not None and gap < config.DEGENERACY_GAP
    if degenerate:
        logger.warning(f"Degenerate ground state flagged for N={op.n_sites}, n_up={op.basis.n_up} (gap {gap:.2e})")
    logger.info(f"Lanczos N={op.n_sites} n_up={op.basis.n_up}: E={energy:.12f}, "
                f"residual={residual:.2e}, matvecs={total}")
    return GroundStateResult(energy=energy, state=SectorState(op.basis, vector), residual=residual,
                             n_iterations=total, gap=gap, degenerate=degenerate)


def dense_ground_state(op: SectorOperator, limit: Optional[int] = None) -> GroundStateResult:
    """Lowest eigenpair from a full symmetric eigendecomposition."""
    matrix = dense_matrix(op, limit=limit)
    values, vectors = scipy.linalg.eigh(matrix)
    vector = apply_phase_convention(vectors[:, 0])
    energy = float(values[0])
    gap = float(values[1] - values[0]) if len(values) > 1 else None
    degenerate = gap is not None and gap < config.DEGENERACY_GAP
    if degenerate:
        logger.warning(f"Degenerate ground state flagged for N={op.n_sites}, n_up={op.basis.n_up}")
    return GroundStateResult(energy=energy, state=SectorState(op.basis, vector),
                             residual=_residual(op, vector, energy), n_iterations=1,
                             gap=gap, degenerate=degenerate)
