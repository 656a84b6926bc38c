"""
Spin Hamiltonian of the lattice Schwinger model restricted to a charge sector.

    H = x * sum_n (s+_n s-_{n+1} + h.c.)
        + (mu/2) * sum_n (1 + (-1)^n sz_n)
        + sum_{n=0}^{N-2} (eps0 + L_n)^2,   L_n = 1/2 sum_{l<=n} (sz_l + (-1)^l)

The hopping part is generated on the fly from bit patterns; the diagonal is
precomputed once per (basis, params).
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Optional, Tuple, Union

import numpy as np
import scipy.sparse as sp

from config import config
from data.sector_basis import SectorBasis, build_sector
from utils.errors import InvalidParameterError
from utils.helpers import LOGGER_NAME, str_to_bits

logger = logging.getLogger(LOGGER_NAME)


@dataclass(frozen=True)
class ModelParams:
    """Couplings x = 1/(g^2 a^2), mu = 2m/(g^2 a) and background field eps0."""

    x: float
    mu: float
    epsilon0: float = 0.0

    def __post_init__(self):
        for name in ("x", "mu", "epsilon0"):
            value = float(getattr(self, name))
            if not np.isfinite(value):
                raise InvalidParameterError(f"{name} must be finite, got {value}")
            object.__setattr__(self, name, value)
        if self.x < 0:
            raise InvalidParameterError(f"x must be nonnegative, got {self.x}")


def diagonal_energies(states: np.ndarray, n_sites: int, params: ModelParams) -> np.ndarray:
    """Mass plus electric energy of every configuration in states.

    Twice the cumulative charge 2L_n is accumulated in integers; the electric
    term is expanded as (N-1) eps0^2 + eps0 * sum 2L_n + sum (2L_n)^2 / 4 so the
    eps0 = 0 case is exact.
    """
    states = np.asarray(states, dtype=np.int64)
    twice_charge = np.zeros(states.shape, dtype=np.int64)
    sum_twice = np.zeros(states.shape, dtype=np.int64)
    sum_twice_sq = np.zeros(states.shape, dtype=np.int64)
    mass_sites = np.zeros(states.shape, dtype=np.int64)
    for n in range(n_sites):
        sigma = 2 * ((states >> (n_sites - 1 - n)) & 1) - 1
        stagger = 1 if n % 2 == 0 else -1
        twice_charge += sigma + stagger
        mass_sites += (stagger * sigma == 1)
        if n <= n_sites - 2:
            sum_twice += twice_charge
            sum_twice_sq += twice_charge * twice_charge
    eps = params.epsilon0
    electric = sum_twice_sq / 4.0
    if eps != 0.0:
        electric = electric + eps * sum_twice + (n_sites - 1) * eps * eps
    return params.mu * mass_sites + electric


def diagonal_energy(bitstring: Union[str, int], params: ModelParams, n_sites: Optional[int] = None) -> float:
    """Diagonal energy of a single configuration (bitstring, site 0 first)."""
    if isinstance(bitstring, str):
        n_sites = len(bitstring)
        value = str_to_bits(bitstring)
    else:
        if n_sites is None:
            raise InvalidParameterError("n_sites required for integer configurations")
        value = int(bitstring)
    if n_sites == 0:
        return 0.0
    return float(diagonal_energies(np.array([value]), n_sites, params)[0])


class SectorOperator:
    """Matrix-free Hamiltonian on one charge sector.

    apply() may split the output index range over worker threads. Each output
    element is always summed in the same order (diagonal, then bonds 0..N-2),
    so results are bit-identical for any worker count.
    """

    def __init__(self, basis: SectorBasis, params: ModelParams, workers: Optional[int] = None,
                 bond_table_limit: Optional[int] = None):
        self.basis = basis
        self.params = params
        self.workers = max(1, workers if workers is not None else config.MATVEC_WORKERS)
        self.diagonal = diagonal_energies(basis.states, basis.n_sites, params)
        self.diagonal.setflags(write=False)
        limit = config.BOND_TABLE_LIMIT if bond_table_limit is None else bond_table_limit
        self._bonds: Optional[List[Tuple[np.ndarray, np.ndarray]]] = None
        if len(basis) <= limit:
            self._bonds = [self._bond_pairs(n, 0, len(basis)) for n in range(basis.n_sites - 1)]

    @property
    def size(self) -> int:
        return len(self.basis)

    @property
    def n_sites(self) -> int:
        return self.basis.n_sites

    def _bond_pairs(self, bond: int, lo: int, hi: int) -> Tuple[np.ndarray, np.ndarray]:
        """Rows in [lo, hi) whose sites (bond, bond+1) differ, and their partners."""
        shift = self.n_sites - 2 - bond
        states = self.basis.states[lo:hi]
        pair = (states >> shift) & 3
        flippable = (pair == 1) | (pair == 2)
        rows = np.nonzero(flippable)[0] + lo
        partners = np.searchsorted(self.basis.states, states[flippable] ^ np.int64(3 << shift))
        index_type = np.int32 if self.size < 2 ** 31 else np.int64
        return rows.astype(index_type), partners.astype(index_type)

    def _apply_rows(self, v: np.ndarray, out: np.ndarray, lo: int, hi: int) -> None:
        out[lo:hi] = self.diagonal[lo:hi] * v[lo:hi]
        x = self.params.x
        if x == 0.0:
            return
        for bond in range(self.n_sites - 1):
            if self._bonds is not None:
                rows, partners = self._bonds[bond]
                if lo != 0 or hi != self.size:
                    a, b = np.searchsorted(rows, [lo, hi])
                    rows, partners = rows[a:b], partners[a:b]
            else:
                rows, partners = self._bond_pairs(bond, lo, hi)
            out[rows] += x * v[partners]

    def apply(self, v: np.ndarray, workers: Optional[int] = None) -> np.ndarray:
        """Return H v within the sector."""
        v = np.asarray(v, dtype=np.float64)
        if v.shape != (self.size,):
            raise InvalidParameterError(f"Vector of shape {v.shape} does not match sector size {self.size}")
        out = np.empty(self.size)
        n_workers = min(workers or self.workers, self.size)
        if n_workers <= 1:
            self._apply_rows(v, out, 0, self.size)
            return out
        edges = np.linspace(0, self.size, n_workers + 1).astype(int)
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            futures = [pool.submit(self._apply_rows, v, out, int(a), int(b))
                       for a, b in zip(edges[:-1], edges[1:]) if b > a]
            for future in futures:
                future.result()
        return out

    __matmul__ = apply

    def hopping_counts(self) -> np.ndarray:
        """Number of flippable (01/10) bonds of every basis state."""
        counts = np.zeros(self.size, dtype=np.int64)
        for bond in range(self.n_sites - 1):
            rows, _ = self._bond_pairs(bond, 0, self.size)
            counts[rows] += 1
        return counts

    def sparse_matrix(self) -> sp.csr_matrix:
        rows = [np.arange(self.size)]
        cols = [np.arange(self.size)]
        vals = [np.asarray(self.diagonal)]
        if self.params.x != 0.0:
            for bond in range(self.n_sites - 1):
                r, c = self._bond_pairs(bond, 0, self.size)
                rows.append(r)
                cols.append(c)
                vals.append(np.full(len(r), self.params.x))
        return sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                             shape=(self.size, self.size))


def build_operator(n_sites: int, n_up: int, params: ModelParams, workers: Optional[int] = None) -> SectorOperator:
    return SectorOperator(build_sector(n_sites, n_up), params, workers=workers)


def dense_matrix(op: SectorOperator, limit: Optional[int] = None) -> np.ndarray:
    """Explicit symmetric matrix of the sector operator (small sectors only)."""
    limit = config.DENSE_LIMIT if limit is None else limit
    if op.size > limit:
        raise InvalidParameterError(f"Sector of size {op.size} exceeds dense limit {limit}")
    matrix = np.diag(np.asarray(op.diagonal, dtype=np.float64))
    if op.params.x != 0.0:
        for bond in range(op.n_sites - 1):
            rows, partners = op._bond_pairs(bond, 0, op.size)
            matrix[rows, partners] = op.params.x
    return matrix


def full_space_matrix(n_sites: int, params: ModelParams) -> sp.csr_matrix:
    """Reference Hamiltonian on the whole 2^N space built from Pauli products.

    Site 0 is the leftmost Kronecker factor; basis index = configuration integer.
    """
    if n_sites > 16:
        raise InvalidParameterError("Full-space reference limited to 16 sites")
    eye = sp.identity(2, format="csr")
    raise_op = sp.csr_matrix(np.array([[0.0, 0.0], [1.0, 0.0]]))  # |1><0|
    sz = sp.csr_matrix(np.diag([-1.0, 1.0]))  # bit 1 is spin up

    def embed(ops):
        result = sp.identity(1, format="csr")
        for k in range(n_sites):
            result = sp.kron(result, ops.get(k, eye), format="csr")
        return result

    dim = 1 << n_sites
    ham = sp.csr_matrix((dim, dim))
    for n in range(n_sites - 1):
        hop = embed({n: raise_op, n + 1: raise_op.T})
        ham = ham + params.x * (hop + hop.T)
    identity = sp.identity(dim, format="csr")
    for n in range(n_sites):
        ham = ham + 0.5 * params.mu * (identity + (-1) ** n * embed({n: sz}))
    charge = sp.csr_matrix((dim, dim))
    for n in range(n_sites - 1):
        charge = charge + 0.5 * (embed({n: sz}) + (-1) ** n * identity)
        field = params.epsilon0 * identity + charge
        ham = ham + field @ field
    return ham.tocsr()
