"""
Overlap calculus for self-similar states and the projected ansatz Hamiltonian.

An overlap Ov(q, c, B) = <q (x) T^c Psi_(B-|q|) | Psi_B> is evaluated either
directly from an explicit seed state of size B, or by expanding Psi_B into its
ansatz terms and recursing on smaller sizes. Values are memoized, so every
matrix element of the projected Hamiltonian costs a handful of dictionary
lookups once the tables are warm.
"""
import logging
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from analysis.ansatz import (AnsatzSpec, AnsatzTerm, ansatz_sector, basis_vector, get_spec,
                             hamiltonian_sector_for, prefix_offset)
from analysis.hamiltonian import ModelParams, build_operator
from data.sector_basis import SectorState
from utils.errors import InvalidParameterError
from utils.helpers import LOGGER_NAME, complement

logger = logging.getLogger(LOGGER_NAME)

Expansion = Sequence[Tuple[AnsatzTerm, float]]


class OverlapCalculus:
    """Memoized overlaps between prefixed reference states.

    Args:
        seeds: Explicit ansatz-frame states by size; they take precedence
        expander: Optional fallback giving the ansatz expansion of a size
    """

    def __init__(self, seeds: Mapping[int, SectorState],
                 expander: Optional[Callable[[int], Optional[Expansion]]] = None):
        self.seeds = dict(seeds)
        self._expander = expander
        self._expansions: Dict[int, List[Tuple[AnsatzTerm, float]]] = {}
        self._memo: Dict[Tuple[str, int, int], float] = {}

    def register(self, n_sites: int, spec: AnsatzSpec, weights: Sequence[float]) -> None:
        """Record Psi_N = sum_s W_s phi_s for a newly computed size."""
        if n_sites in self._expansions:
            raise InvalidParameterError(f"Expansion for N={n_sites} already registered")
        self._expansions[n_sites] = [(t, float(w)) for t, w in zip(spec.terms, weights)]

    def expansion(self, n_sites: int) -> Optional[Expansion]:
        if n_sites in self._expansions:
            return self._expansions[n_sites]
        return self._expander(n_sites) if self._expander is not None else None

    @staticmethod
    def _ones(q: str, flipped: int, size: int) -> int:
        if size == 0:
            return q.count("1")
        tail = ansatz_sector(size)
        return q.count("1") + (size - tail if flipped else tail)

    def overlap(self, q: str, flipped: int, n_sites: int) -> float:
        """<q (x) T^flipped Psi_(n_sites-|q|) | Psi_(n_sites)>."""
        flipped = int(bool(flipped))
        size = n_sites - len(q)
        if size < 0:
            raise InvalidParameterError(f"Prefix {q} longer than {n_sites} sites")
        if self._ones(q, flipped, size) != ansatz_sector(n_sites):
            return 0.0
        if q == "" and not flipped:
            return 1.0
        key = (q, flipped, n_sites)
        if key not in self._memo:
            if n_sites in self.seeds:
                self._memo[key] = self._direct(q, flipped, n_sites)
            else:
                self._memo[key] = self._expand(q, flipped, n_sites)
        return self._memo[key]

    def _direct(self, q: str, flipped: int, n_sites: int) -> float:
        psi = self.seeds[n_sites]
        size = n_sites - len(q)
        if size == 0:
            return float(psi.amplitudes[psi.basis.index_of(q)])
        if size not in self.seeds:
            raise InvalidParameterError(f"Missing seed state for N={size}")
        tail = self.seeds[size].flipped() if flipped else self.seeds[size]
        return float(psi.prefix_block(q) @ tail.amplitudes)

    def _expand(self, q: str, flipped: int, n_sites: int) -> float:
        terms = self.expansion(n_sites)
        if terms is None:
            raise InvalidParameterError(f"No seed or expansion for N={n_sites}")
        size = n_sites - len(q)
        total = 0.0
        for term, weight in terms:
            if weight == 0.0:
                continue
            s, f = term.prefix, int(term.flipped)
            common = min(len(q), len(s))
            if q[:common] != s[:common]:
                continue
            if len(q) == len(s):
                value = 1.0 if (flipped == f or size == 0) else self.overlap("", 1, size)
            elif len(q) < len(s):
                rest = s[len(q):]
                value = self.overlap(complement(rest) if flipped else rest, flipped ^ f, size)
            else:
                rest = q[len(s):]
                value = self.overlap(complement(rest) if f else rest, flipped ^ f, n_sites - len(s))
            total += weight * value
        return total

    def weight(self, term: AnsatzTerm, n_sites: int) -> float:
        """W_s^N seen through the calculus."""
        return self.overlap(term.prefix, term.flipped, n_sites)

    def aux(self, n_sites: int) -> Dict[str, float]:
        """f_N, g_N and p_N where defined."""
        values = {}
        for name, q, c in (("f", "1", 1), ("g", "10", 0), ("p", "101", 1)):
            if n_sites - len(q) >= 1:
                values[name] = self.overlap(q, c, n_sites)
        return values

    def state_overlap(self, pa: str, fa: int, size_a: int, pb: str, fb: int, size_b: int) -> float:
        """<pa T^fa Psi_(size_a) | pb T^fb Psi_(size_b)> for chains of equal length."""
        common = min(len(pa), len(pb))
        if pa[:common] != pb[:common]:
            return 0.0
        fa, fb = int(bool(fa)), int(bool(fb))
        if len(pa) == len(pb):
            return 1.0 if fa == fb else self.overlap("", 1, size_a)
        if len(pa) < len(pb):
            rest = pb[len(pa):]
            return self.overlap(complement(rest) if fa else rest, fa ^ fb, size_a)
        rest = pa[len(pb):]
        return self.overlap(complement(rest) if fb else rest, fa ^ fb, size_b)


def _hop(prefix: str, bond: int) -> Optional[str]:
    """Swap sites (bond, bond+1) of prefix; None when they are equal."""
    a, b = prefix[bond], prefix[bond + 1]
    if a == b:
        return None
    return prefix[:bond] + b + a + prefix[bond + 2:]


def hopping_element(a: AnsatzTerm, b: AnsatzTerm, n_sites: int, params: ModelParams,
                    calculus: OverlapCalculus) -> float:
    """<phi_a | x sum_n (s+_n s-_(n+1) + h.c.) | phi_b> for distinct terms."""
    first_diff = next((k for k, (u, v) in enumerate(zip(a.prefix, b.prefix)) if u != v), None)
    if first_diff is None:
        raise InvalidParameterError(f"Prefixes {a.prefix} and {b.prefix} are not exclusive")
    size_a, size_b = a.tail_size(n_sites), b.tail_size(n_sites)
    total = 0.0
    for bond in range(n_sites - 1):
        if bond + 1 < b.offset:
            hopped = _hop(b.prefix, bond)
            if hopped is not None:
                total += calculus.state_overlap(a.prefix, a.flipped, size_a, hopped, b.flipped, size_b)
        elif bond + 1 < a.offset:
            hopped = _hop(a.prefix, bond)
            if hopped is not None:
                total += calculus.state_overlap(hopped, a.flipped, size_a, b.prefix, b.flipped, size_b)
        elif first_diff < bond:
            # both bond sites lie in the tails; the prefixes already disagree
            break
        else:
            raise InvalidParameterError(f"Prefixes {a.prefix} and {b.prefix} differ only at the boundary")
    return params.x * total


def _require_energies(spec: AnsatzSpec, n_sites: int, energies: Mapping[int, float]) -> None:
    missing = sorted({t.tail_size(n_sites) for t in spec.terms} - set(energies))
    if missing:
        raise InvalidParameterError(f"Energies missing for sizes {missing}")


def projected_hamiltonian(spec, n_sites: int, params: ModelParams, energies: Mapping[int, float],
                          calculus: OverlapCalculus) -> np.ndarray:
    """Ansatz-basis matrix <phi_i|H|phi_j> from energies and the overlap calculus."""
    spec = get_spec(spec)
    if params.epsilon0 != 0.0:
        raise InvalidParameterError("The ansatz recursion requires epsilon0 = 0")
    if n_sites <= spec.max_offset:
        raise InvalidParameterError(f"N={n_sites} too small for the {spec.name} ansatz")
    _require_energies(spec, n_sites, energies)
    k = len(spec)
    matrix = np.zeros((k, k))
    for i, term in enumerate(spec.terms):
        matrix[i, i] = energies[term.tail_size(n_sites)] + prefix_offset(term.prefix, params)
    for i in range(k):
        for j in range(i + 1, k):
            value = hopping_element(spec.terms[i], spec.terms[j], n_sites, params, calculus)
            matrix[i, j] = matrix[j, i] = value
    return matrix


def ansatz_basis(spec, n_sites: int, states: Mapping[int, SectorState]) -> np.ndarray:
    """Columns are the explicit ansatz basis vectors phi_s."""
    spec = get_spec(spec)
    return np.column_stack([basis_vector(t, n_sites, states).amplitudes for t in spec.terms])


def explicit_reduced_hamiltonian(spec, n_sites: int, params: ModelParams,
                                 states: Mapping[int, SectorState]) -> np.ndarray:
    """Phi^T H Phi with H applied to explicit vectors; the oracle for the calculus."""
    spec = get_spec(spec)
    phi = ansatz_basis(spec, n_sites, states)
    op = build_operator(n_sites, hamiltonian_sector_for(n_sites), params)
    # the ansatz frame Hamiltonian is T H T; flipping reverses the sector order
    h_phi = np.column_stack([op.apply(col[::-1].copy())[::-1] for col in phi.T])
    matrix = phi.T @ h_phi
    return 0.5 * (matrix + matrix.T)


def ansatz_gram(spec, n_sites: int, states: Mapping[int, SectorState]) -> np.ndarray:
    phi = ansatz_basis(spec, n_sites, states)
    return phi.T @ phi
