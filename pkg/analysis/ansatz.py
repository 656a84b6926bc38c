"""
Fractal ansatz terms, weight extraction and recursive state reconstruction.

A term |prefix> (x) T^f |Psi_{N-len(prefix)}> fixes the first sites and reuses
the ground state of a smaller chain, bit-flipped when f is set.

The term tables use the qubit convention Z|1> = -|1>, the bit complement of
the Hamiltonian convention (bit 1 = spin up). The ansatz therefore works in the
"ansatz frame": reference states are globally bit-flipped Hamiltonian-frame
ground states, and H_ansatz = T H T has the same spectrum. In that frame every
prefix below carries zero electric flux at its boundary, so the diagonal of the
projected Hamiltonian is E_{N-offset} plus a prefix constant.
"""
import logging
from dataclasses import dataclass
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from analysis.hamiltonian import ModelParams, diagonal_energy
from config import config
from data.sector_basis import SectorState, canonical_sector_for
from utils.errors import DegenerateGroundStateError, InvalidParameterError, ZeroNormError
from utils.helpers import LOGGER_NAME, complement, write_json

logger = logging.getLogger(LOGGER_NAME)

AUX_NAMES = ("f", "g", "p")


@dataclass(frozen=True)
class AnsatzTerm:
    """Fixed prefix followed by a (possibly flipped) smaller ground state."""

    prefix: str
    flipped: bool = False

    @property
    def offset(self) -> int:
        return len(self.prefix)

    @property
    def label(self) -> str:
        return self.prefix

    def tail_size(self, n_sites: int) -> int:
        return n_sites - self.offset

    def applies_to(self, n_sites: int) -> bool:
        return n_sites - self.offset >= 1

    def __str__(self) -> str:
        return f"|{self.prefix}>{'T' if self.flipped else ''}Psi_(N-{self.offset})"


@dataclass(frozen=True)
class AnsatzSpec:
    """Ordered set of ansatz terms."""

    name: str
    terms: Tuple[AnsatzTerm, ...]

    def __len__(self) -> int:
        return len(self.terms)

    def __iter__(self):
        return iter(self.terms)

    @property
    def labels(self) -> List[str]:
        return [t.label for t in self.terms]

    @property
    def max_offset(self) -> int:
        return max(t.offset for t in self.terms)

    def index(self, label: str) -> int:
        return self.labels.index(label)

    def term(self, label: str) -> AnsatzTerm:
        return self.terms[self.index(label)]

    def applicable(self, n_sites: int) -> List[AnsatzTerm]:
        return [t for t in self.terms if t.applies_to(n_sites)]


def _terms(*items: str) -> Tuple[AnsatzTerm, ...]:
    return tuple(AnsatzTerm(item.rstrip("T"), item.endswith("T")) for item in items)


FOUR_TERM = AnsatzSpec("4-term", _terms("0011", "01", "10", "110T"))
SIX_TERM = AnsatzSpec("6-term", _terms("001011", "0011", "01", "10", "110T", "11100T"))
NINE_TERM = AnsatzSpec("9-term", _terms("001011", "0011", "01", "100011", "1001", "1010",
                                        "10110T", "110T", "11100T"))
ELEVEN_TERM = AnsatzSpec("11-term", _terms("001011", "0011", "01", "10001011", "100011", "1001", "1010",
                                           "10110T", "1011100T", "110T", "11100T"))

SPECS = {spec.name: spec for spec in (FOUR_TERM, SIX_TERM, NINE_TERM, ELEVEN_TERM)}


def get_spec(name: Union[str, int, AnsatzSpec]) -> AnsatzSpec:
    """Look up a spec by name ('6-term'), number of terms (6) or pass one through."""
    if isinstance(name, AnsatzSpec):
        return name
    key = str(name).strip()
    if not key.endswith("-term"):
        key = f"{key}-term"
    if key not in SPECS:
        raise InvalidParameterError(f"Unknown ansatz spec {name!r}; choose from {sorted(SPECS)}")
    return SPECS[key]


# Frames

def ansatz_sector(n_sites: int) -> int:
    """Number of ones of an ansatz-frame reference state."""
    return canonical_sector_for(n_sites)


def hamiltonian_sector_for(n_sites: int) -> int:
    """Hamiltonian-frame sector whose flip is the ansatz-frame reference sector."""
    return n_sites - ansatz_sector(n_sites)


def to_ansatz_frame(state: SectorState) -> SectorState:
    return state.flipped()


def to_hamiltonian_frame(state: SectorState) -> SectorState:
    return state.flipped()


def tail_ones(term: AnsatzTerm, n_sites: int) -> int:
    size = term.tail_size(n_sites)
    ones = ansatz_sector(size)
    return size - ones if term.flipped else ones


def prefix_flux(prefix: str) -> int:
    """Twice the electric flux L at the last prefix site, in the ansatz frame."""
    twice = 0
    for n, bit in enumerate(prefix):
        sigma = 1 - 2 * int(bit)
        twice += sigma + (1 if n % 2 == 0 else -1)
    return twice


def prefix_offset(prefix: str, params: ModelParams) -> float:
    """Diagonal energy carried by the prefix sites, including its boundary link."""
    flux = prefix_flux(prefix) / 2.0
    return diagonal_energy(complement(prefix), params) + (params.epsilon0 + flux) ** 2


def validate_spec(spec: AnsatzSpec) -> None:
    """Check the structural invariants every spec must satisfy."""
    for term in spec.terms:
        if term.offset < 2:
            raise InvalidParameterError(f"{spec.name}: prefix {term.prefix} shorter than 2")
        if prefix_flux(term.prefix) != 0:
            raise InvalidParameterError(f"{spec.name}: prefix {term.prefix} leaves nonzero flux")
        if term.flipped != (term.offset % 2 == 1):
            raise InvalidParameterError(f"{spec.name}: odd prefixes take flipped tails ({term.prefix})")
        for n_sites in (spec.max_offset + 1, spec.max_offset + 2):
            if term.prefix.count("1") + tail_ones(term, n_sites) != ansatz_sector(n_sites):
                raise InvalidParameterError(f"{spec.name}: term {term} breaks charge balance at N={n_sites}")
    for i, a in enumerate(spec.terms):
        for b in spec.terms[i + 1:]:
            common = min(a.offset, b.offset)
            if a.prefix[:common] == b.prefix[:common]:
                raise InvalidParameterError(f"{spec.name}: prefixes {a.prefix} and {b.prefix} overlap")
            if a.offset == b.offset and a.prefix[:-1] == b.prefix[:-1]:
                raise InvalidParameterError(f"{spec.name}: prefixes {a.prefix} and {b.prefix} differ only at the boundary")


for _spec in SPECS.values():
    validate_spec(_spec)


# Weights and overlaps

def prefixed_overlap(psi: SectorState, prefix: str, tail: SectorState) -> float:
    """<prefix (x) tail | psi>; zero when the charges do not match."""
    if tail.n_sites + len(prefix) != psi.n_sites:
        raise InvalidParameterError(
            f"Tail of {tail.n_sites} sites and prefix {prefix} do not make {psi.n_sites} sites")
    if tail.n_up + prefix.count("1") != psi.n_up:
        return 0.0
    return float(psi.prefix_block(prefix) @ tail.amplitudes)


def extract_weight(psi_n: SectorState, psi_small: SectorState, term: AnsatzTerm) -> float:
    """Signed weight <prefix| <T^f psi_small | psi_n>."""
    tail = psi_small.flipped() if term.flipped else psi_small
    if tail.n_sites != psi_n.n_sites - term.offset:
        raise InvalidParameterError(f"Size mismatch for term {term}: {psi_n.n_sites} vs {psi_small.n_sites}")
    if tail.n_up + term.prefix.count("1") != psi_n.n_up:
        raise InvalidParameterError(f"Sector mismatch for term {term}")
    return prefixed_overlap(psi_n, term.prefix, tail)


def projector_norm(psi_n: SectorState, prefix: str) -> float:
    """||P_prefix psi_n||."""
    return float(np.linalg.norm(psi_n.prefix_block(prefix)))


def projector_norms(psi_n: SectorState, spec: AnsatzSpec) -> Dict[str, float]:
    return {t.label: projector_norm(psi_n, t.prefix) for t in spec.applicable(psi_n.n_sites)}


def fidelity(a: SectorState, b: SectorState) -> float:
    """|<a|b>|^2 for unit states over the same sector."""
    if a.n_sites != b.n_sites or a.n_up != b.n_up:
        raise InvalidParameterError("Fidelity needs states over the same sector")
    return float(min(1.0, (a.amplitudes @ b.amplitudes) ** 2))


def coverage_deficit(weights: Union[Mapping[str, float], Iterable[float]]) -> float:
    """1 - sum W^2: probability mass outside the ansatz basis."""
    values = weights.values() if isinstance(weights, Mapping) else weights
    return float(1.0 - np.sum(np.square(np.fromiter(values, dtype=float))))


def basis_vector(term: AnsatzTerm, n_sites: int, states: Mapping[int, SectorState]) -> SectorState:
    """Explicit |prefix> (x) T^f |Psi_{N-offset}> from ansatz-frame states."""
    size = term.tail_size(n_sites)
    if size not in states:
        raise InvalidParameterError(f"No reference state of size {size} for term {term}")
    tail = states[size].flipped() if term.flipped else states[size]
    return tail.with_prefix(term.prefix)


class WeightTable:
    """Signed weights W_s^N and auxiliary overlaps f, g, p indexed by N.

    Append-only: a value, once set, cannot be replaced.
    """

    def __init__(self, spec_name: Optional[str] = None):
        self.spec_name = spec_name
        self.entries: Dict[Tuple[int, str], float] = {}
        self.aux: Dict[Tuple[int, str], float] = {}

    def _store(self, target: Dict, key: Tuple[int, str], value: float) -> None:
        value = float(value)
        if not np.isfinite(value):
            raise InvalidParameterError(f"Non-finite value for {key}")
        if key in target:
            raise InvalidParameterError(f"Entry {key} already recorded")
        target[key] = value

    def set_weights(self, n_sites: int, weights: Mapping[str, float]) -> None:
        squares = sum(float(w) ** 2 for w in weights.values())
        if squares > 1.0 + 1e-12:
            raise InvalidParameterError(f"Weights at N={n_sites} have squared norm {squares:.15f} > 1")
        for label, value in weights.items():
            self._store(self.entries, (n_sites, label), value)

    def set_aux(self, n_sites: int, name: str, value: float) -> None:
        if name not in AUX_NAMES:
            raise InvalidParameterError(f"Unknown auxiliary overlap {name!r}")
        self._store(self.aux, (n_sites, name), value)

    def has(self, n_sites: int, label: str) -> bool:
        return (n_sites, label) in self.entries

    def weight(self, n_sites: int, label: str) -> float:
        try:
            return self.entries[(n_sites, label)]
        except KeyError:
            raise InvalidParameterError(f"Weight W_{label}^{n_sites} not available") from None

    def aux_value(self, n_sites: int, name: str) -> float:
        try:
            return self.aux[(n_sites, name)]
        except KeyError:
            raise InvalidParameterError(f"Overlap {name}_{n_sites} not available") from None

    def sizes(self) -> List[int]:
        return sorted({n for n, _ in self.entries})

    def weights_at(self, n_sites: int, spec: AnsatzSpec) -> np.ndarray:
        return np.array([self.weight(n_sites, label) for label in spec.labels])

    def complete_at(self, n_sites: int, spec: AnsatzSpec) -> bool:
        return all(self.has(n_sites, label) for label in spec.labels)

    def resolve(self, n_sites: int, spec: AnsatzSpec) -> np.ndarray:
        """Weights at N, or at the largest recorded N of the same parity below it."""
        candidates = [n for n in self.sizes() if n <= n_sites and n % 2 == n_sites % 2
                      and self.complete_at(n, spec)]
        if not candidates:
            raise InvalidParameterError(f"No {spec.name} weights available for N={n_sites}")
        return self.weights_at(max(candidates), spec)

    def coverage_deficit(self, n_sites: int, spec: AnsatzSpec) -> float:
        return coverage_deficit(self.weights_at(n_sites, spec))

    def max_change(self, n_sites: int, spec: AnsatzSpec) -> float:
        """max_s |W_s^N - W_s^(N-2)|."""
        return float(np.max(np.abs(self.weights_at(n_sites, spec) - self.weights_at(n_sites - 2, spec))))

    def to_frame(self) -> pd.DataFrame:
        rows = [(n, label, value) for (n, label), value in self.entries.items()]
        rows += [(n, name, value) for (n, name), value in self.aux.items()]
        frame = pd.DataFrame(rows, columns=["N", "label", "value"])
        return frame.sort_values(["N", "label"], kind="stable").reset_index(drop=True)

    def to_plot_frame(self, spec: AnsatzSpec) -> pd.DataFrame:
        """Weights squared, normalized per label to its maximum absolute value."""
        frame = self.to_frame()
        frame = frame[frame["label"].isin(spec.labels)].copy()
        frame["weight_squared"] = frame["value"] ** 2
        peak = frame.groupby("label")["value"].transform(lambda s: s.abs().max())
        frame["normalized"] = frame["value"] / peak.replace(0.0, 1.0)
        return frame

    def to_csv(self, path: str) -> str:
        self.to_frame().to_csv(path, index=False, float_format="%.17g")
        return path

    def to_json(self, path: str) -> str:
        payload = {
            "spec": self.spec_name,
            "weights": [{"N": n, "label": label, "value": v} for (n, label), v in sorted(self.entries.items())],
            "aux": [{"N": n, "name": name, "value": v} for (n, name), v in sorted(self.aux.items())],
        }
        return write_json(path, payload)

    @classmethod
    def read_csv(cls, path: str, spec_name: Optional[str] = None) -> "WeightTable":
        frame = pd.read_csv(path, dtype={"label": str}, float_precision="round_trip")
        table = cls(spec_name)
        for row in frame.itertuples(index=False):
            if row.label in AUX_NAMES:
                table.set_aux(int(row.N), row.label, row.value)
            else:
                table._store(table.entries, (int(row.N), row.label), row.value)
        return table


def fixed_weights_from(table: WeightTable, spec: AnsatzSpec, n_sites: Optional[int] = None) -> Dict[str, float]:
    """Converged weights taken at N (default: the largest complete even N)."""
    if n_sites is None:
        even = [n for n in table.sizes() if n % 2 == 0 and table.complete_at(n, spec)]
        if not even:
            raise InvalidParameterError(f"No complete even-N {spec.name} weights in table")
        n_sites = max(even)
    return dict(zip(spec.labels, table.weights_at(n_sites, spec)))


def weights_converged(table: WeightTable, spec: AnsatzSpec, n_sites: int, tol: Optional[float] = None) -> bool:
    """max change below tol over the last two even steps ending at N."""
    tol = config.WEIGHT_CONVERGENCE_TOL if tol is None else tol
    try:
        return table.max_change(n_sites, spec) < tol and table.max_change(n_sites - 2, spec) < tol
    except InvalidParameterError:
        return False


# Reference states

def reference_state(provider, n_sites: int, params: ModelParams) -> SectorState:
    """Ansatz-frame ground state of n_sites sites from a GroundStateProvider."""
    result = provider.get(n_sites, params, n_up=hamiltonian_sector_for(n_sites))
    if result.degenerate:
        raise DegenerateGroundStateError(f"Ground state at N={n_sites} is degenerate; weights undefined")
    return to_ansatz_frame(result.state)


def reference_data(provider, sizes: Iterable[int], params: ModelParams) -> Tuple[Dict[int, SectorState], Dict[int, float]]:
    """Ansatz-frame states and energies for the requested sizes."""
    states, energies = {}, {}
    for n_sites in sorted(set(sizes)):
        states[n_sites] = reference_state(provider, n_sites, params)
        energies[n_sites] = provider.get(n_sites, params, n_up=hamiltonian_sector_for(n_sites)).energy
    return states, energies


def direct_aux(states: Mapping[int, SectorState], n_sites: int) -> Dict[str, float]:
    """f_N = <1 T Psi_(N-1)|Psi_N>, g_N = <10 Psi_(N-2)|Psi_N>, p_N = <101 T Psi_(N-3)|Psi_N>."""
    psi = states[n_sites]
    aux = {}
    for name, prefix, flipped in (("f", "1", True), ("g", "10", False), ("p", "101", True)):
        size = n_sites - len(prefix)
        if size >= 1 and size in states:
            tail = states[size].flipped() if flipped else states[size]
            aux[name] = prefixed_overlap(psi, prefix, tail)
    return aux


def table_from_states(spec: AnsatzSpec, states: Mapping[int, SectorState],
                      sizes: Optional[Iterable[int]] = None) -> WeightTable:
    """Weights and direct overlaps of explicit ansatz-frame states."""
    table = WeightTable(spec.name)
    for n_sites in sorted(sizes if sizes is not None else states):
        psi = states[n_sites]
        weights = {t.label: extract_weight(psi, states[t.tail_size(n_sites)], t)
                   for t in spec.applicable(n_sites) if t.tail_size(n_sites) in states}
        if weights:
            table.set_weights(n_sites, weights)
        for name, value in direct_aux(states, n_sites).items():
            table.set_aux(n_sites, name, value)
    return table


def weight_series(params: ModelParams, n_min: int, n_max: int, spec: Union[str, AnsatzSpec], provider) -> WeightTable:
    """Weights W_s^N from exact ground states for every N in [n_min, n_max].

    Terms whose tail would be empty at a given N are skipped.
    """
    spec = get_spec(spec)
    if n_min < 2 or n_max < n_min:
        raise InvalidParameterError(f"Invalid range [{n_min}, {n_max}]")
    states, _ = reference_data(provider, range(1, n_max + 1), params)
    table = table_from_states(spec, states, range(n_min, n_max + 1))
    for n_sites in range(n_min, n_max + 1):
        if table.complete_at(n_sites, spec):
            logger.info(f"{spec.name} N={n_sites}: deficit {table.coverage_deficit(n_sites, spec):.3e}")
    return table


# Reconstruction

WeightSource = Union[WeightTable, Mapping[str, float], Mapping[int, Mapping[str, float]]]


def _weights_for(weights: WeightSource, spec: AnsatzSpec, n_sites: int) -> np.ndarray:
    if isinstance(weights, WeightTable):
        return weights.resolve(n_sites, spec)
    if all(isinstance(k, str) for k in weights):
        missing = [label for label in spec.labels if label not in weights]
        if missing:
            raise InvalidParameterError(f"Weights missing for terms {missing}")
        return np.array([float(weights[label]) for label in spec.labels])
    if n_sites not in weights:
        raise InvalidParameterError(f"No weights for N={n_sites}")
    return np.array([float(weights[n_sites][label]) for label in spec.labels])


def reconstruct_state(spec: Union[str, AnsatzSpec], seeds: Mapping[int, SectorState], weights: WeightSource,
                      n_target: int) -> SectorState:
    """Assemble sum_s W_s |prefix_s> (x) T^f |Psi_(N-offset)> recursively.

    Seeds and output are ansatz-frame states; every level is renormalized.
    """
    spec = get_spec(spec)
    built: Dict[int, SectorState] = {}

    def build(n_sites: int) -> SectorState:
        if n_sites in seeds and n_sites != n_target:
            return seeds[n_sites]
        if n_sites in built:
            return built[n_sites]
        if n_sites <= spec.max_offset:
            raise InvalidParameterError(f"Missing seed state for N={n_sites}")
        coeffs = _weights_for(weights, spec, n_sites)
        tails = {t.tail_size(n_sites): build(t.tail_size(n_sites)) for t in spec.terms}
        amplitudes = None
        for coeff, term in zip(coeffs, spec.terms):
            vector = basis_vector(term, n_sites, tails).amplitudes
            amplitudes = coeff * vector if amplitudes is None else amplitudes + coeff * vector
        state = SectorState(basis_vector(spec.terms[0], n_sites, tails).basis, amplitudes)
        norm = state.norm()
        if norm == 0.0:
            raise ZeroNormError(f"Ansatz assembly at N={n_sites} has zero norm")
        built[n_sites] = SectorState(state.basis, amplitudes / norm)
        return built[n_sites]

    return build(n_target)


def assemble(spec: AnsatzSpec, n_sites: int, states: Mapping[int, SectorState], coefficients: Sequence[float]) -> SectorState:
    """Unnormalized sum_s c_s phi_s over explicit basis vectors."""
    vectors = [basis_vector(t, n_sites, states) for t in spec.terms]
    amplitudes = np.sum([c * v.amplitudes for c, v in zip(coefficients, vectors)], axis=0)
    return SectorState(vectors[0].basis, amplitudes)
