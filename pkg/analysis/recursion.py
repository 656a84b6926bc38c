"""
Energy recursions built on the fractal ansatz.

AD (adaptive) re-diagonalizes the projected Hamiltonian at every N and feeds
the new weights back into the overlap tables. AFW (fixed weights) keeps one
weight vector and only evaluates its energy, which is variational when the
weights are normalized.

Two transcriptions are available. "exact" builds every matrix element from the
overlap calculus. "literal" reproduces the closed-form matrices and recurrences
as originally written down, including their known slips, and exists so the two
can be audited against each other.
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Tuple

import numpy as np
import pandas as pd
import scipy.linalg

from analysis.ansatz import (AUX_NAMES, AnsatzSpec, WeightTable, get_spec, table_from_states)
from analysis.hamiltonian import ModelParams
from analysis.overlaps import OverlapCalculus, projected_hamiltonian
from data.sector_basis import SectorState
from utils.errors import InvalidParameterError, ZeroNormError
from utils.helpers import LOGGER_NAME

logger = logging.getLogger(LOGGER_NAME)

TRANSCRIPTIONS = ("exact", "literal")
EIGEN_GAP_TOL = 1e-12


@dataclass(frozen=True)
class Discrepancy:
    """A literal matrix entry that disagrees with the calculus."""

    row: int
    col: int
    literal: float
    oracle: float

    @property
    def delta(self) -> float:
        return self.literal - self.oracle


@dataclass
class RecursionResult:
    """Predicted energies of one recursion run."""

    spec: AnsatzSpec
    method: str
    transcription: str
    n_seed: int
    energies: Dict[int, float] = field(default_factory=dict)
    table: Optional[WeightTable] = None

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame(sorted(self.energies.items()), columns=["N", "energy"])
        frame["energy_per_site"] = frame["energy"] / frame["N"]
        frame["method"] = self.method
        frame["spec"] = self.spec.name
        return frame


def _check_transcription(transcription: str) -> None:
    if transcription not in TRANSCRIPTIONS:
        raise InvalidParameterError(f"Unknown transcription {transcription!r}; choose from {TRANSCRIPTIONS}")


def lowest_eigenpair(matrix: np.ndarray) -> Tuple[float, np.ndarray]:
    """Lowest eigenvalue and a sign-fixed unit eigenvector.

    The first nonzero component is made positive. Within a degenerate lowest
    subspace the vector is the projection of e_k for the lowest index k the
    subspace touches.
    """
    if not np.allclose(matrix, matrix.T, atol=1e-12):
        raise InvalidParameterError("Reduced Hamiltonian is not symmetric")
    values, vectors = scipy.linalg.eigh(matrix)
    vector = vectors[:, 0]
    if len(values) > 1 and values[1] - values[0] < EIGEN_GAP_TOL:
        subspace = vectors[:, values - values[0] < EIGEN_GAP_TOL]
        k = int(np.argmax(np.linalg.norm(subspace, axis=1) > 1e-14))
        vector = subspace @ subspace[k]
        logger.warning(f"Degenerate reduced ground state ({subspace.shape[1]}-fold); projecting e_{k}")
    norm = np.linalg.norm(vector)
    if norm == 0.0:
        raise ZeroNormError("Reduced eigenvector vanished")
    vector = vector / norm
    lead = int(np.argmax(np.abs(vector) > 1e-14))
    if vector[lead] < 0:
        vector = -vector
    return float(values[0]), vector


# Inputs of the closed-form expressions

class TableInputs:
    """Energies, weights and overlaps read from a WeightTable."""

    def __init__(self, spec: AnsatzSpec, table: WeightTable, energies: Mapping[int, float]):
        self.spec = spec
        self.table = table
        self.energies = energies

    def E(self, m: int) -> float:
        if m not in self.energies:
            raise InvalidParameterError(f"Energy E_{m} not available")
        return self.energies[m]

    def W(self, label: str, m: int) -> float:
        if label not in self.spec.labels:
            return 0.0
        return self.table.weight(m, label)

    def aux(self, name: str, m: int) -> float:
        return self.table.aux_value(m, name)


class CalculusInputs(TableInputs):
    """Weights and overlaps evaluated through an OverlapCalculus."""

    def __init__(self, spec: AnsatzSpec, calculus: OverlapCalculus, energies: Mapping[int, float]):
        super().__init__(spec, WeightTable(spec.name), energies)
        self.calculus = calculus

    def W(self, label: str, m: int) -> float:
        if label not in self.spec.labels:
            return 0.0
        return self.calculus.overlap(label, len(label) % 2, m)

    def aux(self, name: str, m: int) -> float:
        return self.calculus.aux(m)[name]


def _mirror(upper: np.ndarray) -> np.ndarray:
    return upper + np.triu(upper, 1).T


def _literal_four(n: int, params: ModelParams, inp: TableInputs) -> np.ndarray:
    E, W, mu, x = inp.E, inp.W, params.mu, params.x
    h = np.diag([E(n - 4) + 3 + 2 * mu, E(n - 2) + 1 + 2 * mu, E(n - 2), E(n - 3) + 1 + 2 * mu])
    h[0, 1] = x * W("01", n - 2)
    h[1, 2] = x
    h[2, 3] = x * inp.aux("f", n - 2)
    return _mirror(h)


def _literal_six(n: int, params: ModelParams, inp: TableInputs) -> np.ndarray:
    E, W, mu, x = inp.E, inp.W, params.mu, params.x
    h = np.diag([E(n - 6) + 5 + 2 * mu, E(n - 4) + 3 + 2 * mu, E(n - 2) + 1 + 2 * mu,
                 E(n - 4), E(n - 3) + 1 + 2 * mu, E(n - 5) + 3 + 2 * mu])
    h[0, 1] = x * W("01", n - 4)
    h[0, 2] = x * W("0011", n - 2)
    h[1, 2] = x * W("0011", n - 2)
    h[2, 3] = x
    h[3, 4] = x * inp.aux("f", n - 2)
    h[4, 5] = x * W("01", n - 3)
    return _mirror(h)


def _literal_eleven(n: int, params: ModelParams, inp: TableInputs) -> np.ndarray:
    E, W, mu, x = inp.E, inp.W, params.mu, params.x
    h = np.diag([E(n - 6) + 5 + 2 * mu, E(n - 4) + 3 + 2 * mu, E(n - 2) + 1 + 2 * mu,
                 E(n - 8) + 5 + 2 * mu, E(n - 6) + 3 + 2 * mu, E(n - 4) + 1 + 2 * mu,
                 E(n - 4), E(n - 5) + 1 + 2, E(n - 7) + 3 + 2 * mu,
                 E(n - 3) + 1 + 2 * mu, E(n - 5) + 3 + 2 * mu])

    def put(i, j, value):
        h[i - 1, j - 1] = value

    put(1, 2, x * W("01", n - 4))
    put(1, 3, x * W("0011", n - 2))
    put(2, 3, x * W("0011", n - 2))
    put(3, 4, x * W("001011", n - 2))
    put(3, 5, x * W("0011", n - 2))
    put(3, 6, x * W("01", n - 2))
    put(3, 7, x * inp.aux("g", n - 2))
    put(3, 8, x * W("110", n - 2))
    put(3, 9, x * W("11100", n - 2))
    put(4, 5, x * W("01", n - 6))
    put(4, 6, x * W("0011", n - 4))
    put(7, 10, inp.aux("f", n - 3))
    put(8, 9, x * W("01", n - 5))
    put(8, 10, x * W("01", n - 2))
    put(9, 10, x * W("0011", n - 3))
    put(10, 11, x * W("01", n - 3))
    return _mirror(h)


def literal_reduced_hamiltonian(spec, n: int, params: ModelParams, inputs: TableInputs) -> np.ndarray:
    """Closed-form reduced matrix as originally transcribed."""
    spec = get_spec(spec)
    if spec.name == "4-term":
        return _literal_four(n, params, inputs)
    if spec.name == "6-term":
        return _literal_six(n, params, inputs)
    full = _literal_eleven(n, params, inputs)
    if spec.name == "9-term":
        keep = [i for i in range(11) if i not in (3, 8)]
        return full[np.ix_(keep, keep)]
    return full


def reduced_hamiltonian(spec, n: int, params: ModelParams, energies: Mapping[int, float],
                        weights: WeightTable) -> np.ndarray:
    """Closed-form reduced matrix from stored energies and a weight table."""
    spec = get_spec(spec)
    return literal_reduced_hamiltonian(spec, n, params, TableInputs(spec, weights, energies))


def literal_aux(spec, m: int, x: float, inp: TableInputs) -> Dict[str, float]:
    """Auxiliary overlaps at size m from the closed-form recurrences."""
    spec = get_spec(spec)
    W, aux = inp.W, inp.aux
    if spec.name == "4-term":
        f = (W("10", m) * (W("10", m - 1) * aux("f", m - 2) + W("110", m - 1) * W("01", m - 2))
             + W("110", m) * W("01", m - 1))
        return {"f": f}
    if spec.name == "6-term":
        f = x * (W("10", m) * (W("10", m - 1) * aux("f", m - 2) + W("110", m - 1) * W("01", m - 2)
                               + W("110", m) * W("11100", m - 2))
                 + W("11100", m) * W("0011", m - 1))
        return {"f": f}
    f = (W("100011", m) * W("11100", m - 1) + W("1001", m) * W("110", m - 1)
         + W("1010", m) * aux("p", m - 1) + W("10110", m) * W("1001", m - 1)
         + W("1011100", m) * W("100011", m - 1) + W("110", m) * W("01", m - 1)
         + W("11100", m) * W("0011", m - 1))
    g = (W("10001011", m) * W("001011", m - 2) + W("100011", m) * W("0011", m - 2)
         + W("1001", m) * W("01", m - 2) + W("1010", m) * aux("g", m - 2)
         + W("10110", m) * W("110", m - 2) + W("1011100", m) * W("11100", m))
    p = W("1010", m) * aux("f", m - 3) + W("10110", m) * W("01", m - 3) + W("1011100", m) * W("0011", m - 3)
    return {"f": f, "g": g, "p": p}


# Cross terms of the closed-form AFW energy: (term a, term b, overlap prefix, flipped, size shift)
_AFW_CROSS = (
    ("001011", "01", "0011", 0, 2),
    ("001011", "0011", "01", 0, 4),
    ("0011", "01", "01", 0, 2),
    ("01", "100011", "0011", 0, 2),
    ("01", "1001", "01", 0, 2),
    ("01", "1010", "10", 0, 2),
    ("01", "10110", "110", 1, 2),
    ("1001", "100011", "01", 0, 4),
    ("1010", "10110", "1", 1, 4),
    ("110", "1010", "1", 1, 3),
    ("110", "10110", "01", 0, 3),
    ("001011", "0011", "01", 0, 4),
    ("001011", "01", "0011", 0, 2),
    ("11100", "110", "01", 0, 3),
    ("1001", "1010", None, 0, 0),
)
_AFW_CROSS_EXTRA = (
    ("10001011", "100011", "01", 0, 6),
    ("10001011", "1001", "0011", 0, 4),
    ("10110", "1011100", "01", 0, 5),
    ("01", "10001011", "001011", 0, 2),
    ("01", "1011100", "11100", 1, 2),
    ("1011100", "110", "0011", 0, 3),
)


def literal_afw_energy(spec, n: int, params: ModelParams, weights: Mapping[str, float],
                       inputs: CalculusInputs) -> float:
    """Closed-form AFW energy as originally transcribed."""
    spec = get_spec(spec)
    w = np.array([weights[label] for label in spec.labels])
    matrix = literal_reduced_hamiltonian(spec, n, params, inputs)
    if spec.name == "6-term":
        return float(w @ matrix @ w)
    s_energy = float(np.sum(w * w * np.diag(matrix)))
    def get(label: str) -> float:
        return float(weights.get(label, 0.0))

    if spec.name == "4-term":
        cross = (get("0011") * get("01") * inputs.W("01", n - 2) + get("01") * get("10")
                 + get("10") * get("110") * inputs.aux("f", n - 2))
        return s_energy + 2 * cross
    rows = _AFW_CROSS + (_AFW_CROSS_EXTRA if spec.name == "11-term" else ())
    cross = 0.0
    for a, b, q, flipped, shift in rows:
        value = 1.0 if q is None else inputs.calculus.overlap(q, flipped, n - shift)
        cross += get(a) * get(b) * value
    return s_energy + 2 * params.x * cross


# Audits

def audit_reduced_hamiltonian(spec, n: int, params: ModelParams, inputs: TableInputs,
                              calculus: OverlapCalculus, tol: float = 1e-10) -> List[Discrepancy]:
    """Compare the literal reduced matrix with the calculus, entry by entry."""
    spec = get_spec(spec)
    literal = literal_reduced_hamiltonian(spec, n, params, inputs)
    oracle = projected_hamiltonian(spec, n, params, inputs.energies, calculus)
    found = []
    for row, col in zip(*np.nonzero(np.triu(np.abs(literal - oracle) > tol))):
        item = Discrepancy(int(row), int(col), float(literal[row, col]), float(oracle[row, col]))
        logger.warning(f"{spec.name} N={n}: H[{spec.labels[row]},{spec.labels[col]}] "
                       f"literal {item.literal:.12g} vs calculus {item.oracle:.12g}")
        found.append(item)
    return found


def audit_afw_energy(spec, n: int, params: ModelParams, weights: Mapping[str, float],
                     inputs: CalculusInputs, tol: float = 1e-10) -> float:
    """Literal minus calculus AFW energy at N; logged when above tol."""
    spec = get_spec(spec)
    w = np.array([weights[label] for label in spec.labels])
    exact = float(w @ projected_hamiltonian(spec, n, params, inputs.energies, inputs.calculus) @ w)
    delta = literal_afw_energy(spec, n, params, weights, inputs) - exact
    if abs(delta) > tol:
        logger.warning(f"{spec.name} AFW N={n}: literal energy off by {delta:.3e}")
    return delta


def recurrence_residuals(spec, table: WeightTable, x: float, sizes) -> pd.DataFrame:
    """Closed-form recurrences against the overlaps stored in the table."""
    spec = get_spec(spec)
    inputs = TableInputs(spec, table, {})
    rows = []
    for m in sizes:
        for name, value in literal_aux(spec, m, x, inputs).items():
            rows.append({"N": m, "name": name, "recurrence": value, "direct": table.aux_value(m, name)})
    frame = pd.DataFrame(rows, columns=["N", "name", "recurrence", "direct"])
    frame["difference"] = frame["recurrence"] - frame["direct"]
    return frame


# Recursions

def _check_seeds(spec: AnsatzSpec, params: ModelParams, seeds: Mapping[int, SectorState],
                 energies: Mapping[int, float]) -> int:
    if params.epsilon0 != 0.0:
        raise InvalidParameterError("The ansatz recursion requires epsilon0 = 0")
    if not seeds:
        raise InvalidParameterError("No seed states")
    n_seed = max(seeds)
    if n_seed < spec.max_offset:
        raise InvalidParameterError(f"Seed size {n_seed} below the largest {spec.name} offset {spec.max_offset}")
    missing = [m for m in range(1, n_seed + 1) if m not in seeds or m not in energies]
    if missing:
        raise InvalidParameterError(f"Seed states or energies missing for sizes {missing}")
    return n_seed


def ad_recursion(spec, params: ModelParams, seeds: Mapping[int, SectorState], seed_energies: Mapping[int, float],
                 n_target: int, transcription: str = "exact", table: Optional[WeightTable] = None) -> RecursionResult:
    """Adaptive recursion from exact seeds up to n_target.

    Args:
        spec: Ansatz spec or its name
        params: Couplings (epsilon0 must be 0)
        seeds: Ansatz-frame exact ground states for every size 1..N_seed
        seed_energies: Exact energies for the same sizes
        n_target: Largest chain to predict
        transcription: 'exact' or 'literal'
        table: Seed weight table; built from the seeds when omitted

    Returns:
        RecursionResult whose table holds the seed and predicted weights
    """
    spec = get_spec(spec)
    _check_transcription(transcription)
    n_seed = _check_seeds(spec, params, seeds, seed_energies)
    energies = {m: float(seed_energies[m]) for m in range(1, n_seed + 1)}
    calculus = OverlapCalculus(seeds)
    if table is None:
        table = table_from_states(spec, seeds, range(2, n_seed + 1))
    inputs = TableInputs(spec, table, energies)
    result = RecursionResult(spec, "AD", transcription, n_seed, table=table)

    for n in range(n_seed + 1, n_target + 1):
        if transcription == "exact":
            matrix = projected_hamiltonian(spec, n, params, energies, calculus)
        else:
            matrix = literal_reduced_hamiltonian(spec, n, params, inputs)
        energy, vector = lowest_eigenpair(matrix)
        energies[n] = energy
        result.energies[n] = energy
        calculus.register(n, spec, vector)
        table.set_weights(n, dict(zip(spec.labels, vector)))
        aux = calculus.aux(n) if transcription == "exact" else literal_aux(spec, n, params.x, inputs)
        for name in AUX_NAMES:
            if name in aux:
                table.set_aux(n, name, aux[name])
        logger.info(f"AD {spec.name} N={n}: E={energy:.12f} E/N={energy / n:.12f}")
    return result


def afw_recursion(spec, params: ModelParams, fixed_weights: Mapping[str, float], seeds: Mapping[int, SectorState],
                  seed_energies: Mapping[int, float], n_target: int, transcription: str = "exact",
                  normalize: bool = True) -> RecursionResult:
    """Energies of the fixed-weight ansatz from exact seeds up to n_target."""
    spec = get_spec(spec)
    _check_transcription(transcription)
    missing = [label for label in spec.labels if label not in fixed_weights]
    if missing:
        raise InvalidParameterError(f"Fixed weights missing for terms {missing}")
    n_seed = _check_seeds(spec, params, seeds, seed_energies)
    w = np.array([float(fixed_weights[label]) for label in spec.labels])
    if normalize:
        norm = np.linalg.norm(w)
        if norm == 0.0:
            raise ZeroNormError("Fixed weights are all zero")
        w = w / norm
    weights = dict(zip(spec.labels, w))
    expansion = list(zip(spec.terms, w))
    calculus = OverlapCalculus(seeds, expander=lambda size: expansion if size > n_seed else None)
    energies = {m: float(seed_energies[m]) for m in range(1, n_seed + 1)}
    inputs = CalculusInputs(spec, calculus, energies)
    result = RecursionResult(spec, "AFW", transcription, n_seed)

    for n in range(n_seed + 1, n_target + 1):
        if transcription == "exact":
            energy = float(w @ projected_hamiltonian(spec, n, params, energies, calculus) @ w)
        else:
            energy = literal_afw_energy(spec, n, params, weights, inputs)
        energies[n] = energy
        result.energies[n] = energy
        logger.info(f"AFW {spec.name} N={n}: E={energy:.12f}")
    return result
