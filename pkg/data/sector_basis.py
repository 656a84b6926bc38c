"""
Fixed-charge computational basis and sector states.

Bit convention: bit 1 is spin up (sigma^z = +1), site 0 is the most significant
bit, states are listed in ascending integer order. With this layout every
prefix projector selects a contiguous index range.
"""
import logging
from dataclasses import dataclass
from functools import lru_cache
from math import comb
from typing import Dict, Tuple, Union

import numpy as np

from utils.errors import InvalidParameterError
from utils.helpers import LOGGER_NAME, bits_to_str, site_bits, str_to_bits

logger = logging.getLogger(LOGGER_NAME)

Bits = Union[str, int]


def _enumerate_states(n_sites: int, n_up: int) -> np.ndarray:
    """All n_sites-bit integers with n_up ones, ascending.

    Built recursively on the most significant bit: configurations with MSB 0
    precede those with MSB 1, so concatenation preserves the ordering.
    """
    memo: Dict[Tuple[int, int], np.ndarray] = {}

    def build(n: int, k: int) -> np.ndarray:
        if k < 0 or k > n:
            return np.empty(0, dtype=np.int64)
        if k == 0:
            return np.zeros(1, dtype=np.int64)
        if k == n:
            return np.array([(1 << n) - 1], dtype=np.int64)
        key = (n, k)
        if key not in memo:
            low = build(n - 1, k)
            high = build(n - 1, k - 1) | np.int64(1 << (n - 1))
            memo[key] = np.concatenate([low, high])
        return memo[key]

    return build(n_sites, n_up)


@dataclass(frozen=True, eq=False)
class SectorBasis:
    """Ordered basis of all n_sites-bit configurations with n_up ones."""

    n_sites: int
    n_up: int
    states: np.ndarray

    def __len__(self) -> int:
        return int(self.states.shape[0])

    @property
    def size(self) -> int:
        return len(self)

    def index_of(self, bits: Bits) -> int:
        """Position of a configuration; KeyError if it is not in the sector."""
        value = str_to_bits(bits) if isinstance(bits, str) else int(bits)
        if isinstance(bits, str) and len(bits) != self.n_sites:
            raise KeyError(bits)
        pos = int(np.searchsorted(self.states, value))
        if pos >= len(self) or int(self.states[pos]) != value:
            raise KeyError(bits)
        return pos

    def lookup(self, values: np.ndarray) -> np.ndarray:
        """Vectorized index_of; -1 marks configurations outside the sector."""
        values = np.asarray(values, dtype=np.int64)
        pos = np.searchsorted(self.states, values)
        pos_clipped = np.minimum(pos, max(len(self) - 1, 0))
        found = (pos < len(self)) & (self.states[pos_clipped] == values)
        return np.where(found, pos_clipped, -1)

    def bitstring(self, index: int) -> str:
        return bits_to_str(int(self.states[index]), self.n_sites)

    def bitstrings(self):
        return [self.bitstring(i) for i in range(len(self))]

    def bits(self) -> np.ndarray:
        """(size, n_sites) occupation matrix."""
        return site_bits(self.states, self.n_sites)

    def prefix_range(self, prefix: str) -> Tuple[int, int]:
        """Half-open index range of the states that start with prefix."""
        length = len(prefix)
        if length > self.n_sites:
            raise InvalidParameterError(
                f"Prefix of length {length} longer than chain of {self.n_sites} sites")
        if length == 0:
            return 0, len(self)
        shift = self.n_sites - length
        start = str_to_bits(prefix) << shift
        stop = (str_to_bits(prefix) + 1) << shift
        lo = int(np.searchsorted(self.states, start, side="left"))
        hi = int(np.searchsorted(self.states, stop, side="left"))
        return lo, hi


@lru_cache(maxsize=128)
def build_sector(n_sites: int, n_up: int) -> SectorBasis:
    """Enumerate the sector of n_sites spins with n_up ones."""
    if n_sites < 1:
        raise InvalidParameterError(f"n_sites must be positive, got {n_sites}")
    if not 0 <= n_up <= n_sites:
        raise InvalidParameterError(f"n_up={n_up} out of range for {n_sites} sites")
    states = _enumerate_states(n_sites, n_up)
    states.setflags(write=False)
    if len(states) != comb(n_sites, n_up):
        raise RuntimeError("Sector enumeration size mismatch")
    logger.debug(f"Built sector N={n_sites}, n_up={n_up}, size={len(states)}")
    return SectorBasis(n_sites=n_sites, n_up=n_up, states=states)


def canonical_sector_for(n_sites: int) -> int:
    """N/2 for even chains, (N+1)/2 (s_z = +1/2) for odd chains."""
    if n_sites < 1:
        raise InvalidParameterError(f"n_sites must be positive, got {n_sites}")
    return (n_sites + 1) // 2


@dataclass(frozen=True, eq=False)
class SectorState:
    """Real amplitude vector over a SectorBasis."""

    basis: SectorBasis
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=np.float64)
        if amps.shape != (len(self.basis),):
            raise InvalidParameterError(
                f"Amplitude vector of shape {amps.shape} does not match sector size {len(self.basis)}")
        object.__setattr__(self, "amplitudes", amps)

    @property
    def n_sites(self) -> int:
        return self.basis.n_sites

    @property
    def n_up(self) -> int:
        return self.basis.n_up

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def normalized(self) -> "SectorState":
        norm = self.norm()
        if norm == 0.0:
            raise InvalidParameterError("Cannot normalize a zero vector")
        return SectorState(self.basis, self.amplitudes / norm)

    def probabilities(self) -> np.ndarray:
        return self.amplitudes ** 2

    def flipped(self) -> "SectorState":
        """Apply the global bit flip.

        Complementing every configuration reverses the ascending order, so the
        flipped amplitudes are the reversed vector over the complementary sector.
        """
        target = build_sector(self.n_sites, self.n_sites - self.n_up)
        return SectorState(target, self.amplitudes[::-1].copy())

    def prefix_block(self, prefix: str) -> np.ndarray:
        """Amplitudes of the states starting with prefix, in tail-basis order."""
        lo, hi = self.basis.prefix_range(prefix)
        return self.amplitudes[lo:hi]

    def with_prefix(self, prefix: str) -> "SectorState":
        """Return |prefix> (x) |self> on len(prefix) + n_sites sites."""
        target = build_sector(self.n_sites + len(prefix), self.n_up + prefix.count("1"))
        lo, hi = target.prefix_range(prefix)
        if hi - lo != len(self.basis):
            raise RuntimeError("Prefix block does not match tail sector")
        amps = np.zeros(len(target))
        amps[lo:hi] = self.amplitudes
        return SectorState(target, amps)

    def to_full(self) -> np.ndarray:
        """Embed into the 2^N computational space."""
        full = np.zeros(1 << self.n_sites)
        full[self.basis.states] = self.amplitudes
        return full

    @classmethod
    def from_full(cls, vector: np.ndarray, n_up: int) -> "SectorState":
        vector = np.asarray(vector, dtype=np.float64)
        n_sites = int(vector.shape[0]).bit_length() - 1
        if vector.shape[0] != 1 << n_sites:
            raise InvalidParameterError("Full-space vector length must be a power of two")
        basis = build_sector(n_sites, n_up)
        return cls(basis, vector[basis.states].copy())

    @classmethod
    def basis_state(cls, bitstring: str) -> "SectorState":
        """Indicator vector of a single configuration."""
        basis = build_sector(len(bitstring), bitstring.count("1"))
        amps = np.zeros(len(basis))
        amps[basis.index_of(bitstring)] = 1.0
        return cls(basis, amps)
