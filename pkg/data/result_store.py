"""
Persistent cache of ground states.

Each entry is a raw little-endian float64 payload in basis order plus a JSON
manifest. Files are named after the SHA-256 of the canonical key, written to a
temporary file and renamed into place.
"""
import hashlib
import json
import logging
import os
import tempfile
from dataclasses import dataclass
from typing import Dict, Iterator, Optional, Tuple

import numpy as np

from analysis.eigensolver import PHASE_CONVENTION
from config import config
from data.sector_basis import SectorState, build_sector
from utils.errors import CacheIntegrityError, MissingCacheEntryError
from utils.helpers import LOGGER_NAME, format_float

logger = logging.getLogger(LOGGER_NAME)

PAYLOAD_DTYPE = "<f8"
NORM_TOLERANCE = 1e-12


@dataclass(frozen=True)
class CacheKey:
    """Parameters that identify a cached ground state."""

    n_sites: int
    n_up: int
    x: float
    mu: float
    epsilon0: float
    tol: float

    def canonical(self) -> str:
        return (f"n_sites={self.n_sites};n_up={self.n_up};x={format_float(self.x)};"
                f"mu={format_float(self.mu)};epsilon0={format_float(self.epsilon0)};"
                f"tol={format_float(self.tol)}")

    def digest(self) -> str:
        return hashlib.sha256(self.canonical().encode("ascii")).hexdigest()

    def describe(self) -> str:
        return (f"N={self.n_sites} n_up={self.n_up} x={format_float(self.x)} "
                f"mu={format_float(self.mu)} eps0={format_float(self.epsilon0)} tol={format_float(self.tol)}")

    def to_dict(self) -> Dict:
        return {"n_sites": self.n_sites, "n_up": self.n_up, "x": format_float(self.x),
                "mu": format_float(self.mu), "epsilon0": format_float(self.epsilon0),
                "tol": format_float(self.tol)}

    @classmethod
    def from_dict(cls, data: Dict) -> "CacheKey":
        return cls(int(data["n_sites"]), int(data["n_up"]), float(data["x"]), float(data["mu"]),
                   float(data["epsilon0"]), float(data["tol"]))


@dataclass(frozen=True)
class CacheEntry:
    """A verified cache entry."""

    key: CacheKey
    energy: float
    state: SectorState
    residual: float
    n_iterations: int
    gap: Optional[float]
    degenerate: bool
    manifest: Dict


class ResultStore:
    """Content-addressed store of ground states under a root directory."""

    def __init__(self, root: Optional[str] = None):
        self.root = root or config.CACHE_DIR
        os.makedirs(self.root, exist_ok=True)

    def paths(self, key: CacheKey) -> Tuple[str, str]:
        digest = key.digest()
        directory = os.path.join(self.root, digest[:2])
        return os.path.join(directory, f"{digest}.bin"), os.path.join(directory, f"{digest}.json")

    def contains(self, key: CacheKey) -> bool:
        payload, manifest = self.paths(key)
        return os.path.exists(payload) and os.path.exists(manifest)

    def _atomic_write(self, path: str, data: bytes) -> None:
        directory = os.path.dirname(path)
        os.makedirs(directory, exist_ok=True)
        handle = tempfile.NamedTemporaryFile(dir=directory, delete=False, suffix=".tmp")
        try:
            with handle:
                handle.write(data)
            os.replace(handle.name, path)
        except Exception:
            if os.path.exists(handle.name):
                os.remove(handle.name)
            raise

    def save(self, key: CacheKey, energy: float, state: SectorState, residual: float, n_iterations: int,
             gap: Optional[float] = None, degenerate: bool = False) -> CacheEntry:
        """Persist a ground state; an existing entry is never overwritten."""
        if self.contains(key):
            logger.info(f"Cache entry exists, keeping it: {key.describe()}")
            return self.load(key)
        if state.n_sites != key.n_sites or state.n_up != key.n_up:
            raise CacheIntegrityError(f"State sector does not match key {key.describe()}")
        payload = np.ascontiguousarray(state.amplitudes, dtype=PAYLOAD_DTYPE).tobytes()
        manifest = {
            "key": key.to_dict(),
            "digest": key.digest(),
            "energy": format_float(energy),
            "residual": format_float(residual),
            "n_iterations": int(n_iterations),
            "gap": None if gap is None else format_float(gap),
            "degenerate": bool(degenerate),
            "norm": format_float(state.norm()),
            "sector_size": len(state.basis),
            "payload_dtype": PAYLOAD_DTYPE,
            "payload_sha256": hashlib.sha256(payload).hexdigest(),
            "phase_convention": PHASE_CONVENTION,
            "code_version": config.CODE_VERSION,
        }
        payload_path, manifest_path = self.paths(key)
        # payload first: an entry counts as present only once its manifest exists
        self._atomic_write(payload_path, payload)
        self._atomic_write(manifest_path, json.dumps(manifest, indent=2, sort_keys=True).encode("utf-8"))
        logger.info(f"Cached ground state {key.describe()}")
        return CacheEntry(key, float(energy), state, float(residual), int(n_iterations), gap,
                          bool(degenerate), manifest)

    def load(self, key: CacheKey) -> CacheEntry:
        """Load and verify an entry."""
        payload_path, manifest_path = self.paths(key)
        if not self.contains(key):
            raise MissingCacheEntryError([key.describe()])
        with open(manifest_path) as handle:
            manifest = json.load(handle)
        stored_key = CacheKey.from_dict(manifest["key"])
        if stored_key.digest() != key.digest() or manifest.get("digest") != key.digest():
            raise CacheIntegrityError(f"Manifest key does not match path hash for {key.describe()}")
        with open(payload_path, "rb") as handle:
            payload = handle.read()
        if hashlib.sha256(payload).hexdigest() != manifest["payload_sha256"]:
            raise CacheIntegrityError(f"Payload checksum mismatch for {key.describe()}")
        amplitudes = np.frombuffer(payload, dtype=PAYLOAD_DTYPE).astype(np.float64)
        basis = build_sector(key.n_sites, key.n_up)
        if amplitudes.shape[0] != len(basis) or manifest["sector_size"] != len(basis):
            raise CacheIntegrityError(f"Payload length {amplitudes.shape[0]} != sector size {len(basis)}")
        norm = float(np.linalg.norm(amplitudes))
        if abs(norm - 1.0) > NORM_TOLERANCE or abs(float(manifest["norm"]) - 1.0) > NORM_TOLERANCE:
            raise CacheIntegrityError(f"Stored state is not normalized (norm {norm!r}) for {key.describe()}")
        gap = manifest.get("gap")
        return CacheEntry(
            key=key,
            energy=float(manifest["energy"]),
            state=SectorState(basis, amplitudes),
            residual=float(manifest["residual"]),
            n_iterations=int(manifest["n_iterations"]),
            gap=None if gap is None else float(gap),
            degenerate=bool(manifest["degenerate"]),
            manifest=manifest,
        )

    def manifests(self) -> Iterator[Dict]:
        """Iterate over all manifests under the root."""
        for directory, _, files in os.walk(self.root):
            for name in sorted(files):
                if name.endswith(".json"):
                    with open(os.path.join(directory, name)) as handle:
                        yield json.load(handle)
