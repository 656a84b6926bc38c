"""
Ground-state provider: cached exact diagonalization results on demand.
"""
import logging
from typing import Dict, Iterable, List, Optional, Tuple

from analysis.eigensolver import GroundStateResult, dense_ground_state, ground_state
from analysis.hamiltonian import ModelParams, build_operator
from config import config
from data.result_store import CacheKey, ResultStore
from data.sector_basis import canonical_sector_for
from utils.errors import InvalidParameterError, MissingCacheEntryError
from utils.helpers import LOGGER_NAME

logger = logging.getLogger(LOGGER_NAME)


class GroundStateProvider:
    """Fetch ground states from the cache, computing missing ones if allowed."""

    def __init__(self, store: Optional[ResultStore] = None, tol: Optional[float] = None, seed: int = 0,
                 method: str = "lanczos", allow_compute: bool = True, workers: Optional[int] = None,
                 krylov_dim: Optional[int] = None):
        """Initialize the provider.

        Args:
            store: Backing cache; None keeps results in memory only
            tol: Solver residual tolerance, part of the cache key
            seed: Lanczos start-vector seed
            method: 'lanczos' or 'dense'
            allow_compute: Solve missing entries instead of failing
            workers: Matvec worker threads
            krylov_dim: Lanczos cycle length
        """
        if method not in ("lanczos", "dense"):
            raise InvalidParameterError(f"Unknown solver method {method!r}")
        self.store = store
        self.tol = config.SOLVER_TOL if tol is None else float(tol)
        self.seed = seed
        self.method = method
        self.allow_compute = allow_compute
        self.workers = workers
        self.krylov_dim = krylov_dim
        self._memory: Dict[CacheKey, GroundStateResult] = {}

    def key_for(self, n_sites: int, params: ModelParams, n_up: Optional[int] = None) -> CacheKey:
        n_up = canonical_sector_for(n_sites) if n_up is None else n_up
        return CacheKey(n_sites, n_up, params.x, params.mu, params.epsilon0, self.tol)

    def has(self, n_sites: int, params: ModelParams, n_up: Optional[int] = None) -> bool:
        key = self.key_for(n_sites, params, n_up)
        return key in self._memory or (self.store is not None and self.store.contains(key))

    def get(self, n_sites: int, params: ModelParams, n_up: Optional[int] = None) -> GroundStateResult:
        """Ground state of the (n_sites, n_up) sector; canonical sector by default."""
        key = self.key_for(n_sites, params, n_up)
        if key in self._memory:
            return self._memory[key]
        if self.store is not None and self.store.contains(key):
            entry = self.store.load(key)
            logger.info(f"Cache hit: {key.describe()}")
            result = GroundStateResult(entry.energy, entry.state, entry.residual, entry.n_iterations,
                                       entry.gap, entry.degenerate)
        elif self.allow_compute:
            logger.info(f"Cache miss, solving: {key.describe()}")
            result = self._solve(key, params)
            if self.store is not None:
                self.store.save(key, result.energy, result.state, result.residual, result.n_iterations,
                                result.gap, result.degenerate)
        else:
            raise MissingCacheEntryError([key.describe()])
        self._memory[key] = result
        return result

    def _solve(self, key: CacheKey, params: ModelParams) -> GroundStateResult:
        op = build_operator(key.n_sites, key.n_up, params, workers=self.workers)
        if self.method == "dense":
            return dense_ground_state(op)
        return ground_state(op, tol=self.tol, seed=self.seed, krylov_dim=self.krylov_dim)

    def missing(self, requests: Iterable[Tuple[int, Optional[int]]], params: ModelParams) -> List[str]:
        """Describe every (n_sites, n_up) request absent from memory and cache."""
        return [self.key_for(n, params, n_up).describe() for n, n_up in requests
                if not self.has(n, params, n_up)]

    def require(self, requests: Iterable[Tuple[int, Optional[int]]], params: ModelParams) -> None:
        """Fail with the full list of missing entries when computing is disabled."""
        if self.allow_compute:
            return
        missing = self.missing(list(requests), params)
        if missing:
            raise MissingCacheEntryError(missing)
