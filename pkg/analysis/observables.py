"""
Renyi entropy of ground-state distributions and mass scans across the transition.
"""
import logging
import os
from dataclasses import dataclass
from typing import Iterable, Optional, Tuple, Union

import numpy as np
import pandas as pd

from analysis.hamiltonian import ModelParams
from data.sector_basis import SectorState
from utils.errors import InvalidParameterError
from utils.helpers import LOGGER_NAME
from utils.qubism import QubismImage, export_pgm, pixel_bitstring, state_to_qubism

logger = logging.getLogger(LOGGER_NAME)


def renyi_s2(state: Union[SectorState, np.ndarray], M: Optional[int] = None) -> float:
    """-log(sum_i P_i^2) / log M.

    Args:
        state: Normalized SectorState, or a probability vector
        M: Hilbert space dimension; 2^N by default for a SectorState

    Returns:
        0 for a basis state, 1 for the uniform distribution over M states
    """
    if isinstance(state, SectorState):
        probs = state.probabilities()
        M = (1 << state.n_sites) if M is None else M
    else:
        probs = np.asarray(state, dtype=np.float64)
        if M is None:
            raise InvalidParameterError("M required for a bare probability vector")
    if M < 2:
        raise InvalidParameterError(f"M must be at least 2, got {M}")
    purity = float(np.sum(probs * probs))
    if purity <= 0.0:
        raise InvalidParameterError("Distribution has no weight")
    return -np.log(purity) / np.log(M)


def dominant_state(state: SectorState) -> Tuple[str, float]:
    """Most probable configuration and its probability (lowest index on ties)."""
    probs = state.probabilities()
    k = int(np.argmax(probs))
    return state.basis.bitstring(k), float(probs[k])


def dominant_pixel(image: QubismImage) -> Tuple[int, int, str]:
    """Brightest pixel, ties broken by lowest (row, col), and the configuration it shows."""
    if image.intensities.size == 0 or float(image.intensities.max()) <= 0.0:
        raise InvalidParameterError("empty image")
    row, col = np.unravel_index(int(np.argmax(image.intensities)), image.intensities.shape)
    return int(row), int(col), pixel_bitstring(int(row), int(col), image.n_sites)


@dataclass
class EntropyScan:
    """Ground-state energy, S2 and dominant configuration along a mu sweep."""

    x: float
    n_sites: int
    frame: pd.DataFrame

    @property
    def mu(self) -> np.ndarray:
        return self.frame["mu"].to_numpy()

    def derivative(self) -> np.ndarray:
        """dS2/dmu by central differences (one-sided at the ends)."""
        return np.gradient(self.frame["s2"].to_numpy(), self.mu)

    def transition_mu(self) -> float:
        """mu at max |dS2/dmu|."""
        if len(self.frame) < 2:
            raise InvalidParameterError("At least two mu points needed")
        return float(self.mu[int(np.argmax(np.abs(self.derivative())))])

    def dominant_switches(self) -> int:
        dominant = self.frame["dominant"].tolist()
        return sum(1 for a, b in zip(dominant[:-1], dominant[1:]) if a != b)

    def to_csv(self, path: str) -> str:
        self.frame.to_csv(path, index=False, float_format="%.17g")
        return path


def phase_scan(x: float, mu_list: Iterable[float], n_sites: int, provider, image_dir: Optional[str] = None,
               sector_dimension: bool = False, epsilon0: float = 0.0) -> EntropyScan:
    """Exact ground state, S2 and dominant configuration for every mu.

    Args:
        x: Hopping coupling
        mu_list: Strictly ordered masses
        n_sites: Chain length
        provider: GroundStateProvider
        image_dir: Export a qubism PGM per mu here (even N only)
        sector_dimension: Use the sector dimension for M instead of 2^N
        epsilon0: Background field
    """
    mu_values = np.asarray(list(mu_list), dtype=np.float64)
    steps = np.diff(mu_values)
    if len(mu_values) == 0 or not (np.all(steps > 0) or np.all(steps < 0)):
        raise InvalidParameterError("mu values must be strictly ordered")
    rows = []
    for mu in mu_values:
        params = ModelParams(x, float(mu), epsilon0)
        result = provider.get(n_sites, params)
        M = len(result.state.basis) if sector_dimension else 1 << n_sites
        s2 = renyi_s2(result.state, max(M, 2))
        bitstring, probability = dominant_state(result.state)
        image_path = None
        if image_dir is not None and n_sites % 2 == 0:
            image = state_to_qubism(result.state, meta={"x": x, "mu": float(mu)})
            image_path = export_pgm(image, os.path.join(image_dir, f"qubism_N{n_sites}_mu{mu:+.4f}.pgm"))
        rows.append({"mu": float(mu), "energy": result.energy, "s2": s2, "dominant": bitstring,
                     "dominant_probability": probability, "image": image_path})
        logger.info(f"Scan N={n_sites} x={x} mu={mu:+.4f}: S2={s2:.6f} dominant={bitstring}")
    frame = pd.DataFrame(rows, columns=["mu", "energy", "s2", "dominant", "dominant_probability", "image"])
    return EntropyScan(x, n_sites, frame)
