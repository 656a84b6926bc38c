"""
Qubism raster of an even-N state and 16-bit PGM export.

Rows are indexed by the spins on even sites (0, 2, ..., N-2) and columns by the
spins on odd sites, the lower site index being the more significant bit.
"""
import logging
import os
from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Tuple, Union

import numpy as np

from config import config
from data.sector_basis import SectorState
from utils.errors import InvalidParameterError
from utils.helpers import LOGGER_NAME, bits_to_str, read_json, site_bits, write_json

logger = logging.getLogger(LOGGER_NAME)

PGM_MAXVAL = 65535


@dataclass
class QubismImage:
    """Square intensity raster with the metadata needed to invert it."""

    n_sites: int
    intensities: np.ndarray
    meta: Dict[str, Any] = field(default_factory=dict)

    @property
    def side(self) -> int:
        return int(self.intensities.shape[0])

    @property
    def exponent(self) -> float:
        return float(self.meta.get("exponent", config.QUBISM_EXPONENT))

    def probabilities(self) -> np.ndarray:
        """Pixel probabilities p = intensity^(1/exponent)."""
        return np.clip(self.intensities, 0.0, None) ** (1.0 / self.exponent)


def _fold(bits: np.ndarray) -> np.ndarray:
    weights = 1 << np.arange(bits.shape[1] - 1, -1, -1, dtype=np.int64)
    return bits.astype(np.int64) @ weights


def qubism_indices(states: np.ndarray, n_sites: int) -> Tuple[np.ndarray, np.ndarray]:
    """Pixel (row, col) of each configuration."""
    if n_sites % 2:
        raise InvalidParameterError(f"Qubism needs an even number of sites, got {n_sites}")
    bits = site_bits(states, n_sites)
    return _fold(bits[:, 0::2]), _fold(bits[:, 1::2])


def pixel_bitstring(row: int, col: int, n_sites: int) -> str:
    """Configuration shown at pixel (row, col)."""
    half = n_sites // 2
    even, odd = bits_to_str(row, half), bits_to_str(col, half)
    return "".join(a + b for a, b in zip(even, odd))


def state_to_qubism(state: Union[SectorState, np.ndarray], exponent: Optional[float] = None,
                    meta: Optional[Dict[str, Any]] = None) -> QubismImage:
    """Map a sector state or a full 2^N vector to its qubism image."""
    exponent = config.QUBISM_EXPONENT if exponent is None else exponent
    if isinstance(state, SectorState):
        n_sites = state.n_sites
        states = state.basis.states
        probs = state.probabilities()
    else:
        vector = np.asarray(state, dtype=np.float64)
        n_sites = int(vector.shape[0]).bit_length() - 1
        if vector.shape[0] != 1 << n_sites:
            raise InvalidParameterError("Full-space vector length must be a power of two")
        states = np.arange(vector.shape[0], dtype=np.int64)
        probs = vector ** 2
    rows, cols = qubism_indices(states, n_sites)
    side = 1 << (n_sites // 2)
    image = np.zeros((side, side))
    image[rows, cols] = probs ** exponent
    info = {"n_sites": n_sites, "exponent": exponent}
    info.update(meta or {})
    return QubismImage(n_sites, image, info)


def _sidecar_path(path: str) -> str:
    return os.path.splitext(path)[0] + ".json"


def export_pgm(image: QubismImage, path: str) -> str:
    """Write a binary 16-bit PGM plus a JSON sidecar holding the scale."""
    peak = float(image.intensities.max()) if image.intensities.size else 0.0
    if peak <= 0.0:
        raise InvalidParameterError("empty image")
    samples = np.rint(PGM_MAXVAL * np.clip(image.intensities, 0.0, None) / peak).astype(">u2")
    height, width = samples.shape
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, "wb") as f:
        f.write(b"P5\n")
        f.write(f"{width} {height}\n".encode())
        f.write(f"{PGM_MAXVAL}\n".encode())
        f.write(samples.tobytes())
    sidecar = {"n_sites": image.n_sites, "x": image.meta.get("x"), "mu": image.meta.get("mu"),
               "max_intensity": peak, "exponent": image.exponent}
    write_json(_sidecar_path(path), sidecar)
    logger.info(f"Wrote {width}x{height} qubism image to {path}")
    return path


def _read_header(data: bytes) -> Tuple[int, int, int, int]:
    """Parse 'P5 width height maxval'; returns those plus the payload offset."""
    tokens = []
    pos = 0
    while len(tokens) < 4:
        if pos >= len(data):
            raise InvalidParameterError("Truncated PGM header")
        if data[pos:pos + 1] == b"#":
            pos = data.find(b"\n", pos)
            if pos < 0:
                raise InvalidParameterError("Truncated PGM header")
            continue
        if data[pos:pos + 1].isspace():
            pos += 1
            continue
        end = pos
        while end < len(data) and not data[end:end + 1].isspace():
            end += 1
        tokens.append(data[pos:end])
        pos = end
    # exactly one whitespace byte separates maxval from the raster
    pos += 1
    if tokens[0] != b"P5":
        raise InvalidParameterError(f"Not a binary PGM (magic {tokens[0]!r})")
    try:
        width, height, maxval = (int(t) for t in tokens[1:])
    except ValueError:
        raise InvalidParameterError("Malformed PGM header") from None
    if width <= 0 or height <= 0 or not 0 < maxval <= PGM_MAXVAL:
        raise InvalidParameterError("Malformed PGM header")
    return width, height, maxval, pos


def import_pgm(path: str) -> QubismImage:
    """Read a PGM written by export_pgm; intensities are rescaled by the sidecar."""
    with open(path, "rb") as f:
        data = f.read()
    width, height, maxval, offset = _read_header(data)
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    count = width * height
    if len(data) - offset < count * dtype.itemsize:
        raise InvalidParameterError("Truncated PGM raster")
    samples = np.frombuffer(data, dtype=dtype, count=count, offset=offset).reshape(height, width)
    meta: Dict[str, Any] = {}
    sidecar = _sidecar_path(path)
    if os.path.exists(sidecar):
        meta = read_json(sidecar)
    peak = float(meta.get("max_intensity", 1.0))
    n_sites = int(meta.get("n_sites", 2 * (width.bit_length() - 1)))
    meta.setdefault("exponent", config.QUBISM_EXPONENT)
    return QubismImage(n_sites, samples.astype(np.float64) * peak / maxval, meta)
