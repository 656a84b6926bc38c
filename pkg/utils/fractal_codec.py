"""
Partitioned iterated function system (PIFS) codec for qubism images.

Each range block of side r is encoded as s * iso(downsample(D)) + o, where D is
a 2r domain block, iso one of the 8 square isometries, and downsample the 2x2
average. Decompression iterates the map from a flat image, at any power-of-two
resolution.
"""
import logging
from dataclasses import asdict, dataclass
from typing import List, Optional, Tuple, Union

import numpy as np
import pandas as pd

from config import config
from data.sector_basis import SectorState, build_sector, canonical_sector_for
from utils.errors import InvalidParameterError, ZeroNormError
from utils.helpers import LOGGER_NAME, read_json, write_json
from utils.qubism import QubismImage, qubism_indices, state_to_qubism

logger = logging.getLogger(LOGGER_NAME)

N_ISOMETRIES = 8

ImageLike = Union[QubismImage, np.ndarray]


@dataclass(frozen=True)
class BlockMapping:
    """Range block origin (rx, ry), domain origin (dx, dy), isometry, contrast, brightness.

    x counts columns and y counts rows.
    """

    rx: int
    ry: int
    dx: int
    dy: int
    iso: int
    s: float
    o: float


@dataclass(frozen=True)
class PifsCode:
    side: int
    range_size: int
    mappings: Tuple[BlockMapping, ...]

    def to_dict(self) -> dict:
        return {"side": self.side, "range_size": self.range_size,
                "mappings": [asdict(m) for m in self.mappings]}

    @classmethod
    def from_dict(cls, data: dict) -> "PifsCode":
        mappings = tuple(BlockMapping(int(m["rx"]), int(m["ry"]), int(m["dx"]), int(m["dy"]), int(m["iso"]),
                                      float(m["s"]), float(m["o"])) for m in data["mappings"])
        return cls(int(data["side"]), int(data["range_size"]), mappings)

    def save(self, path: str) -> str:
        return write_json(path, self.to_dict())

    @classmethod
    def load(cls, path: str) -> "PifsCode":
        return cls.from_dict(read_json(path))


def _pixels(image: ImageLike) -> np.ndarray:
    pixels = image.intensities if isinstance(image, QubismImage) else np.asarray(image, dtype=np.float64)
    if pixels.ndim != 2 or pixels.shape[0] != pixels.shape[1]:
        raise InvalidParameterError(f"Square image required, got shape {pixels.shape}")
    return pixels


def _is_power_of_two(value: int) -> bool:
    return value >= 1 and value & (value - 1) == 0


def apply_isometry(block: np.ndarray, iso: int) -> np.ndarray:
    """Rotations by 0/90/180/270 degrees, followed by a mirror for iso >= 4."""
    out = np.rot90(block, iso % 4)
    return out[:, ::-1] if iso >= 4 else out


def downsample(block: np.ndarray) -> np.ndarray:
    """2x2 average."""
    h, w = block.shape
    return block.reshape(h // 2, 2, w // 2, 2).mean(axis=(1, 3))


def _domain_pool(pixels: np.ndarray, range_size: int, stride: int):
    side = pixels.shape[0]
    domain = 2 * range_size
    blocks, origins = [], []
    for dy in range(0, side - domain + 1, stride):
        for dx in range(0, side - domain + 1, stride):
            reduced = downsample(pixels[dy:dy + domain, dx:dx + domain])
            for iso in range(N_ISOMETRIES):
                blocks.append(apply_isometry(reduced, iso))
                origins.append((dx, dy, iso))
    return np.array(blocks), origins


def _fit(target: np.ndarray, pool: np.ndarray, s_max: float) -> Tuple[int, float, float, float]:
    """Best (index, s, o, squared error) over the pool; ties go to the lowest index."""
    n = target.size
    sum_d = pool.sum(axis=(1, 2))
    sum_dd = np.square(pool).sum(axis=(1, 2))
    sum_r = target.sum()
    sum_dr = (pool * target).sum(axis=(1, 2))
    denom = n * sum_dd - sum_d ** 2
    flat = denom <= 1e-14 * max(1.0, float(np.max(np.abs(n * sum_dd))))
    s = np.where(flat, 0.0, (n * sum_dr - sum_d * sum_r) / np.where(flat, 1.0, denom))
    s = np.clip(s, -s_max, s_max)
    o = (sum_r - s * sum_d) / n
    errors = np.square(s[:, None, None] * pool + o[:, None, None] - target).sum(axis=(1, 2))
    k = int(np.argmin(errors))
    return k, float(s[k]), float(o[k]), float(errors[k])


def compress(image: ImageLike, range_size: Optional[int] = None, domain_stride: Optional[int] = None,
             s_max: Optional[float] = None) -> PifsCode:
    """Encode an image as a PIFS code.

    Args:
        image: Square image (QubismImage or array)
        range_size: Range block side, a power of two dividing the image side
        domain_stride: Step between candidate domain origins
        s_max: Contrast bound, 0 <= s_max < 1

    Returns:
        PifsCode with one mapping per range block in scan order
    """
    range_size = config.CODEC_RANGE_SIZE if range_size is None else range_size
    domain_stride = config.CODEC_DOMAIN_STRIDE if domain_stride is None else domain_stride
    s_max = config.CODEC_S_MAX if s_max is None else s_max
    pixels = _pixels(image)
    side = pixels.shape[0]
    if not _is_power_of_two(range_size) or side % range_size or side < 2 * range_size:
        raise InvalidParameterError(f"Range size {range_size} does not fit an image of side {side}")
    if domain_stride < 1:
        raise InvalidParameterError(f"Domain stride must be positive, got {domain_stride}")
    if not 0.0 <= s_max < 1.0:
        raise InvalidParameterError(f"s_max must lie in [0, 1), got {s_max}")

    pool, origins = _domain_pool(pixels, range_size, domain_stride)
    mappings = []
    for ry in range(0, side, range_size):
        for rx in range(0, side, range_size):
            k, s, o, _ = _fit(pixels[ry:ry + range_size, rx:rx + range_size], pool, s_max)
            dx, dy, iso = origins[k]
            mappings.append(BlockMapping(rx, ry, dx, dy, iso, s, o))
    logger.info(f"Compressed {side}x{side} image into {len(mappings)} mappings "
                f"({len(origins)} candidate transforms)")
    return PifsCode(side, range_size, tuple(mappings))


def _apply_map(code: PifsCode, current: np.ndarray, scale: float) -> np.ndarray:
    r = int(round(code.range_size * scale))
    out = np.empty_like(current)
    for m in code.mappings:
        dx, dy = int(round(m.dx * scale)), int(round(m.dy * scale))
        rx, ry = int(round(m.rx * scale)), int(round(m.ry * scale))
        block = apply_isometry(downsample(current[dy:dy + 2 * r, dx:dx + 2 * r]), m.iso)
        out[ry:ry + r, rx:rx + r] = m.s * block + m.o
    return out


def decompress_iterates(code: PifsCode, target_side: Optional[int] = None,
                        n_iterations: Optional[int] = None) -> List[np.ndarray]:
    """All iterates of the PIFS map at target_side, starting from zeros."""
    target_side = code.side if target_side is None else target_side
    n_iterations = config.CODEC_ITERATIONS if n_iterations is None else n_iterations
    scale = target_side / code.side
    r = code.range_size * scale
    if not _is_power_of_two(target_side) or r != int(r) or r < 1 or target_side < 2 * r:
        raise InvalidParameterError(f"Cannot decompress a side-{code.side} code to side {target_side}")
    if n_iterations < 1:
        raise InvalidParameterError("At least one iteration required")
    iterates = [np.zeros((target_side, target_side))]
    for _ in range(n_iterations):
        iterates.append(_apply_map(code, iterates[-1], scale))
    return iterates


def decompress(code: PifsCode, target_side: Optional[int] = None, n_iterations: Optional[int] = None) -> np.ndarray:
    """The n_iterations-th iterate of the PIFS map at target_side."""
    return decompress_iterates(code, target_side, n_iterations)[-1]


def iterate_differences(iterates: List[np.ndarray]) -> np.ndarray:
    """max |x_(k+1) - x_k| for consecutive iterates."""
    return np.array([float(np.max(np.abs(b - a))) for a, b in zip(iterates[:-1], iterates[1:])])


def range_residuals(image: ImageLike, code: PifsCode) -> np.ndarray:
    """Squared error of every mapping applied to the source image itself."""
    pixels = _pixels(image)
    if pixels.shape[0] != code.side:
        raise InvalidParameterError("Code and image sizes differ")
    mapped = _apply_map(code, pixels, 1.0)
    r = code.range_size
    return np.array([float(np.square(mapped[m.ry:m.ry + r, m.rx:m.rx + r]
                                     - pixels[m.ry:m.ry + r, m.rx:m.rx + r]).sum()) for m in code.mappings])


def mask_and_renormalize(image: ImageLike, n_sites: int, exponent: Optional[float] = None) -> np.ndarray:
    """Sector probability vector from an image: p = max(I, 0)^(1/exponent), renormalized.

    The vector is ordered like build_sector(n_sites, canonical_sector_for(n_sites)).
    """
    exponent = config.QUBISM_EXPONENT if exponent is None else exponent
    pixels = _pixels(image)
    if pixels.shape[0] != 1 << (n_sites // 2) or n_sites % 2:
        raise InvalidParameterError(f"Image of side {pixels.shape[0]} does not match {n_sites} sites")
    basis = build_sector(n_sites, canonical_sector_for(n_sites))
    rows, cols = qubism_indices(basis.states, n_sites)
    probs = np.clip(pixels[rows, cols], 0.0, None) ** (1.0 / exponent)
    total = probs.sum()
    if total <= 0.0:
        raise ZeroNormError("Image has no weight inside the charge sector")
    return probs / total


def sector_image(probabilities: np.ndarray, n_sites: int, exponent: Optional[float] = None) -> QubismImage:
    """Qubism image of a sector probability vector."""
    basis = build_sector(n_sites, canonical_sector_for(n_sites))
    amplitudes = np.sqrt(np.clip(probabilities, 0.0, None))
    return state_to_qubism(SectorState(basis, amplitudes), exponent)


def classical_fidelity(p: np.ndarray, q: np.ndarray) -> float:
    """(sum_i sqrt(p_i q_i))^2 of two distributions."""
    p, q = np.asarray(p, dtype=np.float64), np.asarray(q, dtype=np.float64)
    if p.shape != q.shape:
        raise InvalidParameterError("Distributions of different length")
    return float(np.sum(np.sqrt(np.clip(p, 0, None) * np.clip(q, 0, None))) ** 2)


def psnr(reference: np.ndarray, other: np.ndarray, peak: Optional[float] = None) -> float:
    reference, other = np.asarray(reference, dtype=np.float64), np.asarray(other, dtype=np.float64)
    mse = float(np.mean(np.square(reference - other)))
    peak = float(np.max(np.abs(reference))) if peak is None else peak
    if mse == 0.0:
        return float("inf")
    return 10.0 * np.log10(peak * peak / mse)


def codec_fidelity_series(params, n_seed: int, n_max: int, provider, range_size: Optional[int] = None,
                          domain_stride: Optional[int] = None, s_max: Optional[float] = None,
                          n_iterations: Optional[int] = None) -> pd.DataFrame:
    """Classical fidelity of codec-extrapolated distributions against exact ground states.

    The qubism image at n_seed is compressed once and decompressed to every
    even N in [n_seed, n_max].
    """
    if n_seed % 2 or n_max < n_seed:
        raise InvalidParameterError(f"Need an even seed size and n_max >= n_seed, got {n_seed}, {n_max}")
    seed = provider.get(n_seed, params)
    code = compress(state_to_qubism(seed.state), range_size, domain_stride, s_max)
    rows = []
    for n_sites in range(n_seed, n_max + 1, 2):
        image = decompress(code, 1 << (n_sites // 2), n_iterations)
        predicted = mask_and_renormalize(image, n_sites)
        exact = provider.get(n_sites, params).state.probabilities()
        value = classical_fidelity(predicted, exact)
        rows.append({"N": n_sites, "classical_fidelity": value})
        logger.info(f"Codec N={n_sites}: classical fidelity {value:.6f}")
    return pd.DataFrame(rows, columns=["N", "classical_fidelity"])
