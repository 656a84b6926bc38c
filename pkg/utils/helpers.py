"""
Utility functions for the Schwinger fractal-ansatz toolkit.
"""
import json
import logging
import os
from typing import Any, Dict

import numpy as np

LOGGER_NAME = 'schwinger_fractal'


# Set up logging
def setup_logging(log_file, log_level):
    """Set up logging configuration."""
    log_dir = os.path.dirname(log_file)
    if log_dir and not os.path.exists(log_dir):
        os.makedirs(log_dir)

    logging.basicConfig(
        level=getattr(logging, log_level.upper(), logging.INFO),
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        handlers=[
            logging.FileHandler(log_file),
            logging.StreamHandler()
        ]
    )
    return logging.getLogger(LOGGER_NAME)


# Number formatting
def format_float(value: float) -> str:
    """Format a float with 17 significant digits (round-trip safe)."""
    return f"{float(value):.17g}"


def bits_to_str(value: int, n_sites: int) -> str:
    """Render an integer configuration as a bitstring, site 0 first."""
    if n_sites == 0:
        return ""
    return format(int(value), f"0{n_sites}b")


def str_to_bits(bitstring: str) -> int:
    """Parse a bitstring (site 0 first) into its integer value."""
    if bitstring == "":
        return 0
    if any(c not in "01" for c in bitstring):
        raise ValueError(f"Not a bitstring: {bitstring!r}")
    return int(bitstring, 2)


def complement(bitstring: str) -> str:
    """Flip every bit of a bitstring."""
    return bitstring.translate(str.maketrans("01", "10"))


def site_bits(states: np.ndarray, n_sites: int) -> np.ndarray:
    """Return the (len(states), n_sites) 0/1 matrix of site occupations."""
    shifts = np.arange(n_sites - 1, -1, -1, dtype=np.int64)
    return ((np.asarray(states, dtype=np.int64)[:, None] >> shifts) & 1).astype(np.int8)


# JSON helpers
def write_json(path: str, payload: Dict[str, Any]) -> str:
    """Write a JSON document, creating the parent directory."""
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, "w") as handle:
        json.dump(payload, handle, indent=2, sort_keys=True)
    return path


def read_json(path: str) -> Dict[str, Any]:
    with open(path) as handle:
        return json.load(handle)
