import json

import numpy as np
import pytest

from analysis.hamiltonian import ModelParams
from data.sector_basis import SectorState, build_sector
from utils.errors import InvalidParameterError
from utils.qubism import (PGM_MAXVAL, QubismImage, export_pgm, import_pgm, pixel_bitstring, qubism_indices,
                          state_to_qubism)


def test_single_configuration_lands_on_one_pixel():
    image = state_to_qubism(SectorState.basis_state("1011"))
    assert image.side == 4
    assert image.intensities[3, 1] == 1.0
    assert np.count_nonzero(image.intensities) == 1


def test_uniform_superposition_is_flat():
    image = state_to_qubism(np.full(64, 1 / 8.0))
    np.testing.assert_allclose(image.intensities, (1 / 64.0) ** 0.2)


def test_probability_is_conserved(dense_provider):
    state = dense_provider.get(8, ModelParams(1.0, 0.1)).state
    image = state_to_qubism(state)
    assert np.sum(image.intensities ** 5) == pytest.approx(1.0, abs=1e-12)
    np.testing.assert_allclose(image.probabilities().sum(), 1.0, atol=1e-12)


def test_pixel_map_is_a_bijection():
    rows, cols = qubism_indices(np.arange(256), 8)
    assert len(set(zip(rows.tolist(), cols.tolist()))) == 256
    for value in (0, 37, 200, 255):
        assert pixel_bitstring(int(rows[value]), int(cols[value]), 8) == format(value, "08b")


def test_pixels_outside_the_sector_stay_dark():
    basis = build_sector(6, 3)
    image = state_to_qubism(SectorState(basis, np.full(len(basis), 1 / np.sqrt(len(basis)))))
    assert np.count_nonzero(image.intensities) == len(basis)


def test_odd_chain_rejected():
    with pytest.raises(InvalidParameterError):
        state_to_qubism(SectorState.basis_state("101"))


def test_pgm_layout(tmp_path):
    path = export_pgm(QubismImage(0, np.array([[0.25]])), str(tmp_path / "one.pgm"))
    with open(path, "rb") as handle:
        data = handle.read()
    assert data == b"P5\n1 1\n65535\n\xff\xff"
    with open(tmp_path / "one.json") as handle:
        assert json.load(handle)["max_intensity"] == 0.25


def test_pgm_round_trip_within_quantization(tmp_path, dense_provider):
    state = dense_provider.get(8, ModelParams(1.0, 0.1)).state
    image = state_to_qubism(state, meta={"x": 1.0, "mu": 0.1})
    restored = import_pgm(export_pgm(image, str(tmp_path / "q.pgm")))
    peak = image.intensities.max()
    assert np.max(np.abs(restored.intensities - image.intensities)) <= peak / PGM_MAXVAL
    assert restored.n_sites == 8
    assert restored.meta["mu"] == 0.1


def test_empty_image_rejected(tmp_path):
    with pytest.raises(InvalidParameterError, match="empty image"):
        export_pgm(QubismImage(2, np.zeros((2, 2))), str(tmp_path / "zero.pgm"))


@pytest.mark.parametrize("payload", [b"P2\n1 1\n255\n\x00", b"P5\n1", b"P5\nx 1\n255\n\x00"])
def test_malformed_headers_rejected(tmp_path, payload):
    path = tmp_path / "bad.pgm"
    path.write_bytes(payload)
    with pytest.raises(InvalidParameterError):
        import_pgm(str(path))


def test_header_comments_are_skipped(tmp_path):
    path = tmp_path / "comment.pgm"
    path.write_bytes(b"P5\n# made by hand\n2 1\n255\n\x00\xff")
    image = import_pgm(str(path))
    np.testing.assert_allclose(image.intensities, [[0.0, 1.0]])
