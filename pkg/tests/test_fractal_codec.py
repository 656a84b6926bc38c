import numpy as np
import pytest

from analysis.hamiltonian import ModelParams
from utils.errors import InvalidParameterError, ZeroNormError
from utils.fractal_codec import (BlockMapping, PifsCode, apply_isometry, classical_fidelity,
                                 codec_fidelity_series, compress, decompress, decompress_iterates,
                                 iterate_differences, mask_and_renormalize, psnr, range_residuals, sector_image)
from utils.qubism import state_to_qubism


def _self_similar_image():
    mappings = (
        BlockMapping(0, 0, 0, 0, 0, 0.5, 0.10),
        BlockMapping(4, 0, 0, 0, 1, -0.4, 0.20),
        BlockMapping(0, 4, 0, 0, 2, 0.3, -0.10),
        BlockMapping(4, 4, 0, 0, 5, 0.6, 0.05),
    )
    return decompress(PifsCode(8, 4, mappings), 8, 200)


def test_isometries_are_distinct():
    block = np.arange(16.0).reshape(4, 4)
    images = {apply_isometry(block, k).tobytes() for k in range(8)}
    assert len(images) == 8


def test_constant_image_is_encoded_exactly():
    image = np.full((16, 16), 0.37)
    code = compress(image, range_size=4, domain_stride=4, s_max=0.9)
    assert all(m.s == 0.0 for m in code.mappings)
    assert all(m.o == pytest.approx(0.37) for m in code.mappings)
    np.testing.assert_allclose(decompress(code, 16, 3), 0.37)
    np.testing.assert_allclose(decompress(code, 64, 3), 0.37)


def test_self_similar_image_has_vanishing_residuals():
    image = _self_similar_image()
    code = compress(image, range_size=4, domain_stride=4, s_max=0.9)
    assert range_residuals(image, code).max() < 1e-10
    np.testing.assert_allclose(decompress(code, 8, 400), image, atol=1e-8)


def test_iterates_contract(dense_provider):
    image = state_to_qubism(dense_provider.get(8, ModelParams(1.0, 0.1)).state)
    code = compress(image, range_size=4, domain_stride=4, s_max=0.9)
    assert all(abs(m.s) <= 0.9 for m in code.mappings)
    diffs = iterate_differences(decompress_iterates(code, 16, 15))
    assert np.all(diffs[1:] <= 0.9 * diffs[:-1] + 1e-15)


def test_compression_is_deterministic(dense_provider):
    image = state_to_qubism(dense_provider.get(8, ModelParams(1.0, 0.1)).state)
    first = compress(image, range_size=4, domain_stride=2)
    second = compress(image, range_size=4, domain_stride=2)
    assert first.to_dict() == second.to_dict()


def test_code_file_round_trip(tmp_path):
    code = compress(_self_similar_image(), range_size=4, domain_stride=4)
    loaded = PifsCode.load(code.save(str(tmp_path / "code.json")))
    assert loaded == code


@pytest.mark.parametrize("kwargs", [{"range_size": 3}, {"range_size": 16}, {"s_max": 1.0}, {"domain_stride": 0}])
def test_invalid_codec_parameters(kwargs):
    with pytest.raises(InvalidParameterError):
        compress(np.ones((16, 16)), **kwargs)


def test_decompression_target_must_fit():
    code = compress(np.ones((16, 16)), range_size=4)
    with pytest.raises(InvalidParameterError):
        decompress(code, 2)
    with pytest.raises(InvalidParameterError):
        decompress(code, 24)


def test_mask_keeps_the_charge_sector_only():
    flat = state_to_qubism(np.full(16, 0.25))
    probs = mask_and_renormalize(flat, 4)
    np.testing.assert_allclose(probs, np.full(6, 1 / 6))


def test_mask_is_idempotent_on_sector_images(dense_provider):
    exact = dense_provider.get(8, ModelParams(1.0, 0.1)).state.probabilities()
    probs = mask_and_renormalize(sector_image(exact, 8), 8)
    np.testing.assert_allclose(probs, exact, atol=1e-12)


def test_mask_of_dark_sector_fails():
    image = np.zeros((4, 4))
    image[0, 0] = 1.0
    with pytest.raises(ZeroNormError):
        mask_and_renormalize(image, 4)


def test_classical_fidelity_and_psnr():
    p = np.array([0.5, 0.5, 0.0])
    assert classical_fidelity(p, p) == pytest.approx(1.0)
    assert classical_fidelity(p, np.array([0.0, 0.0, 1.0])) == 0.0
    assert psnr(np.ones((2, 2)), np.ones((2, 2))) == float("inf")


def test_codec_fidelity_series(dense_provider):
    frame = codec_fidelity_series(ModelParams(1.0, 0.1), 8, 10, dense_provider)
    assert frame["N"].tolist() == [8, 10]
    assert frame["classical_fidelity"].between(0.0, 1.0 + 1e-12).all()
