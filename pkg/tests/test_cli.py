import json

import pandas as pd
import pytest

from cli.commands import EXIT_FAILURE, EXIT_MISSING_CACHE, EXIT_OK, EXIT_USAGE, FractalCLI
from data.result_store import ResultStore


@pytest.fixture
def dirs(tmp_path):
    return ["--cache-dir", str(tmp_path / "cache"), "--out", str(tmp_path / "out")]


def run(*argv):
    return FractalCLI().run(list(argv))


def test_help_exits_cleanly(capsys):
    assert run("--help") == EXIT_OK
    assert "phase-scan" in capsys.readouterr().out


def test_unknown_spec_is_a_usage_error(dirs):
    assert run("weights", "--spec", "5", "--n-min", "4", "--n-max", "6", *dirs) == EXIT_USAGE


def test_inverted_range_is_a_usage_error(dirs):
    assert run("predict", "--n-seed", "8", "--n-target", "6", *dirs) == EXIT_USAGE


def test_ed_caches_its_result(tmp_path, dirs, capsys):
    assert run("ed", "--n", "2", "--dense", *dirs) == EXIT_OK
    assert "energy" in capsys.readouterr().out
    manifests = list(ResultStore(str(tmp_path / "cache")).manifests())
    assert len(manifests) == 1 and manifests[0]["key"]["n_sites"] == 2
    with open(tmp_path / "out" / "run_config.json") as handle:
        config = json.load(handle)
    assert config["command"] == "ed"
    assert config["parameters"]["n"] == 2


def test_predict_without_cache_reports_missing_entries(dirs):
    assert run("predict", "--n-seed", "6", "--n-target", "8", *dirs) == EXIT_MISSING_CACHE


def test_predict_with_computed_seeds(tmp_path, dirs):
    assert run("predict", "--n-seed", "6", "--n-target", "8", "--dense", "--compute-missing", *dirs) == EXIT_OK
    frame = pd.read_csv(tmp_path / "out" / "energies.csv")
    assert frame["N"].tolist() == [7, 8]
    assert {"energy", "energy_per_site", "method", "spec", "ed_energy"} <= set(frame.columns)
    assert (tmp_path / "out" / "weights.csv").exists()
    with open(tmp_path / "out" / "energies.json") as handle:
        series = json.load(handle)["series"]
    assert [row["N"] for row in series] == frame["N"].tolist()
    assert [row["energy"] for row in series] == pd.read_csv(tmp_path / "out" / "energies.csv",
                                                             float_precision="round_trip")["energy"].tolist()


def test_predict_at_the_seed_size_returns_the_seed(tmp_path, dirs):
    assert run("predict", "--n-seed", "6", "--n-target", "6", "--dense", "--compute-missing", *dirs) == EXIT_OK
    frame = pd.read_csv(tmp_path / "out" / "energies.csv")
    assert frame["N"].tolist() == [6]
    assert frame["method"].tolist() == ["ED"]


def test_afw_prediction(tmp_path, dirs):
    argv = ["predict", "--method", "afw", "--n-seed", "8", "--n-target", "10", "--dense", "--compute-missing"]
    assert run(*argv, *dirs) == EXIT_OK
    frame = pd.read_csv(tmp_path / "out" / "energies.csv")
    assert frame["method"].unique().tolist() == ["AFW"]


def test_reconstruct(tmp_path, dirs):
    argv = ["reconstruct", "--n-seed", "6", "--n-target", "8", "--dense", "--compute-missing"]
    assert run(*argv, *dirs) == EXIT_OK
    frame = pd.read_csv(tmp_path / "out" / "reconstruction.csv")
    assert frame["N"].tolist() == [7, 8]
    assert frame["fidelity"].between(0.0, 1.0).all()
    assert (tmp_path / "out" / "state_N8.npy").exists()


def test_qubism_of_an_odd_chain_is_rejected(dirs):
    assert run("qubism", "--n", "5", "--dense", *dirs) == EXIT_USAGE


def test_codec_compress_then_decompress(tmp_path, dirs):
    assert run("codec", "compress", "--n", "8", "--dense", *dirs) == EXIT_OK
    code = tmp_path / "out" / "code_N8.json"
    assert code.exists()
    assert run("codec", "decompress", "--code", str(code), "--target-n", "10", *dirs) == EXIT_OK
    probs = pd.read_csv(tmp_path / "out" / "probabilities_N10.csv")["probability"]
    assert len(probs) == 252
    assert probs.sum() == pytest.approx(1.0)


def test_phase_scan(tmp_path, dirs):
    argv = ["phase-scan", "--n", "4", "--mu-min", "-1", "--mu-max", "1", "--mu-step", "1", "--dense"]
    assert run(*argv, *dirs) == EXIT_OK
    frame = pd.read_csv(tmp_path / "out" / "phase_scan.csv")
    assert frame["mu"].tolist() == [-1.0, 0.0, 1.0]


def test_ed_then_predict_from_the_cache(tmp_path, dirs):
    for n in range(1, 9):
        assert run("ed", "--n", str(n), "--dense", *dirs) == EXIT_OK
    # odd sizes store both the canonical and the ansatz reference sector
    assert len(list(ResultStore(str(tmp_path / "cache")).manifests())) == 12
    assert run("predict", "--n-seed", "8", "--n-target", "9", "--dense", *dirs) == EXIT_OK
    frame = pd.read_csv(tmp_path / "out" / "energies.csv")
    assert frame["N"].tolist() == [9]


def test_unexpected_errors_exit_with_failure(monkeypatch, dirs):
    def broken(self, args, out):
        raise RuntimeError("boom")

    monkeypatch.setattr(FractalCLI, "ed_command", broken)
    assert run("ed", "--n", "2", "--dense", *dirs) == EXIT_FAILURE
