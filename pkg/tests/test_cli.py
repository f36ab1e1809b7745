import json
import math

import numpy as np
import pytest

from deepscatter.cli import ConfigError, RunConfig, count_predictions, main, run
from deepscatter.io import SUFFIX, read_features, write_wav
from deepscatter.synth import speech_like

RATE = 22050.0


@pytest.fixture(scope="module")
def clip3(tmp_path_factory):
    path = tmp_path_factory.mktemp("audio") / "speech3.wav"
    write_wav(speech_like(3.0, RATE, seed=5), path)
    return path


@pytest.fixture(scope="module")
def clip1(tmp_path_factory):
    path = tmp_path_factory.mktemp("audio") / "speech1.wav"
    write_wav(speech_like(1.0, RATE, seed=6), path)
    return path


def test_manifest_counts(clip3, tmp_path):
    status, manifest = run(RunConfig(str(clip3), output_dir=str(tmp_path)))
    assert status == 0
    pred = count_predictions((8, 1, 1), 0.19, RATE)
    assert 0.5 <= manifest["path_counts"]["2"] / pred["second"] <= 2
    assert 0.5 <= manifest["path_counts"]["1"] / pred["first"] <= 2
    assert all(0 < b["alpha"] < 1 and b["A_max"] <= 1 + 1e-6 for b in manifest["banks"])
    e = manifest["energy"]
    assert e["total"] <= 1 + 1e-6
    saved = json.loads((tmp_path / "speech3.manifest.json").read_text())
    assert saved["path_counts"] == manifest["path_counts"]
    assert set(saved["versions"]) >= {"deepscatter", "numpy", "scipy", "python"}
    table = read_features(tmp_path / "speech3.features.csv")
    assert table.values.shape == (manifest["frames"], sum(manifest["path_counts"].values()))


@pytest.mark.parametrize("fmt", ["csv", "jsonl", "binary"])
def test_determinism(clip1, tmp_path, fmt):
    args = ["scatter", str(clip1), "--normalize", "--log", "--freq-scatter", "U", "--format", fmt, "--T", "46"]
    assert main(args + ["--output-dir", str(tmp_path / "a")]) == 0
    assert main(args + ["--output-dir", str(tmp_path / "b")]) == 0
    name = "speech1.features" + SUFFIX[fmt]
    assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_invert_outputs(clip1, tmp_path):
    assert main(["scatter", str(clip1), "--invert", "--output-dir", str(tmp_path)]) == 0
    report = json.loads((tmp_path / "speech1.inversion.json").read_text())
    assert (tmp_path / "speech1.reconstruction.wav").exists()
    assert report["max_order"] == 2
    assert math.isfinite(report["scalogram_error"])
    assert report["rl_min_iterate"] >= 0
    assert report["gl_final_modulus_error"] <= report["gl_initial_modulus_error"]


def test_invert_subcommand(clip1, tmp_path):
    assert main(["invert", str(clip1), "--max-order", "1", "--T", "46", "--output-dir", str(tmp_path)]) == 0
    assert (tmp_path / "speech1.reconstruction.wav").exists()
    assert not (tmp_path / "speech1.features.csv").exists()


def test_env_output_dir(clip1, tmp_path, monkeypatch):
    monkeypatch.setenv("DEEPSCATTER_OUTPUT_DIR", str(tmp_path / "env"))
    assert main(["scatter", str(clip1), "--T", "46", "--max-order", "1"]) == 0
    assert (tmp_path / "env" / "speech1.manifest.json").exists()
    assert main(["scatter", str(clip1), "--T", "46", "--max-order", "1", "--output-dir", str(tmp_path / "flag")]) == 0
    assert (tmp_path / "flag" / "speech1.manifest.json").exists()


def test_plot_data(clip1, tmp_path):
    assert main(["scatter", str(clip1), "--T", "46", "--plot-data", "--output-dir", str(tmp_path)]) == 0
    assert (tmp_path / "speech1.plot-order1.csv").exists()
    assert (tmp_path / "speech1.plot-order2.csv").exists()


@pytest.mark.parametrize("over", [
    {"T": 0.0}, {"max_order": 4}, {"Q": (0.5, 1)}, {"log": True},
    {"normalize": True, "freq_scatter": "S"}, {"format": "xml"}, {"epsilon": "-1"},
    {"epsilon": "abc"}, {"invert": True, "max_order": 3}, {"norm_window": -5.0},
])
def test_config_errors_before_compute(tmp_path, over):
    # the input does not exist: a config error must be raised before any I/O
    cfg = RunConfig(str(tmp_path / "missing.wav"), output_dir=str(tmp_path / "out"), **over)
    with pytest.raises(ConfigError):
        run(cfg)
    assert not (tmp_path / "out").exists()


def test_cli_error_exit_codes(tmp_path, capsys):
    assert main(["scatter", str(tmp_path / "missing.wav"), "--output-dir", str(tmp_path)]) == 2
    assert main(["scatter", str(tmp_path / "missing.wav"), "--log"]) == 2
    assert "log needs normalize" in capsys.readouterr().err


def test_synth_compare(tmp_path, capsys):
    assert main(["synth", "two-tone", "--compare", "--duration", "2", "--output-dir", str(tmp_path)]) == 0
    report = json.loads((tmp_path / "two-tone.compare.json").read_text())
    assert abs(report["peak"]["lambda2_hz"] - 75) <= 75 / 8     # one Q2 = 8 bandwidth
    assert (tmp_path / "two-tone.wav").exists()
    assert main(["synth", "speech", "--duration", "0.5", "--output-dir", str(tmp_path)]) == 0
    assert main(["synth", "speech", "--compare", "--output-dir", str(tmp_path)]) == 2


def test_bank_subcommand(tmp_path, capsys):
    assert main(["bank", "--Q", "8", "--T", "190", "--out", "b.json", "--output-dir", str(tmp_path)]) == 0
    d = json.loads((tmp_path / "b.json").read_text())
    assert d["frame_condition"] and 0 < d["alpha"] < 1
