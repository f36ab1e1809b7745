import json

import numpy as np
import pytest
from scipy.io import wavfile

from deepscatter.freqscatter import freq_scatter
from deepscatter.io import (FeatureFileError, WavError, export_features, export_plot_data, feature_table,
                            read_features, read_wav, write_wav)
from deepscatter.normalization import log_scattering, normalize
from deepscatter.scattering import scattering
from deepscatter.signal import RealSignal
from deepscatter.synth import harmonic_clip

RATE = 22050


def test_read_full_scale_sine(tmp_path):
    t = np.arange(RATE) / RATE
    data = np.round(np.sin(2 * np.pi * (RATE / 40) * t) * 32767).astype(np.int16)
    wavfile.write(tmp_path / "s.wav", RATE, data)
    x = read_wav(tmp_path / "s.wav")
    assert len(x) == RATE and x.rate == RATE
    assert np.abs(x.samples).max() == pytest.approx(1.0, abs=1e-4)


def test_stereo_identical_channels(tmp_path):
    mono = (np.random.default_rng(0).uniform(-0.5, 0.5, 1000)).astype(np.float32)
    wavfile.write(tmp_path / "m.wav", RATE, mono)
    wavfile.write(tmp_path / "st.wav", RATE, np.column_stack([mono, mono]))
    assert np.array_equal(read_wav(tmp_path / "st.wav").samples, read_wav(tmp_path / "m.wav").samples)


def test_truncated_and_corrupt(tmp_path):
    data = np.zeros(4000, np.int16)
    wavfile.write(tmp_path / "ok.wav", RATE, data)
    raw = (tmp_path / "ok.wav").read_bytes()
    (tmp_path / "cut.wav").write_bytes(raw[:len(raw) // 2])
    with pytest.raises(WavError):
        read_wav(tmp_path / "cut.wav")
    (tmp_path / "junk.wav").write_bytes(b"not a wav file at all")
    with pytest.raises(WavError):
        read_wav(tmp_path / "junk.wav")
    wavfile.write(tmp_path / "i32.wav", RATE, np.zeros(10, np.int32))
    with pytest.raises(WavError):
        read_wav(tmp_path / "i32.wav")
    with pytest.raises(FileNotFoundError):
        read_wav(tmp_path / "missing.wav")


@pytest.mark.parametrize("encoding", ["float32", "pcm16"])
def test_wav_round_trip(tmp_path, encoding):
    x = RealSignal(0.5 * np.sin(np.arange(500) / 7.0), RATE)
    write_wav(x, tmp_path / "x.wav", encoding)
    back = read_wav(tmp_path / "x.wav")
    assert np.allclose(back.samples, x.samples, atol=1e-4 if encoding == "pcm16" else 1e-7)


@pytest.fixture(scope="module")
def results():
    x = harmonic_clip(220.0, 0.5, float(RATE))
    st = scattering(x, 0.046, (8, 1), 2)
    lg = log_scattering(normalize(st, x))
    return {"scattering": st, "log": lg, "freq": freq_scatter(lg, "S")}


@pytest.mark.parametrize("fmt", ["csv", "jsonl", "binary"])
@pytest.mark.parametrize("kind", ["scattering", "log", "freq"])
def test_feature_round_trip(tmp_path, results, fmt, kind):
    table = feature_table(results[kind])
    path = export_features(results[kind], fmt, tmp_path / f"f.{fmt}")
    back = read_features(path)
    assert back.kind == table.kind
    assert back.columns == table.columns
    assert np.array_equal(back.values, table.values)
    assert np.array_equal(back.times, table.times)


def test_canonical_order(results):
    table = feature_table(results["scattering"])
    keys = [(c.order, c.lambda_hz) for c in table.columns]
    assert keys == sorted(keys)
    assert table.columns[0].order == 0
    ftab = feature_table(results["freq"])
    assert [c.key() for c in ftab.columns] == sorted(c.key() for c in ftab.columns)


def test_csv_layout(tmp_path, results):
    path = export_features(results["scattering"], "csv", tmp_path / "f.csv")
    lines = path.read_text().splitlines()
    header = json.loads(lines[0][2:])
    assert header["frames"] == len(results["scattering"].times)
    assert lines[1] == "t,path,order,lambda_hz,quefrency,value"
    assert len(lines) == 2 + header["frames"] * len(header["paths"])


def test_corrupt_feature_files(tmp_path, results):
    path = export_features(results["scattering"], "binary", tmp_path / "f.bin")
    raw = path.read_bytes()
    (tmp_path / "cut.bin").write_bytes(raw[:-8])
    with pytest.raises(FeatureFileError):
        read_features(tmp_path / "cut.bin")
    csv_path = export_features(results["scattering"], "csv", tmp_path / "f.csv")
    lines = csv_path.read_text().splitlines()
    (tmp_path / "cut.csv").write_text("\n".join(lines[:-3]) + "\n")
    with pytest.raises(FeatureFileError):
        read_features(tmp_path / "cut.csv")
    with pytest.raises(ValueError):
        export_features(results["scattering"], "xml", tmp_path / "f.xml")


def test_plot_data(tmp_path, results):
    table = feature_table(results["scattering"])
    p1 = export_plot_data(table, tmp_path / "p1.csv", 1)
    rows = p1.read_text().splitlines()
    n1 = sum(c.order == 1 for c in table.columns)
    assert rows[0] == "t,lambda_hz,value" and len(rows) == 1 + n1 * len(table.times)
    lam1 = table.columns[-1].lambda_hz[0]
    p2 = export_plot_data(table, tmp_path / "p2.csv", 2, lam1)
    assert len(p2.read_text().splitlines()) > 1
    with pytest.raises(ValueError):
        export_plot_data(table, tmp_path / "p2.csv", 2)
    with pytest.raises(ValueError):
        export_plot_data(feature_table(results["freq"]), tmp_path / "p.csv", 1)
