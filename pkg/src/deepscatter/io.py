"""WAV ingestion and feature export (CSV, JSONL, binary).

User-facing frequencies are in Hz (``omega / 2 pi``); everything internal is
rad/s.  Feature files carry one header describing the path table followed by
frame-major records.  Columns are listed in canonical order: time-scattering
order, then lexicographic frequency tuple, then quefrency (zero order first).
"""
from __future__ import annotations

import csv
import json
import math
import struct
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.io import wavfile

from .freqscatter import FIRST_ORDER, FreqScattering
from .normalization import NormalizedScattering
from .scattering import ScatteringTransform
from .signal import RealSignal

MAGIC = b"DSCF"
FORMAT_VERSION = 1
FORMATS = ("csv", "jsonl", "binary")
SUFFIX = {"csv": ".csv", "jsonl": ".jsonl", "binary": ".bin"}


class WavError(ValueError):
    pass


class FeatureFileError(ValueError):
    pass


def read_wav(path) -> RealSignal:
    """Mono samples in [-1, 1]; stereo channels are averaged."""
    try:
        with warnings.catch_warnings():
            # scipy warns and returns a partial buffer on a short data chunk
            warnings.simplefilter("error", wavfile.WavFileWarning)
            rate, data = wavfile.read(str(path))
    except FileNotFoundError:
        raise
    except (ValueError, wavfile.WavFileWarning, struct.error, EOFError) as e:
        raise WavError(f"{path}: cannot parse WAV ({e})") from None
    if data.dtype == np.int16:
        samples = data.astype(float) / 32768.0
    elif data.dtype == np.float32:
        samples = data.astype(float)
    else:
        raise WavError(f"{path}: unsupported encoding {data.dtype} (16-bit PCM or 32-bit float)")
    if samples.ndim == 2:
        if samples.shape[1] > 2:
            raise WavError(f"{path}: {samples.shape[1]} channels (mono or stereo only)")
        samples = samples.mean(axis=1)
    if samples.size == 0:
        raise WavError(f"{path}: no samples")
    return RealSignal(samples, float(rate))


def write_wav(signal: RealSignal, path, encoding: str = "float32") -> None:
    rate = int(round(signal.rate))
    if abs(rate - signal.rate) > 1e-9:
        raise ValueError("WAV needs an integer sample rate")
    if encoding == "float32":
        data = signal.samples.astype(np.float32)
    elif encoding == "pcm16":
        data = np.round(np.clip(signal.samples, -1.0, 32767 / 32768) * 32768).astype(np.int16)
    else:
        raise ValueError("encoding must be 'float32' or 'pcm16'")
    wavfile.write(str(path), rate, data)


@dataclass(frozen=True)
class FeatureColumn:
    order: int                    # time-scattering order
    lambda_hz: tuple              # (lambda_1, ..., lambda_m) in Hz
    quefrency: float | None = None    # cycles/octave; 0.0 is the gamma low-pass

    def key(self):
        return (self.order, self.lambda_hz, -1.0 if self.quefrency is None else self.quefrency)

    def describe(self) -> dict:
        d = {"order": self.order, "lambda_hz": list(self.lambda_hz)}
        if self.quefrency is not None:
            d["quefrency"] = self.quefrency
        return d


@dataclass
class FeatureTable:
    kind: str
    times: np.ndarray             # (frames,) seconds
    columns: list                 # FeatureColumn, canonical order
    values: np.ndarray            # (frames, columns)

    def header(self) -> dict:
        return {"format": "deepscatter-features", "version": FORMAT_VERSION, "kind": self.kind,
                "frames": len(self.times), "paths": [c.describe() for c in self.columns]}

    def column(self, order, lambda_hz, quefrency=None) -> np.ndarray:
        target = FeatureColumn(order, tuple(lambda_hz), quefrency)
        for i, c in enumerate(self.columns):
            if c == target:
                return self.values[:, i]
        raise KeyError(target)


def _sorted_table(kind, times, columns, cols):
    order = sorted(range(len(columns)), key=lambda i: columns[i].key())
    values = np.column_stack([cols[i] for i in order]) if cols else np.zeros((len(times), 0))
    return FeatureTable(kind, np.asarray(times, float), [columns[i] for i in order], values)


def feature_table(features) -> FeatureTable:
    """Flatten a scattering, normalized or frequency-scattered result."""
    if isinstance(features, ScatteringTransform):
        cols = [FeatureColumn(p.order, p.hz) for p in features.paths]
        return _sorted_table("scattering", features.times, cols, list(features.values))
    if isinstance(features, NormalizedScattering):
        kind = "log-normalized" if features.is_log else "normalized"
        cols = [FeatureColumn(p.order, p.hz) for p in features.paths]
        return _sorted_table(kind, features.times, cols, list(features.values))
    if isinstance(features, FreqScattering):
        q = [float(v) for v in features.quefrencies()]
        cols, data = [], []
        for key, slot in features.slots.items():
            tail = () if key == FIRST_ORDER else (key / (2 * math.pi),)
            order = 1 + len(tail)
            for g, lam in enumerate(slot.gamma_hz):
                lam_hz = (float(lam),) + tail
                cols.append(FeatureColumn(order, lam_hz, 0.0))
                data.append(slot.zero[:, g])
                for j, qj in enumerate(q):
                    cols.append(FeatureColumn(order, lam_hz, qj))
                    data.append(slot.first[:, j, g])
        return _sorted_table(f"freq-{features.mode}", features.times, cols, data)
    raise TypeError(f"cannot export {type(features).__name__}")


def _fmt(v: float) -> str:
    return repr(float(v))


def export_features(features, fmt: str, path) -> Path:
    """Write ``features`` (any result type or a FeatureTable) to ``path``."""
    if fmt not in FORMATS:
        raise ValueError(f"format must be one of {FORMATS}")
    table = features if isinstance(features, FeatureTable) else feature_table(features)
    path = Path(path)
    header = table.header()
    if fmt == "binary":
        head = json.dumps(header, sort_keys=True).encode("utf-8")
        rows = np.column_stack([table.times, table.values]).astype("<f8")
        with open(path, "wb") as f:
            f.write(MAGIC + struct.pack("<II", FORMAT_VERSION, len(head)))
            f.write(head)
            f.write(struct.pack("<QQ", len(table.times), len(table.columns)))
            f.write(rows.tobytes(order="C"))
        return path
    with open(path, "w", newline="", encoding="utf-8") as f:
        if fmt == "jsonl":
            f.write(json.dumps(header, sort_keys=True) + "\n")
            for k, t in enumerate(table.times):
                for i, c in enumerate(table.columns):
                    rec = {"t": float(t), "path": i, **c.describe(), "value": float(table.values[k, i])}
                    f.write(json.dumps(rec, sort_keys=True) + "\n")
        else:
            f.write("# " + json.dumps(header, sort_keys=True) + "\n")
            w = csv.writer(f, lineterminator="\n")
            w.writerow(["t", "path", "order", "lambda_hz", "quefrency", "value"])
            for k, t in enumerate(table.times):
                for i, c in enumerate(table.columns):
                    w.writerow([_fmt(t), i, c.order, ";".join(_fmt(v) for v in c.lambda_hz),
                                "" if c.quefrency is None else _fmt(c.quefrency),
                                _fmt(table.values[k, i])])
    return path


def _columns(header):
    return [FeatureColumn(d["order"], tuple(d["lambda_hz"]), d.get("quefrency")) for d in header["paths"]]


def read_features(path) -> FeatureTable:
    """Load a file written by ``export_features`` (format from its content)."""
    path = Path(path)
    with open(path, "rb") as f:
        lead = f.read(4)
    if lead == MAGIC:
        raw = path.read_bytes()
        version, hlen = struct.unpack_from("<II", raw, 4)
        if version != FORMAT_VERSION:
            raise FeatureFileError(f"unsupported feature file version {version}")
        header = json.loads(raw[12:12 + hlen].decode("utf-8"))
        n_frames, n_cols = struct.unpack_from("<QQ", raw, 12 + hlen)
        body = raw[12 + hlen + 16:]
        if len(body) != 8 * n_frames * (n_cols + 1):
            raise FeatureFileError("truncated feature file")
        rows = np.frombuffer(body, "<f8").reshape(n_frames, n_cols + 1)
        return FeatureTable(header["kind"], rows[:, 0].copy(), _columns(header), rows[:, 1:].copy())
    with open(path, encoding="utf-8") as f:
        first = f.readline()
        if first.startswith("# "):
            header = json.loads(first[2:])
            reader = csv.DictReader(f)
            recs = [(float(r["t"]), int(r["path"]), float(r["value"])) for r in reader]
        else:
            header = json.loads(first)
            recs = []
            for line in f:
                r = json.loads(line)
                recs.append((r["t"], r["path"], r["value"]))
    cols = _columns(header)
    n_frames = header["frames"]
    if len(recs) != n_frames * len(cols):
        raise FeatureFileError("record count does not match the header")
    values = np.array([r[2] for r in recs], float).reshape(n_frames, len(cols))
    times = np.array([r[0] for r in recs[::max(1, len(cols))]], float)
    return FeatureTable(header["kind"], times, cols, values)


def export_plot_data(table: FeatureTable, path, order: int = 1, lambda1_hz: float | None = None) -> Path:
    """``t, lambda_hz, value`` triplets for image rendering.

    Order 1 gives a scalogram-like image over ``lambda_1``; order 2 needs
    ``lambda1_hz`` and gives the image over ``lambda_2`` under the nearest
    first-order path.  Frequency-scattered tables are not supported.
    """
    if any(c.quefrency is not None for c in table.columns):
        raise ValueError("plot data is defined for time-scattering tables")
    idx = [i for i, c in enumerate(table.columns) if c.order == order]
    if not idx:
        raise ValueError(f"no order-{order} paths")
    if order >= 2:
        if lambda1_hz is None:
            raise ValueError("order >= 2 needs lambda1_hz")
        firsts = sorted({table.columns[i].lambda_hz[0] for i in idx})
        lam1 = min(firsts, key=lambda v: abs(v - lambda1_hz))
        idx = [i for i in idx if table.columns[i].lambda_hz[0] == lam1]
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["t", "lambda_hz", "value"])
        for k, t in enumerate(table.times):
            for i in idx:
                w.writerow([_fmt(t), _fmt(table.columns[i].lambda_hz[-1]), _fmt(table.values[k, i])])
    return path
