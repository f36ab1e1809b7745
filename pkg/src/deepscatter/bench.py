"""Timing and coefficient-volume harness for the subsampled cascade.

``run_scaling`` times the transform over several input lengths (one warm-up
discarded, median of ``repeats``; bank construction is timed once), fits ``time / log2 N`` against ``N`` on
log-log axes and reports per-order coefficient counts and wavelet-coefficient
volumes.  numpy's FFT runs on one thread, so the fit reflects a single core.
"""
from __future__ import annotations

import argparse
import csv
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .scattering import ScatteringConfig, default_banks, scatter
from .signal import RealSignal

SPREAD_LIMIT = 0.5     # (max - min) / median of the repeats


@dataclass
class StageTimes:
    length: int
    banks: float
    scatter: float
    spread: float


@dataclass
class BenchReport:
    config: ScatteringConfig
    lengths: list
    stages: list                      # StageTimes per length
    counts: dict                      # order -> paths
    volume: dict                      # order -> wavelet samples per window of T, in units of T*rate
    exponent: float                   # slope of log(time / log2 N) vs log N
    fit_residual: float               # RMS of the log-log fit residuals
    advice: list = field(default_factory=list)

    def rows(self):
        for s in self.stages:
            yield {"N": s.length, "banks_s": s.banks, "scatter_s": s.scatter, "spread": s.spread,
                   **{f"paths_{m}": c for m, c in sorted(self.counts.items())}}

    def write_csv(self, path) -> Path:
        path = Path(path)
        rows = list(self.rows())
        with open(path, "w", newline="") as f:
            w = csv.DictWriter(f, fieldnames=list(rows[0]), lineterminator="\n")
            w.writeheader()
            w.writerows(rows)
            f.write(f"# exponent={self.exponent!r} fit_residual={self.fit_residual!r}\n")
            for m, v in sorted(self.volume.items()):
                f.write(f"# volume_order{m}={v!r}\n")
        return path


def wavelet_volume(st, rate: float) -> dict:
    """Envelope samples per window of duration ``T`` divided by ``N = T*rate``.

    Needs a transform computed with ``keep_envelopes``.
    """
    if st.envelopes is None:
        raise ValueError("transform was computed without keep_envelopes")
    out = {}
    for p, u in st.envelopes.items():
        out[p.order] = out.get(p.order, 0.0) + u.rate
    # (samples per second) * T / (T * rate)
    return {m: v / rate for m, v in sorted(out.items())}


def fit_exponent(lengths, times) -> tuple[float, float]:
    """Slope and RMS residual of ``log(t / log2 N)`` against ``log N``."""
    n = np.asarray(lengths, float)
    y = np.log(np.asarray(times, float) / np.log2(n))
    A = np.vstack([np.log(n), np.ones_like(n)]).T
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    return float(coef[0]), float(np.sqrt(np.mean(resid ** 2)))


def _timed(fn, repeats):
    fn()    # warm-up, discarded
    ts = []
    out = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn()
        ts.append(time.perf_counter() - t0)
    med = float(np.median(ts))
    return med, (max(ts) - min(ts)) / med if med > 0 else 0.0, out


def run_scaling(config: ScatteringConfig, lengths, repeats: int = 5, seed: int = 0) -> BenchReport:
    lengths = sorted(int(n) for n in lengths)
    if len(lengths) < 3 or lengths[-1] < 8 * lengths[0]:
        raise ValueError("need at least 3 lengths spanning 8x")
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    rng = np.random.default_rng(seed)
    stages, counts, volume = [], None, None
    for n in lengths:
        x = RealSignal(rng.standard_normal(n), config.rate)
        t0 = time.perf_counter()
        banks = default_banks(config, n, extra_order=False)
        tb = time.perf_counter() - t0
        ts, spread, st = _timed(lambda: scatter(x, banks, config.max_order), repeats)
        stages.append(StageTimes(n, tb, ts, spread))
        c = st.path_counts()
        if counts is None:
            counts = c
            full = scatter(x, banks, config.max_order, keep_envelopes=True)
            volume = wavelet_volume(full, config.rate)
    exponent, resid = fit_exponent(lengths, [s.scatter for s in stages])
    advice = [f"N={s.length}: repeat spread {s.spread:.2f} exceeds {SPREAD_LIMIT}; rerun on an idle machine"
              for s in stages if s.spread > SPREAD_LIMIT]
    return BenchReport(config, lengths, stages, counts, volume, exponent, resid, advice)


def main(argv=None) -> int:
    p = argparse.ArgumentParser(prog="deepscatter-bench", description="Scaling benchmark of the scattering cascade.")
    p.add_argument("--T", type=float, default=190.0, help="ms")
    p.add_argument("--Q", type=float, nargs="+", default=[8, 1])
    p.add_argument("--max-order", type=int, default=2)
    p.add_argument("--rate", type=float, default=22050.0)
    p.add_argument("--lengths", type=int, nargs="+", default=[2 ** 14, 2 ** 16, 2 ** 18])
    p.add_argument("--repeats", type=int, default=5)
    p.add_argument("--out", default="bench.csv")
    args = p.parse_args(argv)
    cfg = ScatteringConfig(args.T / 1000, tuple(args.Q), args.max_order, args.rate)
    report = run_scaling(cfg, args.lengths, args.repeats)
    report.write_csv(args.out)
    print(f"exponent {report.exponent:.3f} (fit residual {report.fit_residual:.3f})")
    for line in report.advice:
        print(line, file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
