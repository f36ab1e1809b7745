"""Command-line front end.

Subcommands: ``scatter`` (features, manifest, optional inversion), ``invert``
(reconstruction round trip), ``synth`` (test signals and oracle comparisons)
and ``bank`` (filter bank descriptor and frame report).  Times on the command
line are in milliseconds, frequencies in Hz.  ``DEEPSCATTER_OUTPUT_DIR``
overrides the default output directory; ``--output-dir`` overrides both.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import platform
import sys
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .filterbank import build_morlet_bank, littlewood_paley
from .freqscatter import freq_scatter
from .inversion import inverse_scattering, scalogram_error
from .io import FORMATS, SUFFIX, export_features, export_plot_data, feature_table, read_wav, write_wav
from .normalization import log_scattering, normalize
from .scattering import ScatteringConfig, default_banks, energy_decomposition, scatter
from .signal import RealSignal, next_power_of_two
from . import synth

OUTPUT_ENV = "DEEPSCATTER_OUTPUT_DIR"
TWO_PI = 2 * math.pi


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    input: str
    T: float = 190.0                 # ms
    max_order: int = 2
    Q: tuple = (8, 1, 1)
    normalize: bool = False
    log: bool = False
    freq_scatter: str = "off"        # off | U | S
    norm_window: float | None = None   # ms, defaults to T
    epsilon: str = "auto"            # "auto" or a float in amplitude units
    format: str = "csv"
    seed: int = 0
    output_dir: str | None = None
    invert: bool = False
    plot_data: bool = False
    phi_fr_width: float = 2.0        # octaves
    features: bool = True

    def validate(self) -> None:
        if not self.T > 0:
            raise ConfigError("T must be positive")
        if self.max_order not in (0, 1, 2, 3):
            raise ConfigError("max_order must be in 0..3")
        if not self.Q or any(not q >= 1 for q in self.Q):
            raise ConfigError("Q must be >= 1 at every order")
        if self.freq_scatter not in ("off", "U", "S"):
            raise ConfigError("freq_scatter must be off, U or S")
        if self.format not in FORMATS:
            raise ConfigError(f"format must be one of {FORMATS}")
        if self.log and not self.normalize:
            raise ConfigError("log needs normalize")
        if self.freq_scatter != "off" and not self.log:
            raise ConfigError("freq_scatter needs log")
        if (self.normalize or self.freq_scatter != "off") and self.max_order < 1:
            raise ConfigError("normalization needs max_order >= 1")
        if self.norm_window is not None and not self.norm_window > 0:
            raise ConfigError("norm_window must be positive")
        if self.epsilon != "auto":
            try:
                eps = float(self.epsilon)
            except ValueError:
                raise ConfigError("epsilon must be 'auto' or a number") from None
            if eps < 0:
                raise ConfigError("epsilon must be nonnegative")
        if self.invert and self.max_order not in (1, 2):
            raise ConfigError("inversion needs max_order 1 or 2")
        if not self.phi_fr_width > 0:
            raise ConfigError("phi_fr_width must be positive")

    def out_dir(self) -> Path:
        return Path(self.output_dir or os.environ.get(OUTPUT_ENV) or ".")


def versions() -> dict:
    return {"deepscatter": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version()}


def count_predictions(Q, T: float, rate: float) -> dict:
    """Per-frame counts ``Q1 log2 N`` and ``Q1 Q2 (log2 N)^2 / 2`` with ``N = T*rate``."""
    log_n = math.log2(T * rate)
    q2 = Q[1] if len(Q) > 1 else 1
    return {"window_samples": T * rate, "first": Q[0] * log_n, "second": Q[0] * q2 * log_n ** 2 / 2}


def _bank_summary(bank) -> dict:
    _, A, _ = littlewood_paley(bank)
    return {"Q": bank.Q, "T": bank.T, "rate": bank.rate, "size": bank.size,
            "alpha": bank.alpha, "A_min": float(A.min()), "A_max": float(A.max()),
            "wavelets": len(bank),
            "centers_hz": [float(c) for c in bank.centers / TWO_PI]}


def run(config: RunConfig) -> tuple[int, dict]:
    """Ingest, scatter, post-process and export; returns (status, manifest)."""
    config.validate()
    out = config.out_dir()
    out.mkdir(parents=True, exist_ok=True)
    x = read_wav(config.input)
    T = config.T / 1000
    cfg = ScatteringConfig(T, tuple(config.Q), config.max_order, x.rate)
    banks = default_banks(cfg, len(x), extra_order=True)
    st = scatter(x, banks, config.max_order, track_energy=True)
    energy = energy_decomposition(st)
    stem = Path(config.input).stem
    outputs = {}

    features = st
    eps = None
    if config.normalize:
        eps = None if config.epsilon == "auto" else float(config.epsilon)
        window = None if config.norm_window is None else config.norm_window / 1000
        features = normalize(st, x, eps, window)
        eps = features.epsilon
        if config.log:
            features = log_scattering(features)
        if config.freq_scatter != "off":
            features = freq_scatter(features, config.freq_scatter, config.phi_fr_width)

    if config.features:
        path = out / f"{stem}.features{SUFFIX[config.format]}"
        export_features(features, config.format, path)
        outputs["features"] = path.name
    if config.plot_data:
        table = feature_table(st)
        p1 = export_plot_data(table, out / f"{stem}.plot-order1.csv", 1)
        outputs["plot_order1"] = p1.name
        if config.max_order >= 2:
            firsts = st.order_paths(1)
            strongest = max(firsts, key=lambda p: float(np.sum(st[p] ** 2)))
            p2 = export_plot_data(table, out / f"{stem}.plot-order2.csv", 2, strongest.hz[0])
            outputs["plot_order2"] = p2.name
            outputs["plot_order2_lambda1_hz"] = strongest.hz[0]

    if config.invert:
        report = {}
        xr = inverse_scattering(st, banks, config.max_order, seed=config.seed,
                                length=len(x), report=report)
        wav = out / f"{stem}.reconstruction.wav"
        peak = float(np.max(np.abs(xr.samples))) if len(xr) else 0.0
        write_wav(xr, wav)
        rl_min = min((min(r.min_history) for r in report["rl"]), default=0.0)
        inv = {"max_order": config.max_order, "scalogram_error": scalogram_error(xr, x, banks[0]),
               "rl_min_iterate": rl_min,
               "gl_final_modulus_error": report["gl"][-1].modulus_error,
               "gl_initial_modulus_error": report["gl"][-1].initial_error,
               "reconstruction_peak": peak, "wav": wav.name}
        rep = out / f"{stem}.inversion.json"
        rep.write_text(json.dumps(inv, indent=2, sort_keys=True) + "\n")
        outputs["inversion_report"] = rep.name
        outputs["reconstruction"] = wav.name

    counts = st.path_counts()
    manifest = {
        "config": {**asdict(config), "Q": list(config.Q), "output_dir": str(out)},
        "input": {"path": str(config.input), "rate": x.rate, "samples": len(x)},
        "frames": len(st.times),
        "hop_s": st.hop,
        "banks": [_bank_summary(b) for b in banks],
        "path_counts": {str(m): counts.get(m, 0) for m in range(config.max_order + 1)},
        "count_predictions": count_predictions(cfg.Q, T, x.rate),
        "energy": {"orders": {str(m): v for m, v in energy["orders"].items()},
                   "residual": energy["residual"], "pruned": energy["pruned"],
                   "total": energy["total"]},
        "epsilon": eps,
        "outputs": outputs,
        "versions": versions(),
    }
    mpath = out / f"{stem}.manifest.json"
    mpath.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return 0, manifest


# --- synth ---------------------------------------------------------------

def _interior_mean(v):
    return float(np.mean(v[2:-2] if len(v) > 4 else v))


def _nearest(bank, hz):
    return float(bank.centers[np.argmin(np.abs(bank.centers - TWO_PI * hz))])


def compare_interference(x: RealSignal, f1, f2, a1, a2, T) -> dict:
    """Measured normalized second-order profile under the path nearest ``f1``
    against the closed-form beat prediction."""
    banks = default_banks(ScatteringConfig(T, (8, 8), 2, x.rate), len(x), False)
    ns = normalize(scatter(x, banks, 2), x)
    lam1 = _nearest(banks[0], f1)
    paths = [p for p in ns.order_paths(2) if p.centers[0] == lam1]
    pred = synth.predict_interference(f1, f2, a1, a2, banks[1], band=(banks[0], lam1))
    centers = list(banks[1].centers)
    rows = [{"lambda2_hz": p.hz[1], "measured": _interior_mean(ns[p]),
             "predicted": float(pred[centers.index(p.centers[1])])} for p in paths]
    peak = max(rows, key=lambda r: r["measured"]) if rows else None
    return {"lambda1_hz": lam1 / TWO_PI, "profile": rows, "peak": peak}


def compare_tremolo(model: synth.SourceFilterModel, x: RealSignal, formant_hz, T) -> dict:
    banks = default_banks(ScatteringConfig(T, (8, 1), 2, x.rate), len(x), False)
    ns = normalize(scatter(x, banks, 2), x)
    lam1 = _nearest(banks[0], formant_hz)
    a = RealSignal(model.envelope_samples(np.arange(len(x)) / x.rate), x.rate)
    centers, am = synth.predict_second_order_am(a, banks[1])
    centers = list(centers)
    rows = [{"lambda2_hz": p.hz[1], "measured": _interior_mean(ns[p]),
             "predicted": _interior_mean(am[centers.index(p.centers[1])])}
            for p in ns.order_paths(2) if p.centers[0] == lam1]
    return {"lambda1_hz": lam1 / TWO_PI,
            "first_order": {"measured": _interior_mean(ns[(lam1,)]),
                            "predicted": synth.predict_first_order(model, lam1, banks[0])},
            "profile": rows}


def synth_main(args) -> int:
    rate, dur = args.rate, args.duration
    report = None
    if args.kind in ("two-tone", "arpeggio"):
        gen = synth.gen_two_tone if args.kind == "two-tone" else synth.gen_arpeggio
        x = gen(args.f1, args.f2, args.a1, args.a2, dur, rate)
        if args.compare:
            report = compare_interference(x, args.f1, args.f2, args.a1, args.a2, args.T / 1000)
    elif args.kind == "tremolo":
        h = synth.resonance(args.formant, args.formant_bw, rate, decay=4)
        model = synth.SourceFilterModel(args.excitation, h, synth.tremolo(args.depth, args.eta),
                                        pitch=args.pitch, seed=args.seed)
        x = synth.gen_source_filter(model, dur, rate)
        if args.compare:
            report = compare_tremolo(model, x, args.formant, args.T / 1000)
    elif args.kind == "harmonic":
        x = synth.harmonic_clip(args.pitch, dur, rate)
    else:
        x = synth.speech_like(dur, rate, seed=args.seed)
    if args.compare and report is None:
        raise ConfigError(f"no oracle comparison for {args.kind}")
    out = Path(args.output_dir or os.environ.get(OUTPUT_ENV) or ".")
    out.mkdir(parents=True, exist_ok=True)
    peak = float(np.max(np.abs(x.samples)))
    scaled = RealSignal(x.samples / peak * 0.9, rate) if peak > 1 else x
    wav = out / (args.out or f"{args.kind}.wav")
    write_wav(scaled, wav)
    if report is not None:
        rpath = wav.with_suffix(".compare.json")
        rpath.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
        print(json.dumps(report["peak"] if "peak" in report else report["first_order"], sort_keys=True))
    print(wav)
    return 0


def bank_main(args) -> int:
    if args.size:
        size = args.size
    else:
        size = next_power_of_two(int(round(args.duration * args.rate)) + int(math.ceil(args.T / 1000 * args.rate)))
    bank = build_morlet_bank(args.Q, args.T / 1000, args.rate, size)
    summary = _bank_summary(bank)
    summary["frame_condition"] = bool(summary["A_max"] <= 1 + 1e-6 and bank.alpha < 1)
    text = json.dumps(summary, indent=2, sort_keys=True)
    if args.out:
        out = Path(args.output_dir or os.environ.get(OUTPUT_ENV) or ".")
        out.mkdir(parents=True, exist_ok=True)
        (out / args.out).write_text(text + "\n")
    print(text)
    return 0 if summary["frame_condition"] else 1


# --- argument parsing ----------------------------------------------------

def _run_flags(p):
    p.add_argument("input", help="WAV file (16-bit PCM or 32-bit float)")
    p.add_argument("--T", type=float, default=190.0, help="averaging scale, ms")
    p.add_argument("--max-order", type=int, default=2)
    p.add_argument("--Q", type=float, nargs="+", default=[8, 1, 1], help="wavelets per octave per order")
    p.add_argument("--normalize", action="store_true")
    p.add_argument("--log", action="store_true")
    p.add_argument("--freq-scatter", choices=["off", "U", "S"], default="off")
    p.add_argument("--norm-window", type=float, default=None, help="ms, defaults to T")
    p.add_argument("--epsilon", default="auto")
    p.add_argument("--format", choices=list(FORMATS), default="csv")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output-dir", default=None)
    p.add_argument("--plot-data", action="store_true")
    p.add_argument("--phi-fr-width", type=float, default=2.0, help="octaves")


def _config(args, **over) -> RunConfig:
    cfg = RunConfig(input=args.input, T=args.T, max_order=args.max_order, Q=tuple(args.Q),
                    normalize=args.normalize, log=args.log, freq_scatter=args.freq_scatter,
                    norm_window=args.norm_window, epsilon=args.epsilon, format=args.format,
                    seed=args.seed, output_dir=args.output_dir, plot_data=args.plot_data,
                    phi_fr_width=args.phi_fr_width)
    for k, v in over.items():
        setattr(cfg, k, v)
    return cfg


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="deepscatter", description="Deep scattering features for audio.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("scatter", help="compute and export scattering features")
    _run_flags(p)
    p.add_argument("--invert", action="store_true", help="also write a reconstruction")

    p = sub.add_parser("invert", help="reconstruct audio from its scattering coefficients")
    _run_flags(p)

    p = sub.add_parser("synth", help="synthetic test signals and oracle comparisons")
    p.add_argument("kind", choices=["two-tone", "arpeggio", "tremolo", "harmonic", "speech"])
    p.add_argument("--duration", type=float, default=4.0, help="s")
    p.add_argument("--rate", type=float, default=22050.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--f1", type=float, default=600.0)
    p.add_argument("--f2", type=float, default=675.0)
    p.add_argument("--a1", type=float, default=1.0)
    p.add_argument("--a2", type=float, default=1.0)
    p.add_argument("--pitch", type=float, default=600.0, help="Hz")
    p.add_argument("--excitation", choices=["pulse", "noise"], default="pulse")
    p.add_argument("--depth", type=float, default=0.5)
    p.add_argument("--eta", type=float, default=4.0, help="tremolo rate, Hz")
    p.add_argument("--formant", type=float, default=2400.0, help="Hz")
    p.add_argument("--formant-bw", type=float, default=2000.0, help="Hz")
    p.add_argument("--T", type=float, default=512.0, help="ms, for --compare")
    p.add_argument("--compare", action="store_true", help="run the oracle comparison")
    p.add_argument("--out", default=None, help="WAV file name")
    p.add_argument("--output-dir", default=None)

    p = sub.add_parser("bank", help="build a Morlet bank and report its frame bounds")
    p.add_argument("--Q", type=float, default=8)
    p.add_argument("--T", type=float, default=190.0, help="ms")
    p.add_argument("--rate", type=float, default=22050.0)
    p.add_argument("--size", type=int, default=None, help="FFT grid size")
    p.add_argument("--duration", type=float, default=1.0, help="s, sizes the grid when --size is absent")
    p.add_argument("--out", default=None, help="JSON file name")
    p.add_argument("--output-dir", default=None)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "scatter":
            status, manifest = run(_config(args, invert=args.invert))
        elif args.command == "invert":
            status, manifest = run(_config(args, invert=True, features=False))
        elif args.command == "synth":
            return synth_main(args)
        else:
            return bank_main(args)
    except (ConfigError, ValueError, OSError) as e:
        print(f"deepscatter: error: {e}", file=sys.stderr)
        return 2
    print(json.dumps(manifest["outputs"], sort_keys=True))
    return status


if __name__ == "__main__":
    sys.exit(main())
