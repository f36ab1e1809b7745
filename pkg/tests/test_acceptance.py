"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line."""
import json
import math

import numpy as np
import pytest

from deepscatter.cli import main as cli_main
from deepscatter.filterbank import build_morlet_bank, littlewood_paley
from deepscatter.freqscatter import freq_scatter
from deepscatter.inversion import inverse_scattering, scalogram_error
from deepscatter.normalization import log_scattering, normalize
from deepscatter.scattering import (ScatteringConfig, default_banks, energy_decomposition, fourier_modulus_distance,
                                    scatter, scattering, warp_stability_probe)
from deepscatter.signal import RealSignal, next_power_of_two
from deepscatter.synth import (SourceFilterModel, am_error_bound, chi_ratio, gen_arpeggio, gen_source_filter,
                               gen_two_tone, harmonic_clip, modulated_noise_bound_probe, predict_first_order,
                               predict_interference, predict_second_order_am, rayleigh_fluctuation, rayleigh_ratio,
                               resonance, speech_like, tremolo, wavelet_l1_norm)

RATE = 22050.0


def _interior(v):
    return v[..., 2:-2]


def test_criterion_01_frame_condition(verdict, tmp_path):
    checks, alphas = {}, []
    for Q, T in [(8, 0.19), (1, 0.032), (2, 0.74)]:
        size = next_power_of_two(int(T * RATE) + 1)
        bank = build_morlet_bank(Q, T, RATE, size)
        _, A, alpha = littlewood_paley(bank)
        checks[f"A<=1 Q={Q}"] = A.max() <= 1 + 1e-6
        checks[f"alpha<1 Q={Q}"] = alpha < 1
        # alpha as recorded in the bank manifest
        assert cli_main(["bank", "--Q", str(Q), "--T", str(T * 1000), "--size", str(size),
                         "--out", f"bank{Q}.json", "--output-dir", str(tmp_path)]) == 0
        recorded = json.loads((tmp_path / f"bank{Q}.json").read_text())["alpha"]
        checks[f"manifest alpha Q={Q}"] = recorded == pytest.approx(alpha)
        alphas.append(f"Q={Q},T={T * 1000:.0f}ms: alpha={alpha:.3f} maxA-1={A.max() - 1:.1e}")
    verdict(1, checks, "; ".join(alphas))


def test_criterion_02_contractivity(verdict):
    n = 2 ** 14
    banks = default_banks(ScatteringConfig(0.19, (8, 1), 2, RATE), n, extra_order=False)
    rng = np.random.default_rng(2)
    worst, ok = 0.0, True
    for _ in range(50):
        x = rng.standard_normal(n) * rng.uniform(0.1, 2)
        y = x + rng.standard_normal(n) * rng.uniform(0.01, 2) if rng.uniform() < 0.5 else rng.standard_normal(n)
        sx, sy = scatter(RealSignal(x, RATE), banks, 2), scatter(RealSignal(y, RATE), banks, 2)
        d_s = math.sqrt(np.sum((sx.values - sy.values) ** 2) * sx.hop)
        d_x = math.sqrt(np.sum((x - y) ** 2) / RATE)
        ok &= d_s <= d_x + 1e-9
        worst = max(worst, d_s / d_x)
    verdict(2, {"50 pairs": ok}, f"max ||Sx-Sy||/||x-y|| = {worst:.3f}")


def _corpus():
    speech = [speech_like(1.0, RATE, seed=s) for s in range(10)]
    harmonic = [harmonic_clip(110 * (1 + s / 7), 1.0, RATE, rolloff=0.5 + 0.1 * s) for s in range(10)]
    return speech + harmonic


def test_criterion_03_energy_cascade(verdict):
    corpus = _corpus()
    checks = {"layer bounds": True, "residual decreasing": True}
    residuals = []
    for x in corpus[:5] + corpus[10:15]:
        cfg = ScatteringConfig(0.19, (8, 1, 1), 3, RATE)
        banks = default_banks(cfg, len(x), extra_order=True)
        res = []
        for M in (1, 2, 3):
            st = scatter(x, banks, M, track_energy=True)
            for layer in st.layers:
                lower = (1 - layer.alpha) * layer.U
                checks["layer bounds"] &= lower <= layer.S + layer.children <= layer.U * (1 + 1e-9)
            res.append(energy_decomposition(st)["residual"])
        checks["residual decreasing"] &= res[0] > res[1] > res[2]
        residuals.append(res)
    share = {}
    for T in (0.023, 0.37):
        d = [energy_decomposition(scattering(x, T, (8, 1, 1), 2, track_energy=True))["orders"] for x in corpus]
        share[T] = (np.mean([e[1] for e in d]), np.mean([e[2] for e in d]))
    checks["m=1 share falls with T"] = share[0.37][0] < share[0.023][0]
    checks["m=2 share rises with T"] = share[0.37][1] > share[0.023][1]
    r = np.mean(residuals, axis=0)
    verdict(3, checks, f"m=1 {share[0.023][0]:.3f}->{share[0.37][0]:.3f}, m=2 {share[0.023][1]:.3f}->"
                       f"{share[0.37][1]:.3f}; mean residual M=1,2,3: {r[0]:.4f}, {r[1]:.4f}, {r[2]:.4f}")


def test_criterion_04_warp_stability(verdict):
    eps = (0.005, 0.01, 0.02)
    bound = 3 * 8
    checks, parts = {}, []
    for pitch, rolloff in ((220, 1.0), (150, 0.5), (330, 0.0)):
        x = harmonic_clip(pitch, 1.0, RATE, rolloff=rolloff)
        banks = default_banks(ScatteringConfig(0.19, (8, 1), 2, RATE), len(x), extra_order=False)
        r = [warp_stability_probe(x, e, banks, 2) / e for e in eps]
        f = [fourier_modulus_distance(x, e) / e for e in eps]
        checks[f"{pitch}Hz flat"] = max(r) / min(r) <= 2
        checks[f"{pitch}Hz <= 3Q"] = max(r) <= bound
        checks[f"{pitch}Hz Fourier exceeds"] = max(f) > bound
        parts.append(f"{pitch}Hz: {min(r):.1f}-{max(r):.1f} (Fourier {max(f):.0f})")
    verdict(4, checks, "; ".join(parts) + f"; bound {bound}")


def _s2_profile(ns, lam1):
    paths = [p for p in ns.order_paths(2) if p.centers[0] == lam1]
    return np.array([p.centers[1] for p in paths]), np.array([_interior(ns[p]).mean() for p in paths])


def test_criterion_05_interference(verdict):
    T, D = 0.512, 4.0
    x = gen_two_tone(600, 675, 1, 1, D, RATE)
    banks = default_banks(ScatteringConfig(T, (8, 8), 2, RATE), len(x), extra_order=False)
    lam1 = banks[0].centers[np.argmin(np.abs(banks[0].centers - 2 * np.pi * 600))]
    centers, prof = _s2_profile(normalize(scatter(x, banks, 2), x), lam1)
    k = int(np.argmax(prof))
    w = banks[1].wavelets[list(banks[1].centers).index(centers[k])]
    pred = predict_interference(600, 675, 1, 1, banks[1], band=(banks[0], lam1))
    predicted = pred[list(banks[1].centers).index(centers[k])]
    y = gen_arpeggio(600, 675, 1, 1, D, RATE)
    _, arp = _s2_profile(normalize(scatter(y, banks, 2), y), lam1)
    checks = {"peak near 75 Hz": abs(w.center - 2 * np.pi * 75) <= w.bandwidth,
              "peak vs prediction": abs(prof[k] / predicted - 1) <= 0.2,
              "arpeggio reduced 5x": prof[k] >= 5 * arp[k]}
    verdict(5, checks, f"peak {centers[k] / 2 / np.pi:.1f} Hz, measured {prof[k]:.4f} vs predicted {predicted:.4f}, "
                       f"arpeggio {arp[k]:.4f} ({prof[k] / arp[k]:.1f}x)")


def test_criterion_06_am_spectrum(verdict):
    T, D, pitch = 0.512, 4.0, 600.0
    h = resonance(2400, 2000, RATE, decay=4)
    env = tremolo(0.5, 4.0)
    cfg = ScatteringConfig(T, (8, 1), 2, RATE)
    voiced = SourceFilterModel("pulse", h, env, pitch=pitch)
    xv = gen_source_filter(voiced, D, RATE)
    banks = default_banks(cfg, len(xv), extra_order=False)
    lam1 = banks[0].centers[np.argmin(np.abs(banks[0].centers - 2 * np.pi * 4 * pitch))]
    centers, pv = _s2_profile(normalize(scatter(xv, banks, 2), xv), lam1)
    k = int(np.argmax(pv))
    w = banks[1].wavelets[list(banks[1].centers).index(centers[k])]
    # compare where the approximation error bound is at most half the peak value
    keep = np.array([am_error_bound(lam1, c, 8, 1) <= 0.5 * pv[k] for c in centers])
    cos_in, cos_all, s1_err = [], [], []
    for seed in range(10):
        model = SourceFilterModel("noise", h, env, seed=seed)
        xu = gen_source_filter(model, D, RATE)
        ns = normalize(scatter(xu, banks, 2), xu)
        _, pu = _s2_profile(ns, lam1)
        cos_in.append(pu[keep] @ pv[keep] / np.linalg.norm(pu[keep]) / np.linalg.norm(pv[keep]))
        cos_all.append(pu @ pv / np.linalg.norm(pu) / np.linalg.norm(pv))
        pred = predict_first_order(model, lam1, banks[0])
        s1_err.append(abs(_interior(ns[(lam1,)]).mean() / pred - 1))
    checks = {"peak at 4 Hz": abs(w.center - 2 * np.pi * 4) <= w.bandwidth,
              "voiced/unvoiced cosine": min(cos_in) >= 0.9,
              "unvoiced S1 within 25%": max(s1_err) <= 0.25}
    verdict(6, checks, f"peak {centers[k] / 2 / np.pi:.1f} Hz; cosine min {min(cos_in):.3f} over "
                       f"{int(keep.sum())} lambda2 (all {len(keep)}: {min(cos_all):.3f}); "
                       f"S1 error max {max(s1_err):.3f}")


def test_criterion_07_noise_moment_identities(verdict):
    bank = build_morlet_bank(8, 0.19, RATE, 2 ** 13)
    z = {}
    for lam in (bank.centers[-1], bank.centers[40], bank.centers[10]):
        r = rayleigh_ratio(bank, lam, 100, 0)
        z[f"rayleigh {lam / 2 / np.pi:.0f}Hz"] = (r.mean - math.pi / 4) / r.stderr
    for name, h in (("resonance", resonance(1000, 300, RATE)), ("delta", np.array([1.0])),
                    ("exp", np.exp(-np.arange(50) / 10))):
        c = chi_ratio(h, 4096, 100, 0)
        z[f"chi {name}"] = (c.mean - 2 / math.pi) / c.stderr
    n = bank.size
    phi = np.fft.ifft(bank.phi_hat()).real
    white = lambda rng, m: rng.standard_normal(m)
    a = 1 + 0.5 * np.cos(2 * np.pi * 80 * np.arange(n) / RATE)
    lam = bank.centers[50]
    C = wavelet_l1_norm(bank, lam) ** 2
    excess = {"bound white": modulated_noise_bound_probe(white, np.ones(n), phi, 100, 1.0, 0).worst_excess(),
              "bound white AM": modulated_noise_bound_probe(white, a, phi, 100, 1.0, 1).worst_excess(),
              "bound fluctuation": modulated_noise_bound_probe(rayleigh_fluctuation(bank, lam), a, phi, 100,
                                                     C * (1 - math.pi / 4), 2).worst_excess()}
    checks = {k: abs(v) <= 3 for k, v in z.items()}
    checks.update({k: v <= 3 for k, v in excess.items()})
    verdict(7, checks, "; ".join(f"{k} {v:+.2f}sd" for k, v in {**z, **excess}.items()) + f"; C={C:.3f}")


def test_criterion_08_inversion(verdict):
    x = speech_like(1.5, RATE, seed=1)
    banks = default_banks(ScatteringConfig(0.19, (8, 1), 2, RATE), len(x), extra_order=False)
    st = scatter(x, banks, 2)
    err, pos, gl = {}, True, True
    for M in (1, 2):
        report = {}
        xr = inverse_scattering(st, banks, M, length=len(x), report=report)
        err[M] = scalogram_error(xr, x, banks[0])
        pos &= all(min(r.min_history) >= 0 for r in report["rl"])
        gl &= all(g.modulus_error <= g.initial_error for g in report["gl"])
    checks = {"M=2 better than M=1": err[2] < err[1], "RL positivity": pos, "GL final <= initial": gl}
    verdict(8, checks, f"scalogram error M=1 {err[1]:.4f}, M=2 {err[2]:.4f}")


def test_criterion_09_transposition(verdict):
    T, D = 0.19, 1.0
    t = np.arange(int(D * RATE)) / RATE
    banks = default_banks(ScatteringConfig(T, (8, 1), 2, RATE), t.size, extra_order=False)

    def harm(f0):
        x, k = np.zeros_like(t), 1
        while k * f0 < 0.9 * RATE / 2:
            x += np.cos(2 * np.pi * k * f0 * t) / k
            k += 1
        return RealSignal(x * np.minimum(1, np.minimum(t, D - t) / 0.05), RATE)

    def rep(x):
        lg = log_scattering(normalize(scatter(x, banks, 2), x))
        return lg, freq_scatter(lg, "S", 2.0)
    ratios = []
    for f0 in (150.0, 220.0):
        a, fa = rep(harm(f0))
        b, fb = rep(harm(f0 * 2 ** 0.25))
        d_plain = np.linalg.norm(a.values[:, 2:-2] - b.values[:, 2:-2])
        d_freq = np.linalg.norm(fa.flatten()[2:-2] - fb.flatten()[2:-2])
        ratios.append(d_freq / d_plain)
    verdict(9, {f"{f}Hz": r <= 0.25 for f, r in zip((150, 220), ratios)},
            "distance ratio " + ", ".join(f"{r:.3f}" for r in ratios) + " (bound 0.25)")


def test_criterion_10_complexity(verdict, scaling_report):
    log_n = math.log2(0.19 * RATE)
    c = scaling_report.counts
    r1, r2 = c[1] / (8 * log_n), c[2] / (8 * log_n ** 2 / 2)
    checks = {"first-order count": 0.5 <= r1 <= 2, "second-order count": 0.5 <= r2 <= 2,
              "N log N fit": 0.9 <= scaling_report.exponent <= 1.3}
    verdict(10, checks, f"counts {c[1]}/{c[2]} (ratios {r1:.2f}, {r2:.2f}); exponent "
                        f"{scaling_report.exponent:.3f} over N={scaling_report.lengths}")
