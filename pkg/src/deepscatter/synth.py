"""Synthetic test signals and closed-form / Monte Carlo oracles.

Frequencies in the generators are in Hz; oracle inputs that index filter
banks (``lam1``, ``lam2``) are in rad/s like the banks themselves.  A
filter ``h`` is a sequence of taps applied by discrete convolution, so its
transfer function is ``sum_n h[n] exp(-i w n / rate)`` and ``||h||_1`` is
``sum |h[n]|``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .filterbank import FilterBank
from .signal import RealSignal

TWO_PI = 2 * math.pi


def _time(duration, rate):
    n = int(round(duration * rate))
    if n < 1:
        raise ValueError("duration too short")
    return np.arange(n) / rate


def pulse_train(pitch: float, duration: float, rate: float, start: float = 0.0) -> np.ndarray:
    """Unit-area pulses every ``1/pitch`` s as the band-limited harmonic sum
    ``pitch * (1 + 2 sum_k cos(2 pi k pitch t))`` up to Nyquist."""
    t = start + _time(duration, rate)
    K = int(math.floor((rate / 2) / pitch - 1e-9))
    e = np.ones_like(t)
    for k in range(1, K + 1):
        e += 2 * np.cos(TWO_PI * k * pitch * t)
    return pitch * e


def resonance(center: float, bandwidth: float, rate: float, decay: float = 6.0) -> np.ndarray:
    """Damped cosine taps ``exp(-pi B t) cos(2 pi f t)`` truncated after
    ``decay`` time constants."""
    n = max(2, int(math.ceil(decay / (math.pi * bandwidth) * rate)))
    t = np.arange(n) / rate
    return np.exp(-math.pi * bandwidth * t) * np.cos(TWO_PI * center * t)


def transfer(h: np.ndarray, omega, rate: float):
    """``h_hat(omega)`` for taps ``h``."""
    n = np.arange(len(h))
    return np.exp(-1j * np.outer(np.atleast_1d(omega), n) / rate) @ np.asarray(h, complex)


def tremolo(depth: float, rate_hz: float, level: float = 1.0) -> Callable:
    return lambda t: level * (1 + depth * np.cos(TWO_PI * rate_hz * t))


def attack(duration: float, rise: float) -> Callable:
    """Raised-cosine onset of length ``rise`` then a linear decay to zero."""
    def a(t):
        up = np.clip(t / rise, 0, 1)
        onset = 0.5 - 0.5 * np.cos(np.pi * up)
        return onset * np.clip(1 - (t - rise) / max(duration - rise, 1e-9), 0, 1) ** 0.5
    return a


@dataclass
class SourceFilterModel:
    """``x(t) = a(t) * (e conv h)(t)`` with a pulse-train or noise excitation."""
    excitation: str                   # "pulse" or "noise"
    h: np.ndarray
    envelope: Callable | np.ndarray | None = None
    pitch: float | None = None        # Hz, pulse train only
    seed: int = 0

    def __post_init__(self):
        if self.excitation not in ("pulse", "noise"):
            raise ValueError("excitation must be 'pulse' or 'noise'")
        if self.excitation == "pulse" and not (self.pitch and self.pitch > 0):
            raise ValueError("a pulse excitation needs a positive pitch")
        self.h = np.asarray(self.h, float)
        if self.h.ndim != 1 or self.h.size == 0:
            raise ValueError("h must be a non-empty 1-D tap sequence")

    def envelope_samples(self, t):
        if self.envelope is None:
            return np.ones_like(t)
        if callable(self.envelope):
            return np.asarray(self.envelope(t), float)
        a = np.asarray(self.envelope, float)
        if a.shape != t.shape:
            raise ValueError("envelope length does not match the signal")
        return a


def gen_source_filter(model: SourceFilterModel, duration: float, rate: float,
                      probe: tuple | None = None) -> RealSignal:
    """Synthesize the model.  ``probe = (lam1, Q1)`` additionally enforces
    ``sup|a'| <= lam1 / (10 Q1)`` (relative to ``max a``)."""
    t = _time(duration, rate)
    a = model.envelope_samples(t)
    if np.any(a < 0):
        raise ValueError("envelope must be nonnegative")
    m = model.h.size - 1
    if model.excitation == "pulse":
        if m / rate >= 1 / model.pitch:
            raise ValueError("impulse response is longer than one pitch period")
        e = pulse_train(model.pitch, (t.size + m) / rate, rate, start=-m / rate)
    else:
        e = np.random.default_rng(model.seed).standard_normal(t.size + m)
    if probe is not None:
        lam1, q1 = probe
        slope = np.max(np.abs(np.gradient(a, 1 / rate))) / max(a.max(), 1e-300)
        if slope > lam1 / (10 * q1):
            raise ValueError("envelope varies too fast for the probed wavelet")
    x = a * np.convolve(e, model.h, mode="valid")
    return RealSignal(x, rate)


def gen_two_tone(f1: float, f2: float, a1: float, a2: float, duration: float,
                 rate: float) -> RealSignal:
    t = _time(duration, rate)
    return RealSignal(a1 * np.cos(TWO_PI * f1 * t) + a2 * np.cos(TWO_PI * f2 * t), rate)


def gen_arpeggio(f1: float, f2: float, a1: float, a2: float, duration: float, rate: float,
                 fade: float = 0.02) -> RealSignal:
    """``f1`` during the first half then ``f2``; each note fades in and out
    over ``fade`` seconds so the two never sound together."""
    t = _time(duration, rate)
    half = duration / 2

    def gate(t0, t1):
        g = np.clip(np.minimum(t - t0, t1 - t) / fade, 0, 1)
        return 0.5 - 0.5 * np.cos(np.pi * g)
    x = a1 * gate(0, half) * np.cos(TWO_PI * f1 * t) + a2 * gate(half, duration) * np.cos(TWO_PI * f2 * t)
    return RealSignal(x, rate)


def harmonic_clip(pitch: float, duration: float, rate: float, fmax: float | None = None,
                  rolloff: float = 1.0, fade: float = 0.05) -> RealSignal:
    """Harmonics ``k*pitch`` with amplitude ``k**-rolloff`` up to ``fmax``,
    with raised-cosine fades at both ends."""
    t = _time(duration, rate)
    fmax = 0.9 * rate / 2 if fmax is None else fmax
    x = np.zeros_like(t)
    k = 1
    while k * pitch <= fmax:
        x += k ** -rolloff * np.cos(TWO_PI * k * pitch * t)
        k += 1
    g = np.clip(np.minimum(t, duration - t) / fade, 0, 1)
    return RealSignal(x * (0.5 - 0.5 * np.cos(np.pi * g)), rate)


def speech_like(duration: float, rate: float, seed: int = 0) -> RealSignal:
    """Alternating voiced and unvoiced syllables: gliding pitch through two
    formant resonances, then high-passed noise bursts, each with its own
    attack/decay envelope."""
    rng = np.random.default_rng(seed)
    n = int(round(duration * rate))
    x = np.zeros(n)
    pos = 0
    voiced = True
    while pos < n:
        seg = int(rate * rng.uniform(0.12, 0.3))
        seg = min(seg, n - pos)
        t = np.arange(seg) / rate
        if voiced:
            f0 = rng.uniform(100, 220) * (1 + rng.uniform(-0.15, 0.15) * t / max(t[-1], 1e-9))
            phase = TWO_PI * np.cumsum(f0) / rate
            src = np.zeros(seg)
            for k in range(1, int((rate / 2 * 0.9) / f0.max()) + 1):
                src += np.cos(k * phase) / k
            y = np.zeros(seg)
            for fc, bw in ((rng.uniform(400, 900), 120), (rng.uniform(1100, 2500), 200)):
                y += np.convolve(src, resonance(fc, bw, rate))[:seg]
        else:
            noise = rng.standard_normal(seg)
            y = np.convolve(noise, resonance(rng.uniform(2500, 6000), 1500, rate))[:seg]
        env = attack(t[-1] + 1 / rate, min(0.03, t[-1] / 3 + 1 / rate))(t)
        y = y * env
        x[pos:pos + seg] = y / (np.sqrt(np.mean(y ** 2)) + 1e-12) * rng.uniform(0.3, 1.0)
        pos += seg
        voiced = not voiced
    return RealSignal(x * 0.1, rate)


# --- oracles -------------------------------------------------------------

def interference_factor(a1: float, a2: float) -> float:
    s = a1 * a1 + a2 * a2
    return abs(a1 * a2) / s if s > 0 else 0.0


def band_amplitudes(bank: FilterBank, lam1: float, freqs_hz, amps):
    """Amplitudes of the tones ``amps*cos(2 pi f t)`` inside ``x * psi_lam1``."""
    w = bank.wavelets[int(np.argmin(np.abs(bank.centers - lam1)))]
    om = TWO_PI * np.asarray(freqs_hz, float)
    return np.abs(w.hat(om, bank.gain)) * np.abs(np.asarray(amps, float)) / 2


def predict_interference(f1: float, f2: float, a1: float, a2: float, bank2: FilterBank,
                         band: tuple | None = None) -> np.ndarray:
    """Predicted normalized second-order profile over ``bank2``'s wavelets.

    ``a1, a2`` are the tone amplitudes inside the first-order band; pass
    ``band=(bank1, lam1)`` to convert raw cosine amplitudes.  The analytic
    second-order wavelet sees one of the two exponentials of the beat
    ``cos((xi2-xi1) t)``, hence the factor 1/2.
    """
    if band is not None:
        bank1, lam1 = band
        b1, b2 = band_amplitudes(bank1, lam1, [f1, f2], [1.0, 1.0])
        peak = np.abs(bank1.psi_hat()).max()
        if min(b1, b2) < 0.05 * peak / 2:
            raise ValueError("tones are not inside one first-order band")
        a1, a2 = a1 * b1, a2 * b2
    om = TWO_PI * abs(f2 - f1)
    psi = np.array([abs(w.hat(om, bank2.gain)) for w in bank2.wavelets])
    return 0.5 * psi * interference_factor(a1, a2)


def _spread(h, rate):
    t = np.arange(len(h)) / rate
    return float(np.sum(t * np.abs(h)) / np.sum(np.abs(h)))


def predict_first_order(model: SourceFilterModel, lam1: float, bank: FilterBank,
                        rate: float | None = None) -> float:
    """Normalized first-order value at ``lam1`` under the source-filter model.

    Voiced: ``|psi(k xi)| |h_hat(lam1)| / ||h||_1`` with ``k xi`` the nearest
    harmonic.  Unvoiced: ``pi / 2**1.5 * ||psi_lam1|| |h_hat(lam1)| / ||h||_2``
    where ``||psi_lam1||`` is the RMS of its transfer function over the band
    ``[-rate/2, rate/2]``.
    """
    rate = bank.rate if rate is None else rate
    j = int(np.argmin(np.abs(bank.centers - lam1)))
    w = bank.wavelets[j]
    spread = _spread(model.h, rate)
    if spread > 0 and 1 / spread <= w.bandwidth:
        raise ValueError("h is not smooth over the wavelet band")
    hh = abs(transfer(model.h, w.center, rate)[0])
    if model.excitation == "pulse":
        xi = TWO_PI * model.pitch
        if w.bandwidth > xi:
            raise ValueError("wavelet bandwidth exceeds the pitch")
        k = max(1, round(w.center / xi))
        return float(abs(w.hat(k * xi, bank.gain)) * hh / np.sum(np.abs(model.h)))
    psi = bank.psi_hat()[j]
    psi_norm = math.sqrt(float(np.mean(np.abs(psi) ** 2)))
    return float(math.pi / 2 ** 1.5 * psi_norm * hh / np.linalg.norm(model.h))


def predict_second_order_am(a: RealSignal, bank2: FilterBank, max_order_bank=None):
    """``(|a * psi_lam2| * phi) / (a * phi)`` on frames of width ``bank2.T``.

    Returns ``(centers, profile)`` with ``profile`` of shape (wavelets, frames).
    """
    from .scattering import scatter
    st = scatter(a, [bank2], 1)
    den = st.order_values(0)[0]
    num = st.order_values(1)
    out = np.zeros_like(num)
    np.divide(num, den, out=out, where=den > 0)
    return bank2.centers, out


@dataclass
class MonteCarlo:
    mean: np.ndarray | float
    stderr: np.ndarray | float
    trials: int


@dataclass
class BoundProbe:
    empirical: MonteCarlo
    bound: np.ndarray

    def worst_excess(self) -> float:
        """Largest ``(empirical - bound) / stderr`` (negative when satisfied)."""
        se = np.maximum(np.asarray(self.empirical.stderr), 1e-300)
        return float(np.max((self.empirical.mean - self.bound) / se))


def _circular(a, h):
    n = len(a)
    return np.fft.ifft(np.fft.fft(a) * np.fft.fft(h, n))


def modulated_noise_bound_probe(process: Callable, a: np.ndarray, h: np.ndarray, trials: int = 100,
                                sup_psd: float = 1.0, seed: int = 0) -> BoundProbe:
    """Monte Carlo of ``E|((z a) * h)[n]|^2`` against ``sup R_z * (|a|^2 * |h|^2)[n]``.

    ``process(rng, n)`` draws one zero-mean stationary realisation; trial
    ``i`` uses the generator seeded with ``seed + i``.  Convolutions are
    circular on ``len(a)`` samples.
    """
    if trials < 30:
        raise ValueError("at least 30 trials are required")
    a = np.asarray(a, float)
    n = len(a)
    acc = np.zeros(n)
    acc2 = np.zeros(n)
    for i in range(trials):
        z = process(np.random.default_rng(seed + i), n)
        v = np.abs(_circular(z * a, h)) ** 2
        acc += v
        acc2 += v * v
    mean = acc / trials
    var = np.maximum(acc2 / trials - mean ** 2, 0.0)
    stderr = np.sqrt(var / (trials - 1))
    bound = sup_psd * _circular(np.abs(a) ** 2, np.abs(h) ** 2).real
    return BoundProbe(MonteCarlo(mean, stderr, trials), bound)


def _ratio_of_moments(samples_per_trial):
    """``E(|y|)^2 / E(|y|^2)`` with a delta-method standard error over trials."""
    m1 = np.array([np.mean(s) for s in samples_per_trial])
    m2 = np.array([np.mean(s ** 2) for s in samples_per_trial])
    k = len(m1)
    A, B = m1.mean(), m2.mean()
    r = A * A / B
    grad = np.array([2 * A / B, -A * A / B ** 2])
    cov = np.cov(np.vstack([m1, m2])) / k
    return MonteCarlo(float(r), float(math.sqrt(max(grad @ cov @ grad, 0.0))), k)


def rayleigh_ratio(bank: FilterBank, lam1: float, trials: int = 100, seed: int = 0) -> MonteCarlo:
    """``E(|e*psi|)^2 / E(|e*psi|^2)`` for white Gaussian ``e``; tends to pi/4."""
    j = int(np.argmin(np.abs(bank.centers - lam1)))
    psi = bank.psi_hat()[j]
    out = []
    for i in range(trials):
        e = np.random.default_rng(seed + i).standard_normal(bank.size)
        out.append(np.abs(np.fft.ifft(np.fft.fft(e) * psi)))
    return _ratio_of_moments(out)


def chi_ratio(h: np.ndarray, size: int = 4096, trials: int = 100, seed: int = 0) -> MonteCarlo:
    """``E(|e*h|)^2 / E(|e*h|^2)`` for white Gaussian ``e`` and real ``h``; tends to 2/pi."""
    out = []
    for i in range(trials):
        e = np.random.default_rng(seed + i).standard_normal(size)
        out.append(np.abs(_circular(e, h).real))
    return _ratio_of_moments(out)


def wavelet_l1_norm(bank: FilterBank, lam1: float) -> float:
    """``sum |psi[n]|`` of the wavelet's taps on the bank grid."""
    j = int(np.argmin(np.abs(bank.centers - lam1)))
    return float(np.sum(np.abs(np.fft.ifft(bank.psi_hat()[j]))))


def rayleigh_fluctuation(bank: FilterBank, lam1: float) -> Callable:
    """Sampler of ``|e*psi_lam1| - E|e*psi_lam1|`` for white Gaussian ``e``."""
    j = int(np.argmin(np.abs(bank.centers - lam1)))
    psi = bank.psi_hat()[j]
    mean = math.sqrt(math.pi / 4 * float(np.mean(np.abs(psi) ** 2)))

    def draw(rng, n):
        if n != bank.size:
            raise ValueError("length must equal the bank size")
        return np.abs(np.fft.ifft(np.fft.fft(rng.standard_normal(n)) * psi)) - mean
    return draw


def am_error_bound(lam1: float, lam2: float, q1: float, q2: float, C: float = 1.0) -> float:
    """``C (4/pi - 1)^{1/2} (lam2 Q1)^{1/2} (lam1 Q2)^{-1/2}``."""
    return C * math.sqrt(4 / math.pi - 1) * math.sqrt(lam2 * q1 / (lam1 * q2))
