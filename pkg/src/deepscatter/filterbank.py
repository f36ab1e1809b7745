"""Morlet analytic wavelet banks, Gaussian low-pass and dual (reconstruction) filters."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .signal import angular_grid, folding_leak, ALIASING_TOLERANCE

LN2 = math.log(2.0)


class FrameError(ValueError):
    """The filters do not cover the frequency axis (A(omega) vanishes or alpha >= 1)."""

    def __init__(self, message, omega=None):
        self.omega = omega
        super().__init__(message)


def morlet_hat(omega, center, sigma):
    """Morlet transfer function with a Gaussian of std ``sigma`` (rad/s),
    corrected so the value at zero frequency is exactly zero."""
    gabor = np.exp(-(omega - center) ** 2 / (2 * sigma ** 2))
    correction = np.exp(-omega ** 2 / (2 * sigma ** 2)) * math.exp(-center ** 2 / (2 * sigma ** 2))
    return gabor - correction


def gaussian_lowpass_hat(omega, T):
    """Transfer function of a unit-area Gaussian whose time-domain FWHM is T."""
    sigma_t = T / (2 * math.sqrt(2 * LN2))
    return np.exp(-(omega * sigma_t) ** 2 / 2)


@dataclass(frozen=True)
class Wavelet:
    center: float         # rad/s
    bandwidth: float      # -3 dB full width, rad/s
    max_subsample: int    # largest power-of-two decimation of the output
    constant_q: bool

    @property
    def sigma(self) -> float:
        return self.bandwidth / (2 * math.sqrt(LN2))

    def hat(self, omega, gain=1.0):
        return gain * morlet_hat(omega, self.center, self.sigma)


class FilterBank:
    """A family of band-pass wavelets plus a low-pass filter.

    Filters are defined analytically in rad/s and can be sampled on any FFT
    grid with :meth:`psi_hat` / :meth:`phi_hat`.  The common wavelet ``gain``
    is fixed at construction so that the Littlewood-Paley sum stays at or
    below one on the reference grid of ``size`` samples.
    """

    def __init__(self, Q, T, rate, size, wavelets, gain):
        self.Q = Q
        self.T = T
        self.rate = rate
        self.size = size
        self.wavelets = tuple(wavelets)
        self.gain = gain
        self._cache = {}
        _, A, self.alpha = littlewood_paley(self)
        self.lp_max = float(A.max())

    def __len__(self):
        return len(self.wavelets)

    def __repr__(self):
        return (f"FilterBank(Q={self.Q}, T={self.T}, rate={self.rate}, "
                f"size={self.size}, n_wavelets={len(self)}, alpha={self.alpha:.3f})")

    @property
    def centers(self) -> np.ndarray:
        return np.array([w.center for w in self.wavelets])

    @property
    def bandwidths(self) -> np.ndarray:
        return np.array([w.bandwidth for w in self.wavelets])

    def psi_hat(self, size=None, rate=None) -> np.ndarray:
        """Wavelet spectra on a grid, shape ``(n_wavelets, size)``."""
        size = self.size if size is None else size
        rate = self.rate if rate is None else rate
        key = ("psi", size, rate)
        if key not in self._cache:
            omega = angular_grid(size, rate)
            out = np.array([w.hat(omega, self.gain) for w in self.wavelets])
            out.setflags(write=False)
            self._cache[key] = out
        return self._cache[key]

    def leak(self, j: int, factor: int, size=None, rate=None) -> float:
        """Folding leak of wavelet ``j`` decimated by ``factor`` on a grid (cached)."""
        size = self.size if size is None else size
        rate = self.rate if rate is None else rate
        key = ("leak", j, factor, size, rate)
        if key not in self._cache:
            self._cache[key] = folding_leak(self.psi_hat(size, rate)[j], factor)
        return self._cache[key]

    def phi_hat(self, size=None, rate=None) -> np.ndarray:
        size = self.size if size is None else size
        rate = self.rate if rate is None else rate
        key = ("phi", size, rate)
        if key not in self._cache:
            out = gaussian_lowpass_hat(angular_grid(size, rate), self.T)
            out.setflags(write=False)
            self._cache[key] = out
        return self._cache[key]

    def scaled(self, c: float) -> "FilterBank":
        """Copy with every filter (low-pass included) multiplied by ``c``."""
        return _ScaledBank(self, c)

    def descriptor(self) -> dict:
        return {
            "Q": self.Q, "T": self.T, "rate": self.rate, "size": self.size,
            "alpha": self.alpha,
            "centers_hz": [w.center / (2 * math.pi) for w in self.wavelets],
            "bandwidths_hz": [w.bandwidth / (2 * math.pi) for w in self.wavelets],
            "max_subsample": [w.max_subsample for w in self.wavelets],
        }

    def to_json(self) -> str:
        return json.dumps(self.descriptor())


class _ScaledBank(FilterBank):
    def __init__(self, bank, c):
        self._bank, self._c = bank, c
        super().__init__(bank.Q, bank.T, bank.rate, bank.size, bank.wavelets, bank.gain * c)

    def phi_hat(self, size=None, rate=None):
        return self._c * self._bank.phi_hat(size, rate)


def constant_q_centers(Q, T, rate):
    """Geometric centers ``lambda_max * 2**(-k/Q)`` (rad/s) down to the last one
    at or above ``2*pi*Q/T``.  ``lambda_max`` puts the upper -3 dB edge of the
    top wavelet on Nyquist so the whole band up to Nyquist is covered."""
    lam_max = math.pi * rate / (1 + 0.5 / Q)
    lam_min = 2 * math.pi * Q / T
    n = math.floor(Q * math.log2(lam_max / lam_min) + 1e-9) + 1
    return [lam_max * 2.0 ** (-k / Q) for k in range(n - 1, -1, -1)]


def _max_subsample(spec):
    """Largest power-of-two decimation whose folding leak stays within tolerance
    (the leak is a ratio, so the filter's gain does not matter)."""
    size = spec.size
    power = np.abs(spec) ** 2
    total = power.sum()
    if total == 0:
        return size
    # one circular prefix sum serves every candidate window width
    csum = np.concatenate(([0.0], np.cumsum(np.concatenate((power, power)))))
    factor = 1
    while factor * 2 <= size:
        m = size // (factor * 2)
        if 1.0 - (csum[m:m + size] - csum[:size]).max() / total > ALIASING_TOLERANCE:
            break
        factor *= 2
    return factor


def build_morlet_bank(Q, T, rate, size) -> FilterBank:
    """Build a Morlet bank with ``Q`` wavelets per octave and averaging scale ``T`` (s).

    Constant-Q wavelets (``-3 dB`` width ``lambda/Q``) sit on the grid
    ``2**(k/Q)`` rad/s above ``2*pi*Q/T``; the interval below is covered by
    ``max(1, ceil(Q) - 1)`` linearly spaced wavelets of width ``2*pi/T``.
    """
    if Q < 1:
        raise ValueError("Q must be >= 1")
    if T <= 0 or rate <= 0:
        raise ValueError("T and rate must be positive")
    if 2 * math.pi * Q / T * (1 + 0.5 / Q) >= math.pi * rate:
        raise ValueError("2*pi*Q/T is not below Nyquist")
    if size < T * rate:
        raise ValueError(f"size {size} too small for an averaging scale of {T} s")

    cq = constant_q_centers(Q, T, rate)
    n_lin = max(1, math.ceil(Q) - 1)
    lin = [cq[0] * j / (n_lin + 1) for j in range(1, n_lin + 1)]
    wavelets = [Wavelet(c, 2 * math.pi / T, 1, False) for c in lin]
    wavelets += [Wavelet(c, c / Q, 1, True) for c in cq]

    omega = angular_grid(size, rate)
    phi2 = gaussian_lowpass_hat(omega, T) ** 2
    raw = np.array([w.hat(omega) for w in wavelets])
    W = 0.5 * np.sum(np.abs(raw) ** 2 + np.abs(raw[:, _negate_index(size)]) ** 2, axis=0)
    ok = W > 1e-12 * W.max()
    gain = math.sqrt(float(np.min((1 - phi2[ok]) / W[ok])))

    wavelets = [Wavelet(w.center, w.bandwidth, _max_subsample(raw[j]), w.constant_q)
                for j, w in enumerate(wavelets)]
    bank = FilterBank(Q, T, rate, size, wavelets, gain)
    if not bank.alpha < 1:
        _, A, _ = littlewood_paley(bank)
        worst = float(omega[: size // 2 + 1][np.argmin(A[: size // 2 + 1])])
        raise FrameError(f"frame condition violated at {worst / (2 * math.pi):.1f} Hz", worst)
    return bank


def _negate_index(size):
    return (-np.arange(size)) % size


def littlewood_paley(bank: FilterBank, size=None, rate=None):
    """Return ``(omega, A, alpha)`` with
    ``A = |phi|^2 + 1/2 * sum(|psi(w)|^2 + |psi(-w)|^2)`` on the FFT grid and
    ``alpha = 1 - min A`` over ``[0, Nyquist]``."""
    size = bank.size if size is None else size
    rate = bank.rate if rate is None else rate
    omega = angular_grid(size, rate)
    psi = bank.psi_hat(size, rate)
    A = np.abs(bank.phi_hat(size, rate)) ** 2
    if len(psi):
        p2 = np.abs(psi) ** 2
        A = A + 0.5 * np.sum(p2 + p2[:, _negate_index(size)], axis=0)
    alpha = 1.0 - float(A[: size // 2 + 1].min())
    return omega, A, alpha


@dataclass(frozen=True, eq=False)
class DualBank:
    """Reconstruction filters on one FFT grid."""
    phi_bar: np.ndarray
    psi_bar: np.ndarray
    size: int
    rate: float


def dual_filters(bank: FilterBank, size=None, rate=None) -> DualBank:
    """Dual filters ``conj(phi)/A`` and ``conj(psi)/A`` on the given grid."""
    size = bank.size if size is None else size
    rate = bank.rate if rate is None else rate
    omega, A, _ = littlewood_paley(bank, size, rate)
    if np.any(A <= 0):
        bad = float(omega[np.argmin(A)])
        raise FrameError(f"singular frame: A vanishes at {bad / (2 * math.pi):.1f} Hz", bad)
    phi_bar = np.conj(bank.phi_hat(size, rate)) / A
    psi_bar = np.conj(bank.psi_hat(size, rate)) / A
    return DualBank(phi_bar, psi_bar, size, rate)


def wavelet_transform(x: np.ndarray, bank: FilterBank, rate=None):
    """Dense (non-subsampled) ``(x*phi, [x*psi_lambda])`` by FFT on ``len(x)``."""
    n = len(x)
    X = np.fft.fft(x)
    low = np.fft.ifft(X * bank.phi_hat(n, rate)).real
    high = np.fft.ifft(X[None, :] * bank.psi_hat(n, rate), axis=-1)
    return low, high


def inverse_wavelet_transform(low, high, duals: DualBank) -> np.ndarray:
    """Pseudo-inverse ``low*phi_bar + sum Re(high_l * psi_bar_l)``."""
    out = np.fft.ifft(np.fft.fft(low) * duals.phi_bar).real
    if len(high):
        out = out + np.sum(np.fft.ifft(np.fft.fft(high, axis=-1) * duals.psi_bar, axis=-1).real,
                           axis=0)
    return out
