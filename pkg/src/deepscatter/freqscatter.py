"""Scattering along the log-frequency axis of log-normalized coefficients.

Profiles ``z(gamma)`` are indexed by the ordinal of the first-order wavelet,
which is a uniform grid in ``log2(lambda_1)`` over the constant-Q region
(spacing ``1/Q1`` octave) and stays monotone over the linear band below it.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .filterbank import FilterBank, build_morlet_bank
from .signal import next_power_of_two
from .normalization import NormalizedScattering

FIRST_ORDER = "first"


def build_quefrency_bank(Q: float = 1, gamma_support: float = 2.0,
                         grid_spacing: float = 1 / 8, length: int = 64) -> FilterBank:
    """Morlet bank acting along ``gamma``.

    ``gamma_support`` (octaves) is the averaging width of the low-pass,
    ``grid_spacing`` the profile step in octaves and ``length`` the number of
    profile samples.  The grid is padded to a power of two that holds the
    profile plus one averaging width.
    """
    if length < 4:
        raise ValueError("profile must have at least 4 samples")
    if grid_spacing <= 0 or gamma_support <= 0:
        raise ValueError("grid_spacing and gamma_support must be positive")
    rate = 1.0 / grid_spacing
    size = next_power_of_two(length + int(math.ceil(gamma_support * rate)))
    return build_morlet_bank(Q, gamma_support, rate, size)


@dataclass
class FreqSlot:
    gamma_hz: np.ndarray          # first-order centers along the profile, Hz
    zero: np.ndarray              # (frames, L): z (mode U) or z*phi (mode S)
    first: np.ndarray             # (frames, quefrencies, L)


@dataclass
class FreqScattering:
    mode: str
    times: np.ndarray
    slots: dict                   # FIRST_ORDER or lambda_2 (rad/s) -> FreqSlot
    bank: FilterBank

    def quefrencies(self) -> np.ndarray:
        """Quefrency centers in cycles per octave."""
        return self.bank.centers / (2 * math.pi)

    def flatten(self) -> np.ndarray:
        """All coefficients per frame, slot by slot, shape ``(frames, D)``."""
        cols = []
        for key in self.slot_order():
            s = self.slots[key]
            cols.append(s.zero)
            cols.append(s.first.reshape(len(self.times), -1))
        return np.concatenate(cols, axis=1)

    def slot_order(self):
        return [k for k in self.slots if k == FIRST_ORDER] + \
            sorted(k for k in self.slots if k != FIRST_ORDER)


def _check_grid(centers, q1):
    if np.any(np.diff(centers) <= 0):
        raise ValueError("first-order centers are not increasing")
    ratios = np.diff(np.log2(centers))
    # constant-Q tail: spacing 1/Q1 octave
    tail = ratios[-max(1, min(len(ratios), int(q1))):]
    if np.any(np.abs(tail - 1.0 / q1) > 1e-6):
        raise ValueError("log-frequency grid is irregular in the constant-Q region")


def _profiles(ns: NormalizedScattering):
    """Slot -> (lambda_1 centers, (frames, L) matrix)."""
    first = ns.order_paths(1)
    lam1 = np.array([p.centers[0] for p in first])
    slots = {FIRST_ORDER: (lam1, np.array([ns[p] for p in first]).T)}
    by_lam2 = {}
    for p in ns.order_paths(2):
        by_lam2.setdefault(p.centers[1], []).append(p)
    for lam2, ps in by_lam2.items():
        ps.sort(key=lambda p: p.centers[0])
        if len(ps) < 4:
            continue
        slots[lam2] = (np.array([p.centers[0] for p in ps]), np.array([ns[p] for p in ps]).T)
    return slots


def _pad(a, size):
    L = a.shape[-1]
    left = (size - L) // 2
    return np.pad(a, [(0, 0)] * (a.ndim - 1) + [(left, size - L - left)], mode="reflect"), left


def _modulus_rows(Z, bank: FilterBank):
    """``|z * psi_q|`` for every row of ``Z`` (frames, L) and every quefrency."""
    L = Z.shape[-1]
    Zp, left = _pad(Z, bank.size)
    F = np.fft.fft(Zp, axis=-1)
    U1 = np.abs(np.fft.ifft(F[:, None, :] * bank.psi_hat()[None], axis=-1))
    return U1[..., left:left + L]


def _smooth(a, bank: FilterBank):
    L = a.shape[-1]
    ap, left = _pad(a, bank.size)
    return np.fft.ifft(np.fft.fft(ap, axis=-1) * bank.phi_hat(), axis=-1).real[..., left:left + L]


def freq_scatter(log_ns: NormalizedScattering, mode: str = "U", phi_fr_width: float = 2.0) -> FreqScattering:
    """Zero- and first-order scattering along ``gamma`` for the first-order
    profile and every second-order ``lambda_2`` slot with at least 4 entries."""
    if mode not in ("U", "S"):
        raise ValueError("mode must be 'U' or 'S'")
    if not log_ns.is_log:
        raise ValueError("frequency scattering expects log-normalized coefficients")
    q1 = log_ns.config.Q[0]
    profiles = _profiles(log_ns)
    lam1 = profiles[FIRST_ORDER][0]
    if len(lam1) < 4:
        raise ValueError("profile must have at least 4 samples")
    _check_grid(lam1, q1)
    bank = build_quefrency_bank(1, phi_fr_width, 1.0 / q1, len(lam1))
    slots = {key: FreqSlot(centers / (2 * math.pi), Z, _modulus_rows(Z, bank))
             for key, (centers, Z) in profiles.items()}
    U = FreqScattering("U", log_ns.times, slots, bank)
    return U if mode == "U" else average_gamma(U)


def average_gamma(U: FreqScattering) -> FreqScattering:
    """Apply the ``gamma`` low-pass to a mode-U result (gives mode S)."""
    if U.mode != "U":
        raise ValueError("input must be mode U")
    slots = {key: FreqSlot(s.gamma_hz, _smooth(s.zero, U.bank), _smooth(s.first, U.bank))
             for key, s in U.slots.items()}
    return FreqScattering("S", U.times, slots, U.bank)
