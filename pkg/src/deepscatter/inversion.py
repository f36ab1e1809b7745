"""Approximate inverse scattering.

The deepest layer is deconvolved from its frames with Richardson-Lucy
iterations, then each wavelet-modulus layer is inverted by alternating
projections (modulus substitution followed by the dual-filter pseudo-inverse).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .filterbank import FilterBank, dual_filters, inverse_wavelet_transform
from .scattering import ScatteringPath, ScatteringTransform, _factor
from .signal import RealSignal, fold_spectrum, pad_for_transform, upsample_linear

DIVISION_FLOOR = 1e-12


@dataclass
class DeconvolutionResult:
    estimate: RealSignal
    iterations: int
    residual: float
    residual_history: list = field(default_factory=list)
    min_history: list = field(default_factory=list)


@dataclass
class PhaseRecoveryResult:
    signal: RealSignal
    modulus_error: float
    iterations: int
    error_history: list = field(default_factory=list)

    @property
    def initial_error(self) -> float:
        return self.error_history[0]


def _floor(a):
    m = float(np.max(a)) if a.size else 0.0
    return np.maximum(a, DIVISION_FLOOR * m if m > 0 else DIVISION_FLOOR)


def richardson_lucy(y0: RealSignal, phi_hat: np.ndarray, n_iter: int = 30) -> DeconvolutionResult:
    """Deconvolve ``y0 = u * phi`` for ``u >= 0`` on the circular grid of ``y0``.

    ``phi_hat`` is the low-pass spectrum on that grid; the filter must be
    nonnegative in time (a Gaussian is).  Iterates
    ``y <- y * ((y0 / (y * phi)) * phi~)`` from ``y = y0``.
    """
    y0s = y0.samples
    if y0s.size != phi_hat.size:
        raise ValueError("low-pass grid does not match the signal")
    if np.any(y0s < 0):
        raise ValueError("frames must be nonnegative")
    if n_iter < 0:
        raise ValueError("n_iter must be >= 0")
    y = y0s.copy()
    ref = np.linalg.norm(y0s)
    conj = np.conj(phi_hat)

    def blur(a, h):
        return np.fft.ifft(np.fft.fft(a) * h).real

    res_hist, min_hist = [], [float(y.min())]
    for _ in range(n_iter):
        b = blur(y, phi_hat)
        res_hist.append(float(np.linalg.norm(b - y0s) / ref) if ref > 0 else 0.0)
        ratio = y0s / _floor(b)
        corr = blur(ratio, conj)
        # the correction of a nonnegative ratio by a nonnegative kernel can
        # only dip below zero by FFT round-off
        if corr.min() < -1e-9 * max(1.0, float(np.abs(corr).max())):
            raise ArithmeticError("Richardson-Lucy correction lost positivity")
        y = y * np.maximum(corr, 0.0)
        min_hist.append(float(y.min()))
        assert min_hist[-1] >= 0.0
    b = blur(y, phi_hat)
    residual = float(np.linalg.norm(b - y0s) / ref) if ref > 0 else 0.0
    res_hist.append(residual)
    return DeconvolutionResult(RealSignal(y, y0.rate), n_iter, residual, res_hist, min_hist)


def frames_to_grid(frames: np.ndarray, hop: float, rate: float, size: int, offset: float) -> RealSignal:
    """Linear interpolation of frames (frame ``k`` at ``offset + k*hop`` seconds
    from sample 0) onto ``size`` samples at ``rate``; ends held constant."""
    frames = np.asarray(frames, float)
    if frames.size == 1:
        return RealSignal(np.full(size, frames[0]), rate)
    return upsample_linear(RealSignal(frames, 1.0 / hop), rate, size, -offset)


def deconvolve_frames(frames, hop, bank: FilterBank, size: int, rate: float, offset: float,
                      n_iter: int = 30) -> DeconvolutionResult:
    y0 = frames_to_grid(np.maximum(frames, 0.0), hop, rate, size, offset)
    return richardson_lucy(y0, bank.phi_hat(size, rate), n_iter)


def _analysis(x, bank, size, rate):
    X = np.fft.fft(x)
    return np.fft.ifft(X[None, :] * bank.psi_hat(size, rate), axis=-1)


def modulus_error(x: np.ndarray, targets: np.ndarray, bank: FilterBank, rate: float) -> float:
    mod = np.abs(_analysis(x, bank, x.size, rate))
    den = np.linalg.norm(targets)
    return float(np.linalg.norm(mod - targets) / (den if den > 0 else 1.0))


def griffin_lim(targets: np.ndarray, lowpass: np.ndarray, bank: FilterBank, rate: float,
                n_iter: int = 30, seed: int = 0, init: np.ndarray | None = None) -> PhaseRecoveryResult:
    """Recover a real signal whose wavelet moduli approach ``targets``.

    ``targets`` has one row per wavelet of ``bank`` sampled on the same grid
    as ``lowpass`` (the prescribed ``x * phi``).  Each iteration substitutes
    the target modulus while keeping the current phase, then applies the
    dual-filter pseudo-inverse.  Without ``init`` the start is Gaussian noise
    with the RMS the targets imply.
    """
    targets = np.asarray(targets, float)
    lowpass = np.asarray(lowpass, float)
    size = lowpass.size
    if targets.shape != (len(bank), size):
        raise ValueError(f"targets must have shape {(len(bank), size)}")
    if np.any(targets < 0):
        raise ValueError("targets must be nonnegative")
    duals = dual_filters(bank, size, rate)
    if init is None:
        rng = np.random.default_rng(seed)
        rms = np.sqrt(np.mean(targets ** 2) * len(bank) + np.mean(lowpass ** 2))
        x = rng.standard_normal(size) * rms
    else:
        x = np.asarray(init, float).copy()
    history = []
    for _ in range(n_iter):
        y = _analysis(x, bank, size, rate)
        mod = np.abs(y)
        history.append(float(np.linalg.norm(mod - targets) / max(np.linalg.norm(targets), 1e-300)))
        z = targets * y / _floor(mod)
        x = inverse_wavelet_transform(lowpass, z, duals)
    err = modulus_error(x, targets, bank, rate) if np.any(targets) else float(np.linalg.norm(np.abs(_analysis(x, bank, size, rate))))
    history.append(err)
    return PhaseRecoveryResult(RealSignal(x, rate), err, n_iter, history)


def _layer_targets(st, path, bank, size, rate, n_iter, retained=None):
    """Envelope estimates on a ``(size, rate)`` grid for every wavelet of ``bank``
    below ``path``; missing children get zero."""
    rows = np.zeros((len(bank), size))
    for j, w in enumerate(bank.wavelets):
        child = path.child(w.center)
        if child not in st:
            continue
        f = _factor(w, bank, rate, size)
        dec = deconvolve_frames(st[child], st.hop, bank, size // f, rate / f, st.offset, n_iter)
        est = dec.estimate.samples
        rows[j] = est if f == 1 else _upsample_periodic(est, f)
        if retained is not None:
            retained.append(dec)
    return rows


def _upsample_periodic(samples, f):
    """Linear interpolation by an integer factor on a circular grid."""
    n = samples.size
    fine = np.arange(n * f) / f
    return np.interp(fine, np.arange(n + 1), np.concatenate((samples, samples[:1])))


def inverse_scattering(st: ScatteringTransform, banks, max_order: int | None = None,
                       n_iter_rl: int = 30, n_iter_gl: int = 30, seed: int = 0,
                       length: int | None = None, report: dict | None = None,
                       inner_init: str = "noise") -> RealSignal:
    """Approximate signal with the scattering coefficients of ``st``.

    ``max_order`` 1 deconvolves ``S_1`` then inverts ``|W_1|`` with ``S_0``
    as low-pass part.  ``max_order`` 2 deconvolves ``S_2``, inverts ``|W_2|``
    under every first-order path (``S_1`` as its low-pass part) and then
    ``|W_1|``.  Returns the samples on the original span.

    ``inner_init`` selects how each ``|W_2|`` inversion starts: ``"noise"``
    or ``"deconvolved"`` (the Richardson-Lucy estimate from ``S_1``).
    """
    if inner_init not in ("noise", "deconvolved"):
        raise ValueError("inner_init must be 'noise' or 'deconvolved'")
    M = st.max_order if max_order is None else max_order
    if M not in (1, 2):
        raise ValueError("inversion supports max_order 1 or 2")
    if st.max_order < M:
        raise ValueError(f"transform lacks order {M}")
    bank1 = banks[0]
    size, rate = st.size, bank1.rate
    root = ScatteringPath()
    info = {"rl": [], "gl": []}

    if M == 1:
        targets = _layer_targets(st, root, bank1, size, rate, n_iter_rl, info["rl"])
    else:
        bank2 = banks[1]
        targets = np.zeros((len(bank1), size))
        for j, w in enumerate(bank1.wavelets):
            p1 = root.child(w.center)
            f1 = _factor(w, bank1, rate, size)
            n1, r1 = size // f1, rate / f1
            low1 = frames_to_grid(np.maximum(st[p1], 0.0), st.hop, r1, n1, st.offset).samples
            t2 = _layer_targets(st, p1, bank2, n1, r1, n_iter_rl, info["rl"])
            if not np.any(t2) and not np.any(low1):
                continue
            init = None
            if inner_init == "deconvolved":
                init = richardson_lucy(RealSignal(low1, r1), bank1.phi_hat(n1, r1), n_iter_rl).estimate.samples
            gl = griffin_lim(t2, low1, bank2, r1, n_iter_gl, seed + j + 1, init=init)
            info["gl"].append(gl)
            u1 = np.maximum(gl.signal.samples, 0.0)
            targets[j] = u1 if f1 == 1 else _upsample_periodic(u1, f1)
    low0 = frames_to_grid(st[root], st.hop, rate, size, st.offset).samples
    final = griffin_lim(targets, low0, bank1, rate, n_iter_gl, seed)
    info["gl"].append(final)
    if report is not None:
        report.update(info)
    start = int(round(st.offset * rate))
    n = length if length is not None else int(round((st.times[-1] + st.hop) * rate))
    return RealSignal(final.signal.samples[start:start + n], rate)


def scalogram(x: RealSignal, bank: FilterBank) -> np.ndarray:
    """Dense ``|x * psi_lambda|`` on the bank's grid, cropped to the input span."""
    xp, unpad = pad_for_transform(x, bank.size, center=True)
    return np.abs(_analysis(xp.samples, bank, bank.size, x.rate))[:, unpad.start:unpad.start + len(x)]


def scalogram_error(x_hat: RealSignal, x: RealSignal, bank: FilterBank) -> float:
    """``|| |x_hat*psi| - |x*psi| || / || |x*psi| ||`` over the span of ``x``."""
    if len(x_hat) != len(x):
        raise ValueError("signals must have equal length")
    a, b = scalogram(x_hat, bank), scalogram(x, bank)
    return float(np.linalg.norm(a - b) / np.linalg.norm(b))
