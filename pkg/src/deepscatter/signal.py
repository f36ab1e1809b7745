"""FFT-based convolution, padding, subsampling and modulus primitives.

Conventions used throughout the package:

* forward FFT without normalisation, inverse FFT with ``1/N``;
* bin ``k`` of a length-``N`` spectrum sampled at ``rate`` Hz stands for the
  angular frequency ``2*pi*k*rate/N`` (negative frequencies above ``N/2``);
* norms are continuous-time, ``||y||^2 = sum |y[n]|^2 / rate``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import czt

ALIASING_TOLERANCE = 0.01


class AliasingError(ValueError):
    """Raised when subsampling a filtered signal would fold too much energy."""

    def __init__(self, leak: float, factor: int):
        self.leak = leak
        self.factor = factor
        super().__init__(
            f"subsampling by {factor} folds {leak:.3%} of the filter energy "
            f"(tolerance {ALIASING_TOLERANCE:.0%})")


def is_power_of_two(n: int) -> bool:
    return isinstance(n, (int, np.integer)) and n >= 1 and (n & (n - 1)) == 0


def next_power_of_two(n: int) -> int:
    return 1 << max(0, int(np.ceil(np.log2(max(n, 1)))))


def _check_samples(samples, dtype):
    samples = np.asarray(samples, dtype=dtype)
    if samples.ndim != 1 or samples.size < 1:
        raise ValueError("signal must be a non-empty 1-D sequence")
    if not np.all(np.isfinite(samples)):
        raise ValueError("signal contains non-finite values")
    return samples


@dataclass(frozen=True, eq=False)
class RealSignal:
    samples: np.ndarray
    rate: float

    def __post_init__(self):
        object.__setattr__(self, "samples", _check_samples(self.samples, float))
        if not self.rate > 0:
            raise ValueError("rate must be positive")

    def __len__(self):
        return self.samples.size

    @property
    def duration(self) -> float:
        return self.samples.size / self.rate

    def energy(self) -> float:
        return float(np.sum(self.samples ** 2) / self.rate)


@dataclass(frozen=True, eq=False)
class ComplexSignal:
    samples: np.ndarray
    rate: float

    def __post_init__(self):
        object.__setattr__(self, "samples", _check_samples(self.samples, complex))
        if not self.rate > 0:
            raise ValueError("rate must be positive")

    def __len__(self):
        return self.samples.size

    def energy(self) -> float:
        return float(np.sum(np.abs(self.samples) ** 2) / self.rate)


@dataclass(frozen=True, eq=False)
class Spectrum:
    bins: np.ndarray
    rate: float

    def __post_init__(self):
        bins = np.asarray(self.bins, dtype=complex)
        if bins.ndim != 1 or not is_power_of_two(bins.size):
            raise ValueError("spectrum length must be a power of two")
        if not self.rate > 0:
            raise ValueError("rate must be positive")
        object.__setattr__(self, "bins", bins)

    def __len__(self):
        return self.bins.size

    @property
    def omega(self) -> np.ndarray:
        return angular_grid(self.bins.size, self.rate)


def angular_grid(size: int, rate: float) -> np.ndarray:
    """Angular frequencies (rad/s) of the FFT bins; the Nyquist bin is positive."""
    k = np.fft.fftfreq(size, d=1.0 / size)
    if size % 2 == 0:
        k[size // 2] = size // 2
    return 2 * np.pi * k * rate / size


def fft_forward(signal, size: int) -> Spectrum:
    if not is_power_of_two(size):
        raise ValueError(f"FFT size {size} is not a power of two")
    if size < len(signal):
        raise ValueError(f"FFT size {size} is shorter than the signal ({len(signal)})")
    return Spectrum(np.fft.fft(signal.samples, n=size), signal.rate)


def fft_inverse(spectrum: Spectrum) -> ComplexSignal:
    return ComplexSignal(np.fft.ifft(spectrum.bins), spectrum.rate)


@dataclass(frozen=True)
class Unpad:
    """Where the original samples sit inside a padded buffer."""
    start: int
    length: int

    def __call__(self, samples):
        return samples[self.start:self.start + self.length]


def pad_for_transform(signal: RealSignal, target: int, mode: str = "reflect",
                      center: bool = False):
    """Pad ``signal`` to ``target`` samples.

    With ``center=False`` all padding goes after the signal, so
    ``[1, 2, 3]`` reflect-padded to 8 gives ``[1, 2, 3, 2, 1, 2, 3, 2]``.
    ``center=True`` splits the padding between both ends, which keeps the
    circular wrap point away from the signal edges.
    """
    n = len(signal)
    if target < n:
        raise ValueError(f"target {target} is shorter than the signal ({n})")
    if mode not in ("reflect", "zero"):
        raise ValueError(f"unknown padding mode {mode!r}")
    extra = target - n
    left = extra // 2 if center else 0
    right = extra - left
    if mode == "zero" or n == 1:
        padded = np.pad(signal.samples, (left, right), mode="constant",
                        constant_values=0.0 if mode == "zero" else signal.samples[0])
    else:
        padded = np.pad(signal.samples, (left, right), mode="reflect")
    return RealSignal(padded, signal.rate), Unpad(left, n)


def folding_leak(filter_bins: np.ndarray, factor: int) -> float:
    """Fraction of filter energy that falls outside the best band of width
    ``size/factor`` bins, i.e. what decimation by ``factor`` folds onto itself."""
    power = np.abs(filter_bins) ** 2
    total = power.sum()
    if factor == 1 or total == 0:
        return 0.0
    n = power.size
    m = n // factor
    csum = np.concatenate(([0.0], np.cumsum(np.concatenate((power, power[:m])))))
    window = csum[m:m + n] - csum[:n]
    return float(max(0.0, 1.0 - window.max() / total))


def fold_spectrum(bins: np.ndarray, factor: int) -> np.ndarray:
    """Spectrum of ``y[::factor]`` given the spectrum of ``y`` (last axis)."""
    if factor == 1:
        return bins
    n = bins.shape[-1]
    return bins.reshape(bins.shape[:-1] + (factor, n // factor)).sum(axis=-2) / factor


def convolve_subsampled(signal, filt: Spectrum, factor: int = 1,
                        check_aliasing: bool = True) -> ComplexSignal:
    """Circular convolution with a frequency-domain filter, kept every
    ``factor`` samples.

    ``signal`` may be a real/complex signal of the filter's length or an
    already transformed :class:`Spectrum`.  The decimation is done by folding
    the product spectrum, so the cost is one FFT of the input plus one short
    inverse FFT whatever ``factor`` is.
    """
    if not is_power_of_two(factor):
        raise ValueError(f"subsampling factor {factor} is not a power of two")
    n = len(filt)
    if n % factor:
        raise ValueError("factor must divide the filter length")
    spec = signal if isinstance(signal, Spectrum) else fft_forward(signal, n)
    if len(spec) != n:
        raise ValueError("signal and filter lengths differ")
    if check_aliasing:
        leak = folding_leak(filt.bins, factor)
        if leak > ALIASING_TOLERANCE:
            raise AliasingError(leak, factor)
    folded = fold_spectrum(spec.bins * filt.bins, factor)
    return ComplexSignal(np.fft.ifft(folded), spec.rate / factor)


def complex_modulus(signal: ComplexSignal) -> RealSignal:
    return RealSignal(np.abs(signal.samples), signal.rate)


def upsample_linear(frames: RealSignal, target_rate: float,
                    length: int | None = None, offset: float = 0.0) -> RealSignal:
    """Piecewise-linear interpolation of frame values (frame ``k`` at time
    ``k/frames.rate``) onto a dense grid ``offset + n/target_rate``.
    Values beyond the first and last frame are held constant."""
    if len(frames) < 2:
        raise ValueError("at least two frames are needed for interpolation")
    if length is None:
        length = int(round((len(frames) - 1) / frames.rate * target_rate)) + 1
    knots = np.arange(len(frames)) / frames.rate
    dense_t = offset + np.arange(length) / target_rate
    return RealSignal(np.interp(dense_t, knots, frames.samples), target_rate)


def lowpass_at(spectrum_bins: np.ndarray, lowpass_bins: np.ndarray, rate: float,
               start: float, hop: float, count: int) -> np.ndarray:
    """Evaluate the circular convolution of a signal with a symmetric low-pass
    filter at the uniform instants ``start + k*hop`` (seconds from sample 0).

    The product spectrum is band-limited, so only the bins where the low-pass
    is numerically non-zero enter a chirp-z transform; the cost stays
    O((B + count) log(B + count)) for B retained bins.
    """
    n = spectrum_bins.shape[-1]
    mag = np.abs(lowpass_bins)
    keep = np.nonzero(mag[: n // 2 + 1] > 1e-14 * mag.max())[0]
    half = int(keep.max()) if keep.size else 0
    half = min(half, n // 2 - 1) if n > 2 else 0
    idx = np.arange(-half, half + 1) % n
    product = spectrum_bins[..., idx] * lowpass_bins[idx]
    base = 2 * np.pi * rate / n
    # sum_j c_j exp(i*base*(j - half)*t_k) with t_k = start + k*hop
    shift = np.exp(1j * base * np.arange(2 * half + 1) * start)
    w = np.exp(1j * base * hop)
    vals = czt(product * shift, m=count, w=w, a=1.0, axis=-1)
    phase = np.exp(-1j * base * half * (start + hop * np.arange(count)))
    return np.real(vals * phase) / n
