"""Normalized scattering and its logarithm."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .filterbank import gaussian_lowpass_hat
from .signal import RealSignal, angular_grid, lowpass_at, pad_for_transform
from .scattering import ScatteringPath, ScatteringTransform


@dataclass
class NormalizedScattering:
    """Orders >= 1 of a scattering transform, each divided by its parent.

    Order one is divided by ``|x| * phi_norm + epsilon``; order ``m >= 2`` by
    the order ``m-1`` coefficient sharing its prefix, plus ``epsilon``.
    """
    times: np.ndarray
    paths: list
    values: np.ndarray
    epsilon: float
    norm_window: float
    config: object
    log_floor: dict | None = None     # set once the logarithm has been taken

    def __post_init__(self):
        self._index = {p: i for i, p in enumerate(self.paths)}

    def __getitem__(self, path):
        if not isinstance(path, ScatteringPath):
            path = ScatteringPath(tuple(path))
        return self.values[self._index[path]]

    def __contains__(self, path):
        return path in self._index

    @property
    def is_log(self) -> bool:
        return self.log_floor is not None

    def order_paths(self, m):
        return [p for p in self.paths if p.order == m]

    def order_values(self, m):
        return self.values[[i for i, p in enumerate(self.paths) if p.order == m]]


def envelope_average(st: ScatteringTransform, x: RealSignal, window: float) -> np.ndarray:
    """``|x| * phi_window`` on the frames of ``st``, padded the same way."""
    xp, _ = pad_for_transform(x, st.size, center=True)
    spec = np.fft.fft(np.abs(xp.samples))
    phi = gaussian_lowpass_hat(angular_grid(st.size, x.rate), window)
    return np.maximum(lowpass_at(spec, phi, x.rate, st.offset, st.hop, len(st.times)), 0.0)


def _safe_divide(num, den):
    out = np.zeros_like(num)
    np.divide(num, den, out=out, where=den > 0)
    return out


def normalize(st: ScatteringTransform, x: RealSignal, epsilon: float | None = None,
              norm_window: float | None = None) -> NormalizedScattering:
    if abs(x.rate - st.config.rate) > 1e-9 * st.config.rate:
        raise ValueError("signal rate does not match the transform")
    n_frames = int(np.floor((len(x) - 1) / x.rate / st.hop + 1e-9)) + 1
    if n_frames != len(st.times) or st.size < len(x):
        raise ValueError("transform was not computed from a signal of this length")
    window = st.config.T if norm_window is None else norm_window
    if window <= 0:
        raise ValueError("norm_window must be positive")
    denom1 = envelope_average(st, x, window)
    if epsilon is None:
        epsilon = 1e-6 * float(np.median(denom1))
    if epsilon < 0:
        raise ValueError("epsilon must be nonnegative")

    paths, values = [], []
    for p in st.paths:
        if p.order == 0:
            continue
        den = denom1 if p.order == 1 else st[p.parent]
        paths.append(p)
        values.append(_safe_divide(st[p], den + epsilon))
    return NormalizedScattering(st.times, paths, np.array(values).reshape(len(paths), -1),
                                float(epsilon), float(window), st.config)


def log_scattering(ns: NormalizedScattering, floor: float | dict | None = None) -> NormalizedScattering:
    """``log(S~ + floor)``; the default floor is 1e-6 times each order's median."""
    if ns.is_log:
        raise ValueError("coefficients are already logarithmic")
    orders = sorted({p.order for p in ns.paths})
    floors = {}
    for m in orders:
        if isinstance(floor, dict):
            floors[m] = float(floor[m])
        elif floor is not None:
            floors[m] = float(floor)
        else:
            vals = ns.order_values(m)
            ref = float(np.median(vals)) or float(vals.max())
            floors[m] = 1e-6 * ref if ref > 0 else 1e-12
        if not floors[m] > 0:
            raise ValueError("log floor must be positive")
    out = np.empty_like(ns.values)
    for i, p in enumerate(ns.paths):
        out[i] = np.log(ns.values[i] + floors[p.order])
    return NormalizedScattering(ns.times, ns.paths, out, ns.epsilon, ns.norm_window,
                                ns.config, log_floor=floors)
