"""Wavelet-modulus cascade producing scattering coefficients of order 0..max_order."""
from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

from .filterbank import FilterBank, build_morlet_bank
from .signal import (RealSignal, fold_spectrum, folding_leak, lowpass_at,
                     next_power_of_two, pad_for_transform, ALIASING_TOLERANCE,
                     AliasingError)


@dataclass(frozen=True, order=True)
class ScatteringPath:
    """Frequency tuple ``(lambda_1, ..., lambda_m)`` in rad/s."""
    centers: tuple = ()

    @property
    def order(self) -> int:
        return len(self.centers)

    @property
    def hz(self) -> tuple:
        return tuple(c / (2 * math.pi) for c in self.centers)

    @property
    def parent(self) -> "ScatteringPath":
        return ScatteringPath(self.centers[:-1])

    def child(self, center) -> "ScatteringPath":
        return ScatteringPath(self.centers + (center,))


@dataclass(frozen=True)
class ScatteringConfig:
    T: float
    Q: tuple = (8, 1, 1)
    max_order: int = 2
    rate: float = 22050.0

    def __post_init__(self):
        if self.T <= 0:
            raise ValueError("T must be positive")
        if not 0 <= self.max_order <= 3:
            raise ValueError("max_order must be in 0..3")
        if any(q < 1 for q in self.Q):
            raise ValueError("Q must be >= 1 at every order")

    def q(self, order: int):
        """Wavelets per octave at ``order`` (1-based); 1 beyond the given tuple."""
        return self.Q[order - 1] if order - 1 < len(self.Q) else 1


@dataclass
class LayerEnergy:
    """Energies (continuous-time squared norms) measured at one cascade layer."""
    order: int
    U: float = 0.0            # ||U_m x||^2 from the stored samples
    S: float = 0.0            # ||S_m x||^2 = ||U_m x * phi||^2 (Parseval, exact)
    children: float = 0.0     # ||U_{m+1} x||^2 over every next-order wavelet
    retained: float = 0.0     # part of `children` kept by the path rule
    alpha: float = 0.0


@dataclass
class ScatteringTransform:
    times: np.ndarray
    paths: list
    values: np.ndarray        # (n_paths, n_frames)
    config: ScatteringConfig
    size: int
    offset: float             # seconds from padded sample 0 to original sample 0
    layers: list = field(default_factory=list)
    energy_input: float | None = None
    envelopes: dict | None = None

    def __post_init__(self):
        self._index = {p: i for i, p in enumerate(self.paths)}

    @property
    def hop(self) -> float:
        return self.config.T / 2

    @property
    def max_order(self) -> int:
        return self.config.max_order

    def __getitem__(self, path) -> np.ndarray:
        if not isinstance(path, ScatteringPath):
            path = ScatteringPath(tuple(path))
        return self.values[self._index[path]]

    def __contains__(self, path) -> bool:
        return path in self._index

    def order_paths(self, m: int) -> list:
        return [p for p in self.paths if p.order == m]

    def order_values(self, m: int) -> np.ndarray:
        idx = [i for i, p in enumerate(self.paths) if p.order == m]
        return self.values[idx]

    def path_counts(self) -> dict:
        counts = defaultdict(int)
        for p in self.paths:
            counts[p.order] += 1
        return dict(counts)

    def norm(self, orders=None) -> float:
        """Frame-sampled norm ``sqrt(sum_k S(kT/2)^2 * T/2)``."""
        if orders is None:
            vals = self.values
        else:
            vals = self.values[[i for i, p in enumerate(self.paths) if p.order in orders]]
        return float(np.sqrt(np.sum(vals ** 2) * self.hop))

    @property
    def residual_energy(self) -> float | None:
        if not self.layers:
            return None
        return self.layers[-1].children


def default_banks(config: ScatteringConfig, length: int, extra_order: bool = True):
    """Banks for orders ``1..max_order`` (+1 for residual tracking) on a grid
    padded to the next power of two at least ``length + T*rate`` long."""
    size = next_power_of_two(length + int(math.ceil(config.T * config.rate)))
    n = config.max_order + (1 if extra_order else 0)
    return [build_morlet_bank(config.q(m), config.T, config.rate, size) for m in range(1, n + 1)]


def wavelet_modulus(u: RealSignal, bank: FilterBank, subsample: bool = True):
    """``|W| u``: the low-pass ``u*phi`` and every envelope ``|u*psi_lambda|``.

    The input is used as one period of a circular signal; ``len(u)`` must be
    a power of two.  Envelopes are decimated by each wavelet's
    ``max_subsample`` (relative to ``bank.rate``) when ``subsample`` is set.
    """
    n, r = len(u), u.rate
    U = np.fft.fft(u.samples)
    low = RealSignal(np.fft.ifft(U * bank.phi_hat(n, r)).real, r)
    envelopes = {}
    psi = bank.psi_hat(n, r)
    for j, w in enumerate(bank.wavelets):
        f = _factor(w, bank, r, n) if subsample else 1
        y = np.fft.ifft(fold_spectrum(U * psi[j], f))
        envelopes[w.center] = RealSignal(np.abs(y), r / f)
    return low, envelopes


def _factor(wavelet, bank, rate_u, n):
    """Decimation from a signal at ``rate_u`` down to the wavelet's own rate."""
    target = bank.rate / wavelet.max_subsample
    f = 1
    while rate_u / (2 * f) >= target * (1 - 1e-9) and 2 * f <= n:
        f *= 2
    return f


def scatter(x: RealSignal, banks, max_order: int = 2, keep_envelopes: bool = False,
            track_energy: bool = False, pad_mode: str = "reflect") -> ScatteringTransform:
    """Scattering transform of ``x`` up to ``max_order``.

    ``banks[m-1]`` is the wavelet bank of order ``m``; all banks share T, rate
    and grid size.  Paths obey ``lambda_{k+1} <= max(lambda_k/Q_k, 2*pi/T)``.
    Coefficients are returned on frames ``t = k*T/2`` covering the input.
    With ``track_energy`` one extra bank (order ``max_order+1``) is used to
    measure the residual ``||U_{max_order+1} x||^2`` without materialising it.
    """
    if max_order < 0:
        raise ValueError("max_order must be >= 0")
    need = max_order + (1 if track_energy else 0)
    if len(banks) < max(need, 1):
        raise ValueError(f"{need} banks required, got {len(banks)}")
    ref = banks[0]
    for b in banks[1:]:
        if (b.T, b.rate, b.size) != (ref.T, ref.rate, ref.size):
            raise ValueError("all banks must share T, rate and size")
    if abs(x.rate - ref.rate) > 1e-9 * ref.rate:
        raise ValueError(f"signal rate {x.rate} differs from bank rate {ref.rate}")
    T, rate, size = ref.T, ref.rate, ref.size
    config = ScatteringConfig(T, tuple(b.Q for b in banks[:max(max_order, 1)]), max_order, rate)

    xp, unpad = pad_for_transform(x, size, mode=pad_mode, center=True)
    offset = unpad.start / rate
    hop = T / 2
    n_frames = int(math.floor((len(x) - 1) / rate / hop + 1e-9)) + 1
    times = np.arange(n_frames) * hop

    out_paths, out_values = [], []
    layers = []
    envelopes = {} if keep_envelopes else None
    current = [(ScatteringPath(), xp.samples, rate)]
    low_freq_floor = 2 * math.pi / T

    for m in range(max_order + 1):
        layer = LayerEnergy(order=m)
        nxt = []
        groups = defaultdict(list)
        for item in current:
            groups[(len(item[1]), item[2])].append(item)
        for (n, r_u), items in groups.items():
            Uh = np.fft.fft(np.stack([u for _, u, _ in items]), axis=-1)
            phi = ref.phi_hat(n, r_u)
            S = lowpass_at(Uh, phi, r_u, offset, hop, n_frames)
            for (path, u, _), s in zip(items, S):
                out_paths.append(path)
                out_values.append(np.maximum(s, 0.0) if m > 0 else s)
                if keep_envelopes and m > 0:
                    envelopes[path] = RealSignal(u, r_u)
            if track_energy:
                P = np.abs(Uh) ** 2
                layer.U += float(sum(np.sum(u ** 2) for _, u, _ in items) / r_u)
                layer.S += float(np.sum(P @ (phi ** 2)) / n / r_u)
            if m == max_order and not track_energy:
                continue
            bank = banks[m]
            psi = bank.psi_hat(n, r_u)
            if track_energy:
                child_e = P @ (np.abs(psi) ** 2).T / n / r_u      # (parents, wavelets)
                layer.children += float(child_e.sum())
                layer.alpha = max(layer.alpha, bank.alpha)
            if m == max_order:
                continue
            q_prev = banks[m - 1].Q if m > 0 else None
            factors = [_factor(w, bank, r_u, n) for w in bank.wavelets]
            for j, f in enumerate(factors):
                if f > 1:
                    leak = bank.leak(j, f, n, r_u)
                    if leak > ALIASING_TOLERANCE:
                        raise AliasingError(leak, f)
            for j, w in enumerate(bank.wavelets):
                # every admissible parent of this group in one batched FFT
                sel = [i for i, (path, _, _) in enumerate(items)
                       if m == 0 or w.center <= max(path.centers[-1] / q_prev, low_freq_floor) * (1 + 1e-12)]
                if not sel:
                    continue
                f = factors[j]
                Y = np.abs(np.fft.ifft(fold_spectrum(Uh[sel] * psi[j], f), axis=-1))
                for i, y in zip(sel, Y):
                    nxt.append((items[i][0].child(w.center), y, r_u / f))
                    if track_energy:
                        layer.retained += float(child_e[i, j])
        layers.append(layer)
        current = nxt

    order = sorted(range(len(out_paths)), key=lambda i: (out_paths[i].order, out_paths[i].centers))
    st = ScatteringTransform(
        times=times,
        paths=[out_paths[i] for i in order],
        values=np.array([out_values[i] for i in order]),
        config=config, size=size, offset=offset,
        layers=layers if track_energy else [],
        energy_input=xp.energy() if track_energy else None,
        envelopes=envelopes,
    )
    return st


def scattering(x: RealSignal, T: float, Q=(8, 1, 1), max_order: int = 2, **kwargs):
    """Convenience wrapper building default banks for ``x`` and calling :func:`scatter`."""
    config = ScatteringConfig(T, tuple(Q), max_order, x.rate)
    banks = default_banks(config, len(x), extra_order=kwargs.get("track_energy", False))
    return scatter(x, banks, max_order, **kwargs)


def energy_decomposition(st: ScatteringTransform, x: RealSignal | None = None) -> dict:
    """Ratios ``||S_m x||^2/||x||^2`` per order plus the residual ratio.

    Energies are measured on the padded, periodised input that the cascade
    actually transforms, so the ratios obey the exact norm cascade.
    """
    if not st.layers or st.energy_input is None:
        raise ValueError("scatter must run with track_energy=True")
    total = st.energy_input
    if not total > 0:
        raise ValueError("energy ratios are undefined for a zero signal")
    ratios = {m: layer.S / total for m, layer in enumerate(st.layers)}
    residual = st.layers[-1].children / total
    pruned = sum(layer.children - layer.retained for layer in st.layers[:-1]) / total
    return {"orders": ratios, "residual": residual, "pruned": pruned,
            "total": sum(ratios.values()) + residual}


def _distance(a: ScatteringTransform, b: ScatteringTransform) -> float:
    if a.paths != b.paths:
        raise ValueError("transforms have different path sets")
    return float(np.sqrt(np.sum((a.values - b.values) ** 2) * a.hop))


def shift_stability_probe(x: RealSignal, c: float, banks, max_order: int = 2) -> float:
    """``||S x_c - S x|| / ||x||`` for the circular delay ``x_c(t) = x(t - c)``."""
    T = banks[0].T
    if abs(c) >= T:
        raise ValueError("shift must be smaller than T")
    if c == 0:
        return 0.0
    n = len(x)
    omega = 2 * np.pi * np.fft.fftfreq(n, 1 / x.rate)
    shifted = np.fft.ifft(np.fft.fft(x.samples) * np.exp(-1j * omega * c)).real
    s0 = scatter(x, banks, max_order)
    s1 = scatter(RealSignal(shifted, x.rate), banks, max_order)
    return _distance(s0, s1) / math.sqrt(x.energy())


def dilate(x: RealSignal, eps: float, center: float | None = None) -> RealSignal:
    """``x(t_c + (1-eps)(t - t_c))`` evaluated exactly on the band-limited
    periodic interpolant of ``x`` (the Nyquist bin, whose dilation is
    ambiguous, is dropped).  Best used on clips tapered at both ends."""
    n = len(x)
    t_c = (n / 2) / x.rate if center is None else center
    flat = np.ones(n)
    samples = lowpass_at(np.fft.fft(x.samples), flat, x.rate, eps * t_c, (1 - eps) / x.rate, n)
    return RealSignal(samples, x.rate)


def warp_stability_probe(x: RealSignal, eps: float, banks, max_order: int = 2) -> float:
    """``||S x_tau - S x|| / ||x||`` for the dilation ``tau(t) = eps (t - t_c)``."""
    if not 0 <= eps < 1:
        raise ValueError("eps must be in [0, 1)")
    if eps == 0:
        return 0.0
    s0 = scatter(x, banks, max_order)
    s1 = scatter(dilate(x, eps), banks, max_order)
    return _distance(s0, s1) / math.sqrt(x.energy())


def fourier_modulus_distance(x: RealSignal, eps: float) -> float:
    """Same probe for the baseline representation ``|x_hat|`` (Plancherel-normalised)."""
    if eps == 0:
        return 0.0
    a = np.abs(np.fft.rfft(x.samples))
    b = np.abs(np.fft.rfft(dilate(x, eps).samples))
    w = np.full(a.size, 2.0)
    w[0] = 1.0
    if len(x) % 2 == 0:
        w[-1] = 1.0
    d2 = np.sum(w * (a - b) ** 2) / len(x) / x.rate
    return float(math.sqrt(d2 / x.energy()))
