"""Analytic Morlet filter banks on the time axis and on the log-frequency axis.

All filters are stored as dense real-valued frequency responses sampled on the
``n_fft`` grid of :func:`numpy.fft.fftfreq`. Convolution with a filter is a
pointwise product in the Fourier domain (periodic convolution).

Band-pass filters are one-sided: their response is exactly zero for
non-positive frequencies (the Nyquist bin of an even grid counts as negative),
which makes them analytic by construction. A Gaussian correction term cancels
the response at zero frequency so that every band-pass filter has zero mean.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .errors import InvalidSpecError

__all__ = [
    "FilterBankSpec",
    "AnalyticFilter",
    "FilterBank",
    "morlet_hat",
    "lowpass_hat",
    "relative_sigma",
    "build_mother_wavelet",
    "build_filterbank",
    "build_quefrency_bank",
    "littlewood_paley",
    "covered_band",
    "angular_grid",
]

LN2 = math.log(2.0)


def _is_pow2(n):
    return isinstance(n, (int, np.integer)) and n >= 1 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class FilterBankSpec:
    """Geometry of a 1-D filter bank.

    Parameters
    ----------
    sample_rate : float
        Samples per second on the time axis. On the quefrency axis this is the
        number of log-frequency bins per octave.
    Q : int
        Wavelets per octave.
    T : float
        Invariance window: seconds on the time axis, octaves on the
        quefrency axis.
    n_fft : int
        Transform length, a power of two.
    axis : {'time', 'quefrency'}
    """

    sample_rate: float
    Q: int
    T: float
    n_fft: int
    axis: Literal["time", "quefrency"] = "time"

    def __post_init__(self):
        if not isinstance(self.Q, (int, np.integer)) or self.Q < 1:
            raise InvalidSpecError(f"Q must be an integer >= 1, got {self.Q!r}")
        if not self.T > 0:
            raise InvalidSpecError(f"T must be positive, got {self.T!r}")
        if not self.sample_rate > 0:
            raise InvalidSpecError(f"sample_rate must be positive, got {self.sample_rate!r}")
        if not _is_pow2(self.n_fft):
            raise InvalidSpecError(f"n_fft must be a power of two, got {self.n_fft!r}")
        if self.T * self.sample_rate > self.n_fft * (1 + 1e-12):
            raise InvalidSpecError(
                f"n_fft={self.n_fft} too short for T*sample_rate={self.T * self.sample_rate:g}")
        if self.axis not in ("time", "quefrency"):
            raise InvalidSpecError(f"unknown axis {self.axis!r}")

    @property
    def nyquist(self):
        """Nyquist frequency in angular units (rad/s or rad/octave)."""
        return math.pi * self.sample_rate


@dataclass(frozen=True)
class AnalyticFilter:
    """One filter of a bank.

    ``center`` and ``bandwidth`` are in rad/s on the time axis and in cycles
    per octave on the quefrency axis. ``bandwidth`` is the full width at half
    power.
    """

    center: float
    bandwidth: float
    response: np.ndarray = field(repr=False)
    kind: Literal["geometric", "linear_lowband", "lowpass"] = "geometric"

    def time_domain(self):
        return np.fft.ifft(self.response)


@dataclass(frozen=True)
class FilterBank:
    spec: FilterBankSpec
    filters: tuple
    lowpass: AnalyticFilter

    @property
    def log_centers(self):
        return np.log2([f.center for f in self.filters])

    @property
    def centers(self):
        return np.array([f.center for f in self.filters])

    def responses(self):
        """Band-pass responses stacked as an ``(n_fft, n_filters)`` array."""
        if not self.filters:
            return np.zeros((self.spec.n_fft, 0))
        return np.stack([f.response for f in self.filters], axis=1)

    def __len__(self):
        return len(self.filters)

    def response_at(self, omega, index=None):
        """Band-pass responses at arbitrary frequencies.

        Linear interpolation between FFT bins; frequencies are in rad/s (time
        axis) or rad per octave (quefrency axis). With ``index`` given, returns
        that filter's response with the shape of ``omega``; otherwise an array
        of shape ``omega.shape + (n_filters,)``.
        """
        grid = np.fft.fftshift(angular_grid(self.spec.n_fft, self.spec.sample_rate))
        omega = np.asarray(omega, dtype=float)
        picks = range(len(self.filters)) if index is None else [index]
        out = []
        for i in picks:
            r = np.fft.fftshift(self.filters[i].response)
            out.append(np.interp(omega, grid, r.real) + 1j * np.interp(omega, grid, r.imag))
        return out[0] if index is not None else np.stack(out, axis=-1)


def angular_grid(n_fft, sample_rate):
    """Angular frequencies of the FFT bins, in rad per unit of the axis."""
    return 2 * np.pi * sample_rate * np.fft.fftfreq(n_fft)


def relative_sigma(Q):
    """Gaussian width (relative to the center) whose half-power band is
    ``[1 - (2**(1/(2Q)) - 1), 1 + (2**(1/(2Q)) - 1)]``."""
    half_width = 2 ** (1 / (2 * Q)) - 1
    return half_width / math.sqrt(LN2)


def morlet_hat(omega, center, sigma):
    """Frequency response of a one-sided Morlet filter.

    ``sigma`` is the absolute Gaussian width in the units of ``omega``. The
    low-frequency correction makes the response vanish at ``omega = 0``; it is
    nonnegative for every positive frequency.
    """
    omega = np.asarray(omega, dtype=float)
    gabor = np.exp(-((omega - center) ** 2) / (2 * sigma ** 2))
    corr = math.exp(-(center ** 2) / (2 * sigma ** 2)) * np.exp(-(omega ** 2) / (2 * sigma ** 2))
    return np.where(omega > 0, gabor - corr, 0.0)


def lowpass_hat(omega, T):
    """Gaussian low-pass whose time-domain half-power width equals ``T``."""
    s = T / (2 * math.sqrt(LN2))
    return np.exp(-((np.asarray(omega, dtype=float) * s) ** 2) / 2)


def build_mother_wavelet(Q, n_fft=1024):
    """Unit-center prototype sampled on an angular grid spanning ``[-4, 4)``."""
    if not isinstance(Q, (int, np.integer)) or Q < 1:
        raise InvalidSpecError(f"Q must be an integer >= 1, got {Q!r}")
    omega = 8.0 * np.fft.fftfreq(n_fft)
    sigma = relative_sigma(Q)
    resp = morlet_hat(omega, 1.0, sigma)
    return AnalyticFilter(1.0, 2 * sigma * math.sqrt(LN2), resp, "geometric")


def _normalize(spec, bands, lowpass):
    """Scale band-pass responses so that the Littlewood-Paley sum peaks at 1."""
    if not bands:
        return bands
    resp = np.stack([b.response for b in bands], axis=1)
    power = 0.5 * ((resp ** 2).sum(axis=1) + (resp[_negate_index(spec.n_fft)] ** 2).sum(axis=1))
    room = 1.0 - lowpass.response ** 2
    mask = power > 1e-12 * power.max()
    scale = math.sqrt(np.min(room[mask] / power[mask]))
    return [AnalyticFilter(b.center, b.bandwidth, b.response * scale, b.kind) for b in bands]


def _negate_index(n):
    return (-np.arange(n)) % n


def _geometric_centers(top, bottom, ratio):
    centers = []
    c = top
    while c >= bottom * (1 - 1e-12):
        centers.append(c)
        c = c * ratio
    return centers


def build_filterbank(spec: FilterBankSpec) -> FilterBank:
    """Time-axis bank: Q geometric wavelets per octave above ``2*pi*Q/T`` and
    linearly spaced filters of bandwidth ``2*pi/T`` below it.

    The top center sits half a filter below Nyquist so that its upper
    half-power edge coincides with Nyquist.
    """
    if spec.axis != "time":
        raise InvalidSpecError("build_filterbank expects a time-axis spec; "
                               "use build_quefrency_bank for the log-frequency axis")
    Q, T = spec.Q, spec.T
    omega = angular_grid(spec.n_fft, spec.sample_rate)
    nyq = spec.nyquist
    top = nyq * 2 ** (-1 / (2 * Q))
    threshold = 2 * np.pi * Q / T
    if top < threshold:
        raise InvalidSpecError(
            f"Nyquist {nyq / (2 * np.pi):g} Hz leaves no room for a wavelet above "
            f"2*pi*Q/T = {threshold / (2 * np.pi):g} Hz")
    sig_rel = relative_sigma(Q)
    ratio = 2 ** (-1 / Q)
    centers = _geometric_centers(top, threshold, ratio)
    bands = [AnalyticFilter(c, 2 * sig_rel * math.sqrt(LN2) * c,
                            morlet_hat(omega, c, sig_rel * c), "geometric")
             for c in centers]

    step = 2 * np.pi / T
    sig_lin = (step / 2) / math.sqrt(LN2)
    lowest = centers[-1]
    top_lin = lowest - (sig_rel * math.sqrt(LN2) * lowest + step / 2)
    if top_lin >= step:
        # evenly spaced from 2*pi/T up to the geometric region's lower edge, spacing <= 2*pi/T
        n_lin = int(math.ceil((top_lin - step) / step - 1e-9)) + 1
        for c in np.linspace(top_lin, step, n_lin):
            bands.append(AnalyticFilter(float(c), step, morlet_hat(omega, c, sig_lin),
                                        "linear_lowband"))

    phi = AnalyticFilter(0.0, 2 * LN2 / T, lowpass_hat(omega, T), "lowpass")
    return FilterBank(spec, tuple(_normalize(spec, bands, phi)), phi)


def build_quefrency_bank(bins_per_octave, K, n_bins, n_fft=None) -> FilterBank:
    """Wavelets along log-frequency, one per octave of quefrency.

    Centers are powers of two, from the largest one strictly below the axis
    Nyquist (``bins_per_octave / 2`` cycles per octave) down to ``1 / (2K)``.
    The low-pass spans ``K`` octaves.

    Parameters
    ----------
    bins_per_octave : int
        Sampling density of the log-frequency axis (the first-order ``Q``).
    K : float
        Largest log-frequency scale, in octaves.
    n_bins : int
        Length of the log-frequency axis being analyzed.
    n_fft : int, optional
        Defaults to the smallest power of two >= ``2 * n_bins``.
    """
    if K is None or not K >= 1:
        raise InvalidSpecError(f"K must be >= 1 octave, got {K!r}")
    if K * bins_per_octave > n_bins:
        raise InvalidSpecError(
            f"K={K} octaves exceeds the log-frequency axis span of "
            f"{n_bins / bins_per_octave:g} octaves")
    if n_fft is None:
        n_fft = 1 << int(math.ceil(math.log2(max(2 * n_bins, 2))))
    spec = FilterBankSpec(bins_per_octave, 1, K, n_fft, axis="quefrency")
    omega = angular_grid(n_fft, bins_per_octave)
    sig_rel = relative_sigma(1)
    top = 2.0 ** (math.ceil(math.log2(bins_per_octave / 2)) - 1)
    betas = _geometric_centers(top, 1 / (2 * K), 0.5)
    if not betas:
        raise InvalidSpecError(f"no quefrency wavelet fits for K={K}")
    bands = [AnalyticFilter(b, 2 * sig_rel * math.sqrt(LN2) * b,
                            morlet_hat(omega, 2 * np.pi * b, sig_rel * 2 * np.pi * b))
             for b in betas]
    phi = AnalyticFilter(0.0, 2 * LN2 / K / (2 * np.pi), lowpass_hat(omega, K), "lowpass")
    return FilterBank(spec, tuple(_normalize(spec, bands, phi)), phi)


def littlewood_paley(bank: FilterBank) -> np.ndarray:
    """``|phi(w)|^2 + 1/2 sum_k (|psi_k(w)|^2 + |psi_k(-w)|^2)`` on the FFT grid."""
    out = np.abs(bank.lowpass.response) ** 2
    if bank.filters:
        resp = bank.responses()
        neg = _negate_index(bank.spec.n_fft)
        out = out + 0.5 * ((np.abs(resp) ** 2).sum(axis=1) + (np.abs(resp[neg]) ** 2).sum(axis=1))
    return out


def covered_band(bank: FilterBank):
    """Angular frequency interval over which the bank is a near-tight frame.

    The interval runs from the lowest band-pass center (``2*pi/T`` for banks
    with a linear low band) to the second-highest center, capped at
    ``0.8 * Nyquist`` on the time axis. The top filter has no upper neighbour
    to overlap with, so the region around it is excluded.
    """
    spec = bank.spec
    centers = sorted(f.center for f in bank.filters)
    upper = centers[-2] if len(centers) > 1 else centers[-1]
    if spec.axis == "quefrency":
        return 2 * np.pi * centers[0], 2 * np.pi * upper
    return centers[0], min(upper, 0.8 * spec.nyquist)
