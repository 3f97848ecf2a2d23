"""Wavelet transform, scalogram and first-order scattering."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _ops
from .errors import ConfigError, DataError
from .filterbank import FilterBank, angular_grid, lowpass_hat

__all__ = ["Signal", "Scalogram", "S1Coeffs", "as_signal", "wavelet_transform",
           "scalogram", "s1", "antialias_hat"]


@dataclass(frozen=True)
class Signal:
    """Uniformly sampled real waveform."""

    samples: np.ndarray
    sample_rate: float

    def __post_init__(self):
        x = np.asarray(self.samples, dtype=float)
        if x.ndim != 1 or x.size < 1:
            raise DataError(f"signal must be a non-empty 1-D array, got shape {x.shape}")
        if not np.all(np.isfinite(x)):
            raise DataError("signal contains non-finite samples")
        if not self.sample_rate > 0:
            raise DataError(f"sample_rate must be positive, got {self.sample_rate!r}")
        object.__setattr__(self, "samples", x)

    def __len__(self):
        return self.samples.size

    @property
    def duration(self):
        return self.samples.size / self.sample_rate


def as_signal(x, sample_rate=None):
    if isinstance(x, Signal):
        return x
    if sample_rate is None:
        raise ConfigError("sample_rate is required when passing a bare array")
    return Signal(x, sample_rate)


@dataclass(frozen=True)
class Scalogram:
    """Scalogram frames ``values[frame, band]`` with bands in descending frequency.

    ``padded`` keeps the full periodic frame buffer (signal plus symmetric
    extension) that downstream time filtering runs on.
    """

    values: np.ndarray
    hop: float
    band_log_centers: np.ndarray
    source_T: float
    n_samples: int
    sample_rate: float
    padded: np.ndarray = field(repr=False)

    @property
    def n_frames(self):
        return self.values.shape[0]

    @property
    def n_bands(self):
        return self.values.shape[1]

    @property
    def hop_samples(self):
        return int(round(self.hop * self.sample_rate))


@dataclass(frozen=True)
class S1Coeffs:
    values: np.ndarray
    hop: float
    band_log_centers: np.ndarray


def _check_rate(x, bank):
    if not math.isclose(x.sample_rate, bank.spec.sample_rate, rel_tol=1e-12):
        raise ConfigError(f"signal sample rate {x.sample_rate:g} Hz does not match "
                          f"filter bank sample rate {bank.spec.sample_rate:g} Hz")


def _padded_spectrum(x: Signal, n_fft, padding):
    idx = _ops.pad_index(len(x), n_fft, padding)
    return _ops.fft(x.samples[idx])


def wavelet_transform(x, bank: FilterBank, padding="reflect"):
    """Complex wavelet coefficients at every input sample, ``(n_samples, n_bands)``.

    Column ``k`` is the convolution ``x * psi_k`` with ``psi_k = ifft(psi_hat_k)``.
    """
    x = as_signal(x, bank.spec.sample_rate)
    _check_rate(x, bank)
    X = _padded_spectrum(x, bank.spec.n_fft, padding)
    return _ops.conv_subsample(X, bank.responses())[: len(x)]


def hop_samples(T_samples, oversampling):
    if oversampling < 0 or int(oversampling) != oversampling:
        raise ConfigError(f"oversampling must be a nonnegative integer, got {oversampling!r}")
    hop = T_samples / (2 * 2 ** oversampling)
    if hop < 1 or hop != int(hop):
        raise ConfigError(f"T = {T_samples} samples cannot be split into hops of "
                          f"T/{2 * 2 ** oversampling}")
    return int(hop)


def antialias_hat(n_fft, hop, rolloff=0.25):
    """Real low-pass on a length-``n_fft`` grid that vanishes at and above the
    Nyquist frequency of a ``hop``-sample frame grid.

    Flat up to ``(1 - rolloff)`` of that Nyquist, then a raised-cosine taper.
    """
    f = np.abs(np.fft.fftfreq(n_fft)) * 2 * hop
    lo = 1.0 - rolloff
    taper = 0.5 * (1 + np.cos(np.pi * np.clip((f - lo) / rolloff, 0.0, 1.0)))
    return np.where(f < lo, 1.0, taper) * (f < 1.0)


def scalogram(x, bank: FilterBank, oversampling=2, padding="reflect") -> Scalogram:
    """``|x * psi_lambda|`` sampled every ``T / (2 * 2**oversampling)``.

    The modulus is computed at the input rate and band-limited by
    :func:`antialias_hat` before decimation, so that envelope content above
    the frame Nyquist frequency does not fold back.
    """
    x = as_signal(x, bank.spec.sample_rate)
    _check_rate(x, bank)
    T_samples = bank.spec.T * x.sample_rate
    if abs(T_samples - round(T_samples)) > 1e-6:
        raise ConfigError(f"T * sample_rate = {T_samples:g} is not an integer number of samples")
    hop = hop_samples(int(round(T_samples)), oversampling)
    n_fft = bank.spec.n_fft
    if n_fft % hop:
        raise ConfigError(f"hop of {hop} samples does not divide n_fft={n_fft}")
    X = _padded_spectrum(x, n_fft, padding)
    A = np.abs(_ops.conv_subsample(X, bank.responses()))
    U = _ops.lowpass_decimate(A, antialias_hat(n_fft, hop), hop)
    n_frames = -(-len(x) // hop)
    return Scalogram(values=np.maximum(U[:n_frames], 0.0), hop=hop / x.sample_rate,
                     band_log_centers=np.log2(bank.centers / (2 * np.pi)),
                     source_T=bank.spec.T, n_samples=len(x), sample_rate=x.sample_rate,
                     padded=U)


def averaging_stride(scal: Scalogram, T):
    """Scalogram frames per averaged frame (hop ``T/2``)."""
    ratio = (T / 2) / scal.hop
    if ratio < 1 or abs(ratio - round(ratio)) > 1e-9:
        raise ConfigError(f"scalogram hop {scal.hop:g} s does not divide T/2 = {T / 2:g} s")
    return int(round(ratio))


def lowpass_on_frames(n_frames_padded, hop, T):
    return lowpass_hat(angular_grid(n_frames_padded, 1.0 / hop), T)


def n_averaged_frames(n_samples, T_samples):
    half = int(round(T_samples)) // 2
    return -(-n_samples // half)


def s1(scal: Scalogram, bank: FilterBank) -> S1Coeffs:
    """Average each band with ``phi_T`` and subsample to hop ``T/2``."""
    T = bank.spec.T
    stride = averaging_stride(scal, T)
    phi = lowpass_on_frames(scal.padded.shape[0], scal.hop, T)
    S = _ops.conv_subsample(_ops.fft(scal.padded), phi, stride).real
    n = n_averaged_frames(scal.n_samples, T * scal.sample_rate)
    return S1Coeffs(S[:n], T / 2, scal.band_log_centers)
