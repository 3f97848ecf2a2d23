"""Filter banks and buffer geometry for analyzing signals of one length."""
from __future__ import annotations

import math
from functools import cached_property

from .errors import ConfigError, InvalidSpecError
from .filterbank import FilterBankSpec, build_filterbank, build_quefrency_bank
from .scalogram import hop_samples, lowpass_on_frames


def snap_T(T, sample_rate):
    """Round ``T`` (seconds) to the nearest power-of-two number of samples."""
    if not T > 0:
        raise InvalidSpecError(f"T must be positive, got {T!r}")
    n = T * sample_rate
    if n < 2:
        raise InvalidSpecError(f"T = {T:g} s is shorter than two samples")
    return 2 ** int(round(math.log2(n)))


def _next_pow2(n):
    return 1 << int(math.ceil(math.log2(max(n, 1))))


class ScatteringPlan:
    """Everything needed to scatter signals of ``n_samples`` samples.

    ``T`` is snapped to a power-of-two number of samples (see ``T_samples``).
    Banks are built lazily; the second-order and quefrency banks only when a
    transform asks for them.

    Parameters
    ----------
    n_samples : int
    sample_rate : float
    Q : int
        First-order wavelets per octave.
    T : float
        Averaging window in seconds.
    K : float or None
        Largest log-frequency scale in octaves (frequency and joint scattering).
    oversampling : int
        Scalogram hop is ``T / (2 * 2**oversampling)``.
    padding : {'reflect', 'periodic'}
        'periodic' requires ``n_samples`` to be a power of two.
    """

    def __init__(self, n_samples, sample_rate, Q=8, T=0.032, K=4, oversampling=2,
                 padding="reflect"):
        if n_samples < 1:
            raise ConfigError("n_samples must be >= 1")
        self.n_samples = int(n_samples)
        self.sample_rate = float(sample_rate)
        self.Q = Q
        self.T_samples = snap_T(T, sample_rate)
        self.T = self.T_samples / self.sample_rate
        self.K = K
        self.oversampling = oversampling
        self.padding = padding
        if padding == "periodic":
            if _next_pow2(n_samples) != n_samples:
                raise ConfigError("periodic padding needs a power-of-two signal length")
            if n_samples < self.T_samples:
                raise ConfigError("periodic padding needs a signal at least T long")
            self.n_fft = self.n_samples
        elif padding == "reflect":
            self.n_fft = _next_pow2(max(2 * self.n_samples, 2 * self.T_samples))
        else:
            raise ConfigError(f"unknown padding {padding!r}")
        self.hop = hop_samples(self.T_samples, oversampling)
        self.stride = 2 ** oversampling
        self.n_frames_padded = self.n_fft // self.hop
        self.n_frames = -(-self.n_samples // self.hop)
        self.n_frames_T = -(-self.n_samples // (self.T_samples // 2))

    def __repr__(self):
        return (f"ScatteringPlan(n_samples={self.n_samples}, sample_rate={self.sample_rate:g}, "
                f"Q={self.Q}, T={self.T:g}, K={self.K}, oversampling={self.oversampling}, "
                f"padding={self.padding!r})")

    @property
    def frame_rate(self):
        return self.sample_rate / self.hop

    @property
    def hop_seconds(self):
        return self.hop / self.sample_rate

    @cached_property
    def bank1(self):
        return build_filterbank(FilterBankSpec(self.sample_rate, self.Q, self.T, self.n_fft))

    @cached_property
    def bank2(self):
        """Second-order time wavelets (Q = 1) on the scalogram frame rate."""
        try:
            return build_filterbank(
                FilterBankSpec(self.frame_rate, 1, self.T, self.n_frames_padded))
        except InvalidSpecError as exc:
            raise InvalidSpecError(
                f"second-order bank impossible at oversampling={self.oversampling}: {exc}"
            ) from exc

    @cached_property
    def phi_frames(self):
        return lowpass_on_frames(self.n_frames_padded, self.hop_seconds, self.T)

    @property
    def n_bands(self):
        return len(self.bank1)

    @cached_property
    def qbank(self):
        if self.K is None:
            raise InvalidSpecError("K is required for frequency or joint scattering")
        return build_quefrency_bank(self.Q, self.K, self.n_bands)

    @cached_property
    def joint_wavelets(self):
        from .joint import build_joint_wavelets
        return build_joint_wavelets(self.Q, self.T, self.K, hop=self.hop_seconds,
                                    n_frames_padded=self.n_frames_padded,
                                    n_bands=self.n_bands)
