"""Analytic signal models and their closed-form scattering predictions.

Two generative models: a harmonic excitation shaped by a time-varying filter,
and a harmonic excitation of varying pitch. Each comes with predictions of
first-order coefficients and of where joint coefficients concentrate. The
predictions are evaluated directly (time-domain convolutions, Gaussian
smoothing) and share only the filter responses with the scattering code.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import ndimage

from .errors import ConfigError, DataError
from .filterbank import FilterBank
from .scalogram import S1Coeffs, Signal

__all__ = ["GaussianFormant", "SigmoidFormant", "FlatFilter", "HarmonicTVFilterModel",
           "ExponentialChirp", "Vibrato", "FMModel", "FMPrediction", "gen_tv_filtered",
           "tv_admissible_bands", "predict_s1_tv", "predict_s2_joint_tv", "gen_fm",
           "predict_fm", "chirp_texture", "BETA_SMALL"]

BETA_SMALL = 0.5
TWO_PI = 2 * np.pi


# ---------------------------------------------------------------------------
# time-varying filters h_hat(t, omega)

@dataclass(frozen=True)
class GaussianFormant:
    """Gaussian resonance whose center oscillates sinusoidally.

    ``h_hat(t, w) = exp(-(w/2pi - f_c(t))^2 / (2 width^2))`` with
    ``f_c(t) = center + depth * sin(2 pi rate t + phase)``, all in Hz.
    """

    center_hz: float = 1500.0
    depth_hz: float = 500.0
    rate_hz: float = 3.0
    width_hz: float = 300.0
    phase: float = 0.0

    def center(self, t):
        return self.center_hz + self.depth_hz * np.sin(TWO_PI * self.rate_hz * np.asarray(t)
                                                        + self.phase)

    def __call__(self, t, omega):
        fc = self.center(t)
        return np.exp(-((np.asarray(omega) / TWO_PI - fc) ** 2) / (2 * self.width_hz ** 2))


@dataclass(frozen=True)
class SigmoidFormant:
    """Gaussian resonance gliding from ``start_hz`` to ``end_hz`` around ``t0``."""

    start_hz: float = 1000.0
    end_hz: float = 2000.0
    t0: float = 0.5
    glide_s: float = 0.1
    width_hz: float = 300.0

    def center(self, t):
        s = 1.0 / (1.0 + np.exp(-(np.asarray(t) - self.t0) / self.glide_s))
        return self.start_hz + (self.end_hz - self.start_hz) * s

    def __call__(self, t, omega):
        fc = self.center(t)
        return np.exp(-((np.asarray(omega) / TWO_PI - fc) ** 2) / (2 * self.width_hz ** 2))


@dataclass(frozen=True)
class FlatFilter:
    """``h_hat = 1``: the bare harmonic comb."""

    def __call__(self, t, omega):
        return np.ones(np.broadcast(np.asarray(t), np.asarray(omega)).shape)


@dataclass(frozen=True)
class HarmonicTVFilterModel:
    """Harmonic comb of pitch ``xi`` (rad/s) filtered by ``h(t, omega)``.

    ``n_partials = None`` keeps every partial below Nyquist.
    """

    xi: float
    h: Callable = field(default_factory=GaussianFormant)
    duration: float = 1.0
    sample_rate: float = 16000.0
    n_partials: int | None = None

    def __post_init__(self):
        if not self.xi > 0:
            raise ConfigError(f"pitch xi must be positive, got {self.xi!r}")
        if not (self.duration > 0 and self.sample_rate > 0):
            raise ConfigError("duration and sample_rate must be positive")
        if self.xi >= np.pi * self.sample_rate:
            raise ConfigError("pitch at or above Nyquist")

    @property
    def times(self):
        return np.arange(int(round(self.duration * self.sample_rate))) / self.sample_rate

    def partials(self):
        """Harmonic numbers kept below Nyquist and the count dropped."""
        k_max = int(math.ceil(np.pi * self.sample_rate / self.xi)) - 1
        if self.n_partials is None:
            return np.arange(1, k_max + 1), 0
        kept = min(self.n_partials, k_max)
        return np.arange(1, kept + 1), self.n_partials - kept


def _warn_truncated(n):
    if n:
        warnings.warn(f"{n} partials above Nyquist dropped", RuntimeWarning, stacklevel=3)


def gen_tv_filtered(model: HarmonicTVFilterModel) -> Signal:
    """``sum_k h_hat(t, k xi) cos(k xi t)`` over partials below Nyquist."""
    t = model.times
    ks, dropped = model.partials()
    _warn_truncated(dropped)
    x = np.zeros_like(t)
    for k in ks:
        x += model.h(t, k * model.xi) * np.cos(k * model.xi * t)
    return Signal(x, model.sample_rate)


def _phi_sigma_samples(T, rate):
    return T / (2 * math.sqrt(math.log(2))) * rate


def _smooth_at(env, sigma, rows, truncate=6.0):
    """Gaussian smoothing along axis 0 with mirror boundaries, at ``rows`` only.

    Matches ``ndimage.gaussian_filter1d(env, sigma, mode='mirror')[rows]``
    without filtering the samples that are discarded.
    """
    r = int(truncate * sigma + 0.5)
    w = np.exp(-0.5 * (np.arange(-r, r + 1) / sigma) ** 2)
    w /= w.sum()
    padded = np.pad(env, [(r, r)] + [(0, 0)] * (env.ndim - 1), mode="reflect")
    return np.stack([np.tensordot(w, padded[i:i + 2 * r + 1], axes=(0, 0)) for i in rows])


def _frame_index(n_samples, T, rate):
    half = int(round(T * rate / 2))
    return np.arange(0, n_samples, half)


def tv_admissible_bands(model: HarmonicTVFilterModel, bank: FilterBank):
    """Bands resolving a single partial: ``lambda1 / Q < xi`` and a partial nearby.

    Returns a boolean mask over the bank's filters.
    """
    lam = bank.centers
    ks, _ = model.partials()
    k = np.rint(lam / model.xi)
    return (lam / bank.spec.Q < model.xi) & (k >= 1) & (k <= ks.max())


def predict_s1_tv(model: HarmonicTVFilterModel, bank: FilterBank) -> S1Coeffs:
    """First-order prediction from the partial closest to each band.

    ``|psi_hat_lambda(k xi)| |h_hat(t, lambda)|`` smoothed by the Gaussian
    ``phi_T`` and sampled every ``T/2``. Columns of bands that do not resolve
    a single partial (see :func:`tv_admissible_bands`) are NaN.
    """
    if not math.isclose(bank.spec.sample_rate, model.sample_rate):
        raise ConfigError("bank and model sample rates differ")
    T = bank.spec.T
    t = model.times
    lam = bank.centers
    ok = tv_admissible_bands(model, bank)
    k = np.maximum(np.rint(lam / model.xi), 1)
    gain = np.abs([bank.response_at(kk * model.xi, i) for i, kk in enumerate(k)])
    env = np.abs(model.h(t[:, None], lam[None, :])) * gain[None, :]
    out = _smooth_at(env, _phi_sigma_samples(T, model.sample_rate),
                     _frame_index(t.size, T, model.sample_rate))
    out[:, ~ok] = np.nan
    return S1Coeffs(out, T / 2, np.log2(lam / TWO_PI))


def _kernel(response, tol=1e-6):
    """Centered time-domain kernel of a frequency response, trimmed below ``tol``."""
    h = np.fft.ifft(response)
    n = h.size
    mag = np.abs(h)
    m = np.arange(n)
    dist = np.minimum(m, n - m)
    M = int(dist[mag > tol * mag.max()].max())
    M = min(M, (n - 1) // 2)
    return h[np.arange(-M, M + 1) % n]


def _conv_mirror(a, kernel, axis):
    re = ndimage.convolve1d(a.real, kernel.real, axis=axis, mode="mirror") - \
        ndimage.convolve1d(a.imag, kernel.imag, axis=axis, mode="mirror")
    im = ndimage.convolve1d(a.real, kernel.imag, axis=axis, mode="mirror") + \
        ndimage.convolve1d(a.imag, kernel.real, axis=axis, mode="mirror")
    return re + 1j * im


def predict_s2_joint_tv(model: HarmonicTVFilterModel, plan, beta_small=BETA_SMALL):
    """Joint second-order prediction for small quefrencies, up to a constant.

    Builds ``h_tilde(t, log2 lambda) = lambda |h_hat(t, lambda)|`` on the
    scalogram grid, convolves it with each joint wavelet by direct mirrored
    convolution, takes the modulus, smooths by ``phi_T`` and samples every
    ``T/2``.

    Returns
    -------
    values : ndarray, shape (frames, bands, channels)
        Bands in descending frequency; channels with ``|beta| > beta_small``
        are NaN.
    channels : tuple of JointWavelet
    """
    if not math.isclose(plan.sample_rate, model.sample_rate):
        raise ConfigError("plan and model sample rates differ")
    wavelets = plan.joint_wavelets
    lam = plan.bank1.centers[::-1]
    hop = plan.hop_seconds
    n_frames = plan.n_frames
    t = np.arange(n_frames) * hop
    ht = lam[None, :] * np.abs(model.h(t[:, None], lam[None, :]))
    sigma = _phi_sigma_samples(plan.T, 1.0 / hop)
    idx = np.arange(0, n_frames, plan.stride)[: plan.n_frames_T]
    out = np.full((idx.size, lam.size, len(wavelets)), np.nan)
    for c, w in enumerate(wavelets):
        if abs(w.beta) > beta_small:
            continue
        a = _conv_mirror(ht.astype(complex), _kernel(w.time_part.response), axis=0)
        a = _conv_mirror(a, _kernel(w.quefrency_part.response), axis=1)
        v = ndimage.gaussian_filter1d(np.abs(a), sigma, axis=0, mode="mirror", truncate=6.0)
        out[:, :, c] = v[idx][:, ::-1]
    return out, wavelets


# ---------------------------------------------------------------------------
# frequency modulation

@dataclass(frozen=True)
class ExponentialChirp:
    """``theta'(t) = 2 pi f0 exp(gamma t)``; ``theta''/theta' = gamma`` nats/s."""

    f0: float
    gamma: float = 0.0

    def theta(self, t):
        t = np.asarray(t, dtype=float)
        if self.gamma == 0:
            return TWO_PI * self.f0 * t
        return TWO_PI * self.f0 * np.expm1(self.gamma * t) / self.gamma

    def dtheta(self, t):
        return TWO_PI * self.f0 * np.exp(self.gamma * np.asarray(t, dtype=float))

    def ddtheta(self, t):
        return self.gamma * self.dtheta(t)

    def reversed(self, duration):
        """Time-reversed chirp over ``[0, duration]``: pitch retraced backwards."""
        return ExponentialChirp(self.f0 * math.exp(self.gamma * duration), -self.gamma)


@dataclass(frozen=True)
class Vibrato:
    """``theta'(t) = 2 pi f0 (1 + depth sin(2 pi rate t))``."""

    f0: float
    depth: float = 0.05
    rate_hz: float = 6.0

    def theta(self, t):
        t = np.asarray(t, dtype=float)
        w = TWO_PI * self.rate_hz
        return TWO_PI * self.f0 * (t + self.depth * (1 - np.cos(w * t)) / w)

    def dtheta(self, t):
        return TWO_PI * self.f0 * (1 + self.depth * np.sin(TWO_PI * self.rate_hz * np.asarray(t)))

    def ddtheta(self, t):
        w = TWO_PI * self.rate_hz
        return TWO_PI * self.f0 * self.depth * w * np.cos(w * np.asarray(t))


@dataclass(frozen=True)
class FMModel:
    """``sum_{k <= n_partials} cos(k theta(t))``."""

    theta: object
    duration: float = 1.0
    sample_rate: float = 16000.0
    n_partials: int = 1

    def __post_init__(self):
        if self.n_partials < 1:
            raise ConfigError("n_partials must be >= 1")
        if not (self.duration > 0 and self.sample_rate > 0):
            raise ConfigError("duration and sample_rate must be positive")
        if np.any(self.theta.dtheta(self.times) <= 0):
            raise ConfigError("instantaneous frequency must stay positive")

    @property
    def times(self):
        return np.arange(int(round(self.duration * self.sample_rate))) / self.sample_rate

    def partials(self):
        top = float(np.max(self.theta.dtheta(self.times)))
        kept = np.arange(1, self.n_partials + 1)
        kept = kept[kept * top < np.pi * self.sample_rate]
        return kept, self.n_partials - kept.size


def gen_fm(model: FMModel) -> Signal:
    """Real harmonic FM signal; partials that would cross Nyquist are dropped."""
    t = model.times
    ks, dropped = model.partials()
    _warn_truncated(dropped)
    th = model.theta.theta(t)
    x = np.zeros_like(t)
    for k in ks:
        x += np.cos(k * th)
    return Signal(x, model.sample_rate)


@dataclass(frozen=True)
class FMPrediction:
    """First-order prediction and per-frame relative pitch slope.

    ``slope`` is ``theta''/theta'`` in nats/s at each frame time; joint
    energy is expected along ``alpha / beta = -slope`` (alpha in Hz, beta
    in octaves^-1 scaled by ``1/ln 2``).
    """

    s1: S1Coeffs
    slope: np.ndarray
    frame_times: np.ndarray


def predict_fm(model: FMModel, bank: FilterBank) -> FMPrediction:
    """Closest-partial first-order prediction ``|psi_hat_lambda(k theta'(t))| * phi_T``."""
    if not math.isclose(bank.spec.sample_rate, model.sample_rate):
        raise ConfigError("bank and model sample rates differ")
    T = bank.spec.T
    t = model.times
    lam = bank.centers
    inst = model.theta.dtheta(t)
    ks, _ = model.partials()
    k = np.clip(np.rint(lam[None, :] / inst[:, None]), 1, ks.max())
    omega = k * inst[:, None]
    env = np.abs(np.stack([bank.response_at(omega[:, i], i) for i in range(lam.size)], axis=1))
    idx = _frame_index(t.size, T, model.sample_rate)
    smooth = _smooth_at(env, _phi_sigma_samples(T, model.sample_rate), idx)
    slope = model.theta.ddtheta(t[idx]) / model.theta.dtheta(t[idx])
    return FMPrediction(S1Coeffs(smooth, T / 2, np.log2(lam / TWO_PI)), slope, t[idx])


# ---------------------------------------------------------------------------
# textures

def chirp_texture(sample_rate=8000.0, duration=1.0, direction=1, rate_hz=8.0, chirp_s=0.08,
                  f_low=800.0, octaves=1.5, noise=0.01, seed=0) -> Signal:
    """Random train of Hann-windowed exponential chirps, bird-call like.

    ``direction=+1`` gives rising calls, ``-1`` falling ones. Onsets are
    jittered around a mean spacing ``1/rate_hz``.
    """
    if direction not in (1, -1):
        raise ConfigError("direction must be +1 or -1")
    rng = np.random.default_rng(seed)
    n = int(round(duration * sample_rate))
    if (f_low * 2 ** octaves) >= sample_rate / 2:
        raise ConfigError("chirp range exceeds Nyquist")
    x = np.zeros(n)
    length = int(round(chirp_s * sample_rate))
    tt = np.arange(length) / sample_rate
    gamma = octaves * math.log(2) / chirp_s
    win = np.hanning(length)
    start = rng.uniform(0, 1 / rate_hz)
    while start * sample_rate + length <= n:
        f0 = f_low * 2 ** rng.uniform(-0.25, 0.25)
        ch = ExponentialChirp(f0 if direction > 0 else f0 * 2 ** octaves, direction * gamma)
        i0 = int(start * sample_rate)
        x[i0:i0 + length] += win * np.sin(ch.theta(tt) + rng.uniform(0, TWO_PI))
        start += rng.uniform(0.6, 1.4) / rate_hz
    if not np.any(x):
        raise DataError("texture too short for a single chirp")
    x += noise * rng.standard_normal(n)
    return Signal(x, sample_rate)
