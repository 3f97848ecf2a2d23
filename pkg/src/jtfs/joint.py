"""Joint time-frequency scattering with separable 2-D wavelets."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.fft as sfft

from . import _ops
from .errors import ConfigError, DataError
from .filterbank import (AnalyticFilter, FilterBankSpec, angular_grid, build_filterbank,
                         build_quefrency_bank, lowpass_hat)
from .plan import ScatteringPlan
from .scalogram import Scalogram, as_signal, averaging_stride, lowpass_on_frames, scalogram
from .time_scattering import ScatteringCoeffs, ScatteringPath, _meta

__all__ = ["JointWavelet", "RidgeMap", "build_joint_wavelets", "joint_scatter",
           "joint_transform", "joint_grid", "extract_ridge", "asymmetry_index",
           "joint_convolve", "joint_littlewood_paley"]


@dataclass(frozen=True)
class JointWavelet:
    """Separable wavelet ``psi_alpha(t) * psi_beta(log lambda1)``.

    ``time_part`` lives on the scalogram frame grid; ``quefrency_part`` on the
    padded ascending log-frequency axis, already mirrored when
    ``beta_sign == -1``. ``beta_sign == 0`` pairs ``psi_alpha`` with the
    quefrency low-pass.
    """

    alpha: float
    beta: float
    beta_sign: int
    time_part: AnalyticFilter = field(repr=False)
    quefrency_part: AnalyticFilter = field(repr=False)

    def response_2d(self):
        """Outer product ``(n_frames_fft, n_bins_fft)`` of the two responses."""
        return np.outer(self.time_part.response, self.quefrency_part.response)

    @property
    def signed_beta(self):
        return self.beta_sign * self.beta

    def path(self, lambda1):
        return ScatteringPath(2, float(lambda1), alpha=self.alpha, beta=self.beta,
                              beta_sign=self.beta_sign, transform_kind="joint")


def build_joint_wavelets(Q, T, K, hop, n_frames_padded, n_bands):
    """All ``(alpha, +-beta)`` pairs plus ``(alpha, 0)`` low-pass channels.

    ``alpha`` runs over the Q = 1 time bank on the scalogram frame rate
    (``1/hop``) restricted to ``alpha >= 2*pi/T``; ``beta`` over the quefrency
    bank of a ``Q``-bins-per-octave axis of ``n_bands`` bins. Ordered by
    alpha descending, then sign (-1, 0, +1), then ``|beta|`` descending.
    """
    tbank = build_filterbank(FilterBankSpec(1.0 / hop, 1, T, n_frames_padded))
    qbank = build_quefrency_bank(Q, K, n_bands)
    neg = (-np.arange(qbank.spec.n_fft)) % qbank.spec.n_fft
    alphas = [f for f in tbank.filters if f.center >= 2 * np.pi / T * (1 - 1e-9)]
    if not alphas:
        raise ConfigError("no time wavelet with alpha >= 2*pi/T; increase oversampling")
    # both quefrency signs share the half-plane, hence the 1/sqrt(2)
    pos = [AnalyticFilter(f.center, f.bandwidth, f.response / math.sqrt(2), f.kind)
           for f in qbank.filters]
    out = []
    for fa in alphas:
        for f in pos:
            mirrored = AnalyticFilter(f.center, f.bandwidth, f.response[neg], f.kind)
            out.append(JointWavelet(fa.center, f.center, -1, fa, mirrored))
        out.append(JointWavelet(fa.center, 0.0, 0, fa, qbank.lowpass))
        for f in pos:
            out.append(JointWavelet(fa.center, f.center, 1, fa, f))
    return tuple(out)


def joint_littlewood_paley(wavelets, T, hop, Q):
    """``|phi_T(w)|^2 + 1/2 sum_c (|Psi_c(w, eta)|^2 + |Psi_c(-w, -eta)|^2)``.

    The low-pass term stands for the first-order path. Returns the sum on the
    2-D FFT grid ``(n_frames_fft, n_bins_fft)`` together with the angular
    frequency axes ``(omega, eta)``; ``eta`` is in radians per octave.
    """
    n_t = wavelets[0].time_part.response.size
    n_q = wavelets[0].quefrency_part.response.size
    omega = angular_grid(n_t, 1.0 / hop)
    eta = angular_grid(n_q, Q)
    nt, nq = (-np.arange(n_t)) % n_t, (-np.arange(n_q)) % n_q
    out = np.zeros((n_t, n_q))
    for w in wavelets:
        p = np.abs(w.response_2d()) ** 2
        out += 0.5 * (p + p[nt][:, nq])
    out += (lowpass_hat(omega, T) ** 2)[:, None]
    return out, omega, eta


def _prepare(U, n_q):
    """Ascending-frequency, band-padded copy of a scalogram buffer."""
    n = U.shape[1]
    return U[:, ::-1][:, _ops.pad_index(n, n_q)]


def joint_convolve(Up, wavelets, method="separable"):
    """Complex ``Up ** Psi`` for every wavelet, shape ``(frames, bins, channels)``.

    ``Up`` is already band-padded (ascending). ``method='direct'`` multiplies
    by the full 2-D response in the 2-D Fourier domain; ``'separable'`` runs a
    time pass then a quefrency pass.
    """
    out = np.empty(Up.shape + (len(wavelets),), dtype=complex)
    if method == "direct":
        F = sfft.fft2(Up)
        for c, w in enumerate(wavelets):
            out[:, :, c] = sfft.ifft2(F * w.response_2d())
        return out
    if method != "separable":
        raise ValueError(f"unknown method {method!r}")
    Ut = _ops.fft(Up, axis=0)
    for alpha, chans in _group_by_alpha(wavelets):
        Y = _ops.conv_subsample(Ut, wavelets[chans[0]].time_part.response, axis=0)
        Yq = _ops.fft(Y, axis=1)
        Hq = np.stack([wavelets[c].quefrency_part.response for c in chans], axis=1)
        out[:, :, chans] = sfft.ifft(Yq[:, :, None] * Hq[None], axis=1)
    return out


def _group_by_alpha(wavelets):
    groups = {}
    for c, w in enumerate(wavelets):
        groups.setdefault(w.alpha, []).append(c)
    return list(groups.items())


def _check_wavelets(scal, wavelets):
    if not wavelets:
        raise ConfigError("empty joint wavelet set")
    alpha_max = max(w.alpha for w in wavelets)
    if scal.hop > math.pi / alpha_max * (1 + 1e-9):
        raise ConfigError(f"scalogram hop {scal.hop:g} s too coarse for alpha_max = "
                          f"{alpha_max:g} rad/s; need hop <= {math.pi / alpha_max:g} s")
    if wavelets[0].time_part.response.size != scal.padded.shape[0]:
        raise ConfigError("joint wavelets were built for a different frame count")


def joint_scatter(scal: Scalogram, wavelets, T, method="separable") -> ScatteringCoeffs:
    """``|x1 ** Psi| * phi_T`` subsampled at ``T/2``; unaveraged along log-frequency.

    Paths are ordered by ``lambda1`` descending, then by wavelet order.
    """
    _check_wavelets(scal, wavelets)
    stride = averaging_stride(scal, T)
    n_q = wavelets[0].quefrency_part.response.size
    n_bands = scal.n_bands
    phi = lowpass_on_frames(scal.padded.shape[0], scal.hop, T)
    n_out = -(-scal.n_samples // int(round(T * scal.sample_rate / 2)))

    V = np.abs(joint_convolve(_prepare(scal.padded, n_q), wavelets, method))
    V = V[:, :n_bands][:, ::-1]
    S = _ops.conv_subsample(_ops.fft(V, axis=0), phi, stride, axis=0).real[:n_out]
    S1 = _ops.conv_subsample(_ops.fft(scal.padded), phi, stride).real[:n_out]

    from .scalogram import S1Coeffs
    lam1 = 2 * np.pi * 2.0 ** scal.band_log_centers
    paths = [w.path(l1) for l1 in lam1 for w in wavelets]
    meta = {"T": T, "transform_kind": "joint", "n_channels": len(wavelets),
            "sample_rate": scal.sample_rate, "n_samples": scal.n_samples}
    return ScatteringCoeffs(S1Coeffs(S1, T / 2, scal.band_log_centers),
                            S.reshape(S.shape[0], -1), paths, meta)


def joint_transform(x, Q=8, T=0.032, K=4, oversampling=2, padding="reflect",
                    sample_rate=None, plan: ScatteringPlan = None) -> ScatteringCoeffs:
    """Scalogram followed by :func:`joint_scatter`, from a raw signal."""
    if sample_rate is None and plan is not None:
        sample_rate = plan.sample_rate
    x = as_signal(x, sample_rate)
    if plan is None:
        plan = ScatteringPlan(len(x), x.sample_rate, Q, T, K, oversampling, padding)
    elif plan.n_samples != len(x):
        raise ConfigError(f"plan is for {plan.n_samples} samples, signal has {len(x)}")
    scal = scalogram(x, plan.bank1, plan.oversampling, plan.padding)
    c = joint_scatter(scal, plan.joint_wavelets, plan.T)
    c.meta.update(_meta(plan, "joint"), n_channels=len(plan.joint_wavelets))
    return c


def _channels_of(coeffs):
    n_bands = coeffs.s1.values.shape[1]
    if coeffs.meta.get("transform_kind") != "joint":
        raise ConfigError("expected joint scattering coefficients")
    n_ch = len(coeffs.paths) // n_bands
    return coeffs.paths[:n_ch]


def joint_grid(coeffs: ScatteringCoeffs):
    """Reshape joint ``s2`` to ``[frame, band, channel]``; returns ``(grid, channel_paths)``."""
    chans = _channels_of(coeffs)
    n_bands = coeffs.s1.values.shape[1]
    return coeffs.s2.reshape(coeffs.n_frames, n_bands, len(chans)), chans


def asymmetry_index(coeffs: ScatteringCoeffs):
    """``(E+ - E-) / (E+ + E-)`` over joint channels of positive vs negative beta.

    Rising pitch puts energy at negative beta, so up-chirps score negative.
    """
    grid, chans = joint_grid(coeffs)
    sign = np.array([p.beta_sign for p in chans])
    e = (grid ** 2).sum(axis=(0, 1))
    ep, en = e[sign > 0].sum(), e[sign < 0].sum()
    if ep + en == 0:
        return 0.0
    return float((ep - en) / (ep + en))


@dataclass(frozen=True)
class RidgeMap:
    """Per-cell argmax over band-pass joint channels.

    ``slope`` is the relative pitch-variation rate ``theta''/theta'`` in nats
    per second implied by the winning channel: ``-(alpha/2pi)/beta * ln 2``
    with signed ``beta``. Cells that are all-zero or below the detection floor
    are NaN.
    """

    alpha: np.ndarray
    beta: np.ndarray
    sign: np.ndarray
    value: np.ndarray
    slope: np.ndarray
    frame_slope: np.ndarray
    band_log_centers: np.ndarray

    def median_slope(self):
        s = self.frame_slope[np.isfinite(self.frame_slope)]
        return float(np.median(s)) if s.size else 0.0


def extract_ridge(coeffs: ScatteringCoeffs, rel_floor=0.1) -> RidgeMap:
    """Locate the dominant ``(alpha, beta)`` channel in every (frame, band) cell.

    A cell is defined when it carries signal (``S1`` at least ``rel_floor``
    times its global maximum) and is modulated (best band-pass coefficient at
    least ``rel_floor`` times the cell's ``S1``). Steady partials therefore
    leave no ridge. ``frame_slope`` is the slope at the strongest defined cell
    of each frame.
    """
    grid, chans = joint_grid(coeffs)
    bp = np.array([p.beta_sign != 0 for p in chans])
    if not bp.any():
        raise DataError("no band-pass quefrency channels present")
    G = grid[:, :, bp]
    ch = [p for p, m in zip(chans, bp) if m]
    alpha = np.array([p.alpha for p in ch])
    beta = np.array([p.beta for p in ch])
    sign = np.array([p.beta_sign for p in ch])
    k = np.argmax(G, axis=2)
    val = np.take_along_axis(G, k[:, :, None], axis=2)[:, :, 0]
    s1 = coeffs.s1.values
    peak = s1.max() if s1.size else 0.0
    defined = (s1 > 0) & (s1 >= rel_floor * peak) & (val > 0) & (val >= rel_floor * s1)
    slope = -(alpha[k] / (2 * np.pi)) / (sign[k] * beta[k]) * math.log(2)
    slope = np.where(defined, slope, np.nan)
    frame_slope = np.full(G.shape[0], np.nan)
    for t in range(G.shape[0]):
        if defined[t].any():
            b = np.argmax(np.where(defined[t], val[t], -np.inf))
            frame_slope[t] = slope[t, b]
    nan = np.where(defined, 0.0, np.nan)
    return RidgeMap(alpha[k] + nan, beta[k] + nan, np.where(defined, sign[k], 0),
                    np.where(defined, val, 0.0), slope, frame_slope,
                    coeffs.s1.band_log_centers)
