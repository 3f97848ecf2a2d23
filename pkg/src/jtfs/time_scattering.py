"""Second-order time scattering, frequency scattering along log-frequency,
and log compression of scattering coefficients."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
import scipy.fft as sfft

from . import _ops
from .errors import ConfigError
from .plan import ScatteringPlan
from .scalogram import S1Coeffs, Scalogram, as_signal, s1, scalogram

__all__ = ["ScatteringPath", "ScatteringCoeffs", "time_scatter", "second_order_time",
           "freq_scatter", "log_compress"]


@dataclass(frozen=True)
class ScatteringPath:
    """Identifies one scattering channel.

    ``lambda1``, ``lambda2`` and ``alpha`` are in rad/s; ``beta`` is a
    quefrency magnitude in cycles per octave and ``beta_sign`` its sign
    (0 marks the quefrency low-pass).
    """

    order: int
    lambda1: float
    lambda2: Optional[float] = None
    alpha: Optional[float] = None
    beta: Optional[float] = None
    beta_sign: Optional[int] = None
    transform_kind: str = "time"

    def __post_init__(self):
        if self.order not in (1, 2):
            raise ValueError(f"order must be 1 or 2, got {self.order}")
        if self.order == 1 and any(v is not None for v in
                                   (self.lambda2, self.alpha, self.beta, self.beta_sign)):
            raise ValueError("first-order paths carry only lambda1")
        if self.transform_kind == "joint":
            if self.alpha is None or self.beta is None or self.beta_sign is None:
                raise ValueError("joint paths need alpha, beta and beta_sign")
            if (self.beta_sign == 0) != (self.beta == 0):
                raise ValueError("beta_sign = 0 is reserved for the quefrency low-pass")

    def to_dict(self):
        return {k: v for k, v in self.__dict__.items() if v is not None}

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


@dataclass
class ScatteringCoeffs:
    """First-order coefficients plus a second-order tensor ``s2[frame, path]``."""

    s1: S1Coeffs
    s2: np.ndarray
    paths: tuple
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.paths = tuple(self.paths)
        if self.s2.ndim != 2 or self.s2.shape[1] != len(self.paths):
            raise ConfigError(f"s2 shape {self.s2.shape} does not match {len(self.paths)} paths")
        if self.s2.shape[0] != self.s1.values.shape[0]:
            raise ConfigError("s1 and s2 frame counts differ")

    @property
    def n_frames(self):
        return self.s2.shape[0]

    def first_order_paths(self):
        return tuple(ScatteringPath(1, float(2 * np.pi * 2.0 ** c))
                     for c in self.s1.band_log_centers)

    def energy(self):
        return float(np.sum(self.s1.values ** 2) + np.sum(self.s2 ** 2))


def _admissible(lambda1, lambda2, Q):
    return lambda2 < lambda1 / Q


def second_order_layout(bank1_centers, bank2_centers, Q):
    """Admissible ``(band1, band2)`` index pairs in output order
    (lambda1 descending, then lambda2 descending)."""
    return [(i, j) for i, l1 in enumerate(bank1_centers)
            for j, l2 in enumerate(bank2_centers) if _admissible(l1, l2, Q)]


def second_order_time(scal: Scalogram, plan: ScatteringPlan):
    """``|x1 * psi_lambda2| * phi_T`` for all admissible pairs.

    Returns ``(values[frame, path], paths)``.
    """
    bank2 = plan.bank2
    c1, c2 = plan.bank1.centers, bank2.centers
    layout = second_order_layout(c1, c2, plan.Q)
    U_hat = _ops.fft(scal.padded)
    cols = np.empty((plan.n_frames_T, len(layout)))
    for j, f2 in enumerate(bank2.filters):
        sel = [k for k, (a, b) in enumerate(layout) if b == j]
        if not sel:
            continue
        bands = [layout[k][0] for k in sel]
        V = np.abs(_ops.conv_subsample(U_hat[:, bands], f2.response))
        S = _ops.conv_subsample(_ops.fft(V), plan.phi_frames, plan.stride).real
        cols[:, sel] = S[: plan.n_frames_T]
    paths = [ScatteringPath(2, float(c1[a]), lambda2=float(c2[b])) for a, b in layout]
    return cols, paths


def time_scatter(x, Q=8, T=0.032, oversampling=2, padding="reflect", sample_rate=None,
                 plan: ScatteringPlan = None) -> ScatteringCoeffs:
    """First- and second-order time scattering of ``x``.

    The first-order bank has ``Q`` wavelets per octave, the second-order bank
    one per octave; both share the averaging window ``T``. Second-order paths
    are kept only when ``lambda2 < lambda1 / Q``.
    """
    if sample_rate is None and plan is not None:
        sample_rate = plan.sample_rate
    x = as_signal(x, sample_rate)
    if plan is None:
        plan = ScatteringPlan(len(x), x.sample_rate, Q, T, None, oversampling, padding)
    elif plan.n_samples != len(x):
        raise ConfigError(f"plan is for {plan.n_samples} samples, signal has {len(x)}")
    scal = scalogram(x, plan.bank1, plan.oversampling, plan.padding)
    S1 = s1(scal, plan.bank1)
    S2, paths = second_order_time(scal, plan)
    return ScatteringCoeffs(S1, S2, paths, _meta(plan, "time"))


def _meta(plan, kind):
    return {"Q": plan.Q, "T": plan.T, "K": plan.K, "transform_kind": kind,
            "sample_rate": plan.sample_rate, "n_samples": plan.n_samples,
            "oversampling": plan.oversampling, "padding": plan.padding}


def _infer_q(log_centers):
    steps = -np.diff(np.asarray(log_centers))
    steps = steps[steps > 0]
    if steps.size == 0:
        raise ConfigError("cannot infer Q from fewer than two bands")
    return int(round(1 / np.min(steps)))


def _freq_wavelet_moduli(A, qbank):
    """``|A * psi_beta|`` along the band axis of ``A[frame, band]``.

    Bands arrive in descending frequency; filtering runs on the ascending
    log-frequency axis with symmetric padding. Output ``[frame, band, beta]``.
    """
    n = A.shape[1]
    idx = _ops.pad_index(n, qbank.spec.n_fft)
    Ah = _ops.fft(A[:, ::-1][:, idx], axis=1)
    out = np.abs(sfft.ifft(Ah[:, :, None] * qbank.responses()[None], axis=1))
    return out[:, :n][:, ::-1]


def freq_scatter(coeffs, K=4, Q=None) -> ScatteringCoeffs:
    """Unaveraged frequency scattering along log-frequency.

    Applies the quefrency wavelets to ``S1`` (and to every second-order
    ``lambda2`` slice when time-scattering coefficients are given), keeping the
    modulus at every band. Paths carry ``beta`` in cycles per octave.
    """
    from .filterbank import build_quefrency_bank

    if isinstance(coeffs, S1Coeffs):
        S1, base_s2, base_paths, meta = coeffs, None, (), {}
    else:
        S1, base_s2, base_paths, meta = coeffs.s1, coeffs.s2, coeffs.paths, dict(coeffs.meta)
    if Q is None:
        Q = meta.get("Q") or _infer_q(S1.band_log_centers)
    n_bands = S1.values.shape[1]
    qbank = build_quefrency_bank(Q, K, n_bands)
    betas = [f.center for f in qbank.filters]
    lam1 = 2 * np.pi * 2.0 ** np.asarray(S1.band_log_centers)

    blocks, paths = [], []
    M = _freq_wavelet_moduli(S1.values, qbank)
    blocks.append(M.reshape(M.shape[0], -1))
    paths += [ScatteringPath(2, float(l1), beta=b, beta_sign=1, transform_kind="freq")
              for l1 in lam1 for b in betas]
    if base_s2 is not None and len(base_paths):
        lam2s = sorted({p.lambda2 for p in base_paths if p.lambda2 is not None}, reverse=True)
        for l2 in lam2s:
            cols = [k for k, p in enumerate(base_paths) if p.lambda2 == l2 and p.order == 2]
            M = _freq_wavelet_moduli(base_s2[:, cols], qbank)
            blocks.append(M.reshape(M.shape[0], -1))
            paths += [ScatteringPath(2, base_paths[k].lambda1, lambda2=l2, beta=b,
                                     beta_sign=1, transform_kind="freq")
                      for k in cols for b in betas]
    s2 = np.concatenate(blocks, axis=1)
    if base_s2 is not None:
        s2 = np.concatenate([base_s2, s2], axis=1)
        paths = list(base_paths) + paths
    meta.update({"K": K, "Q": Q,
                 "transform_kind": "time+freq" if base_s2 is not None else "freq"})
    return ScatteringCoeffs(S1, s2, paths, meta)


def _log_floor(a, eps, what):
    nz = a[a > 0]
    if nz.size == 0:
        warnings.warn(f"{what} coefficients are all zero; log compression yields a constant",
                      RuntimeWarning, stacklevel=3)
        return eps
    return eps * float(np.median(nz))


def log_compress(c: ScatteringCoeffs, eps=1e-3) -> ScatteringCoeffs:
    """``log(value + eps * median(nonzero values))``, with the median taken per order."""
    if not eps > 0:
        raise ConfigError(f"eps must be positive, got {eps!r}")
    f1 = _log_floor(c.s1.values, eps, "first-order")
    f2 = _log_floor(c.s2, eps, "second-order") if c.s2.size else eps
    s1_log = replace(c.s1, values=np.log(c.s1.values + f1))
    meta = dict(c.meta, log=True, log_eps=eps)
    return ScatteringCoeffs(s1_log, np.log(c.s2 + f2), c.paths, meta)
