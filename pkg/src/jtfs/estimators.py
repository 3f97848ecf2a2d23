"""scikit-learn transformer wrapping the scattering transforms."""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .joint import joint_transform
from .plan import ScatteringPlan
from .reconstruction import ScatteringOperator
from .time_scattering import freq_scatter, log_compress, time_scatter


class ScatteringTransformer(TransformerMixin, BaseEstimator):
    """Turn equal-length signals into frame-averaged scattering features.

    Each row of ``X`` is one signal. ``transform`` returns one feature
    vector per signal: the coefficients of every path averaged over frames
    (``frame_average=True``) or all frames concatenated.

    Parameters
    ----------
    sample_rate : float
    kind : {'s1', 'time', 'time+freq', 'joint'}
    Q : int
    T : float
        Averaging window in seconds.
    K : float
        Octaves of frequency scattering (used by 'time+freq' and 'joint').
    oversampling : int
    log_eps : float or None
        Log-compress with this floor; ``None`` keeps raw coefficients.
    frame_average : bool
    """

    def __init__(self, sample_rate=16000.0, kind="time", Q=8, T=0.032, K=4,
                 oversampling=2, log_eps=1e-3, frame_average=True):
        self.sample_rate = sample_rate
        self.kind = kind
        self.Q = Q
        self.T = T
        self.K = K
        self.oversampling = oversampling
        self.log_eps = log_eps
        self.frame_average = frame_average

    def fit(self, X, y=None):
        X = check_array(X, dtype=float)
        if self.kind not in ("s1", "time", "time+freq", "joint"):
            raise ValueError(f"unknown kind {self.kind!r}")
        self.plan_ = ScatteringPlan(X.shape[1], self.sample_rate, self.Q, self.T, self.K,
                                    self.oversampling)
        self.n_features_in_ = X.shape[1]
        self.n_features_out_ = self._features(X[0]).size
        return self

    def _coeffs(self, x):
        p = self.plan_
        if self.kind == "s1":
            c = ScatteringOperator(p, "s1").coeffs(x)
        elif self.kind == "joint":
            c = joint_transform(x, sample_rate=self.sample_rate, plan=p)
        else:
            c = time_scatter(x, sample_rate=self.sample_rate, plan=p)
            if self.kind == "time+freq":
                c = freq_scatter(c, K=self.K)
        return log_compress(c, self.log_eps) if self.log_eps is not None else c

    def _features(self, x):
        c = self._coeffs(x)
        m = np.concatenate([c.s1.values, c.s2], axis=1)
        return m.mean(axis=0) if self.frame_average else m.ravel()

    def transform(self, X):
        check_is_fitted(self, "plan_")
        X = check_array(X, dtype=float)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} samples per row; fitted with "
                             f"{self.n_features_in_}")
        return np.stack([self._features(x) for x in X])
