"""Signal reconstruction from scattering coefficients by gradient descent.

The forward transforms are re-expressed here as a chain of linear stages and
moduli whose intermediate values are cached, so that the gradient of
``||S x - S y||^2`` can be backpropagated stage by stage: every linear stage
through its adjoint (conjugate filters, zero-insertion upsampling, crop and
padding adjoints), every modulus through ``g * z / |z|``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.fft as sfft

from . import _ops
from .errors import ConfigError, NumericalError
from .joint import _prepare
from .plan import ScatteringPlan
from .scalogram import S1Coeffs, Signal, antialias_hat, as_signal
from .time_scattering import ScatteringCoeffs, ScatteringPath, _meta, second_order_layout

__all__ = ["OBJECTIVES", "ScatteringOperator", "ReconstructionState", "scattering_loss",
           "backprop_gradient", "reconstruct", "analyze"]

OBJECTIVES = ("s1", "time_s1s2", "joint_s1s2")
_KIND_TO_OBJECTIVE = {"time": "time_s1s2", "joint": "joint_s1s2", "s1": "s1"}


def _check_objective(objective):
    if objective not in OBJECTIVES:
        raise ConfigError(f"objective must be one of {OBJECTIVES}, got {objective!r}")


class ScatteringOperator:
    """Differentiable scattering ``y -> (S1, S2)`` for one plan and objective.

    ``forward`` returns the coefficients together with a cache; ``backward``
    maps coefficient gradients back to a gradient on the signal samples.

    Parameters
    ----------
    plan : ScatteringPlan
    objective : {'s1', 'time_s1s2', 'joint_s1s2'}
    """

    def __init__(self, plan: ScatteringPlan, objective="time_s1s2"):
        _check_objective(objective)
        self.plan = plan
        self.objective = objective
        self.pad_idx = _ops.pad_index(plan.n_samples, plan.n_fft, plan.padding)
        self.psi1 = plan.bank1.responses()
        self.aa = antialias_hat(plan.n_fft, plan.hop)
        self.phi = plan.phi_frames
        self.n_out = plan.n_frames_T
        if objective == "time_s1s2":
            c1, c2 = plan.bank1.centers, plan.bank2.centers
            layout = second_order_layout(c1, c2, plan.Q)
            self.groups = []
            for j, f2 in enumerate(plan.bank2.filters):
                sel = [k for k, (a, b) in enumerate(layout) if b == j]
                if sel:
                    self.groups.append((f2.response, sel, [layout[k][0] for k in sel]))
            self.n_paths = len(layout)
            self.paths = tuple(ScatteringPath(2, float(c1[a]), lambda2=float(c2[b]))
                               for a, b in layout)
        elif objective == "joint_s1s2":
            self.wavelets = plan.joint_wavelets
            self.n_q = self.wavelets[0].quefrency_part.response.size
            self._joint_groups = []
            by_alpha = {}
            for c, w in enumerate(self.wavelets):
                by_alpha.setdefault(w.alpha, []).append(c)
            for chans in by_alpha.values():
                ht = self.wavelets[chans[0]].time_part.response
                hq = np.stack([self.wavelets[c].quefrency_part.response for c in chans], axis=1)
                self._joint_groups.append((ht, hq, chans))
            lam1 = 2 * np.pi * 2.0 ** np.log2(plan.bank1.centers / (2 * np.pi))
            self.n_paths = plan.n_bands * len(self.wavelets)
            self.paths = tuple(w.path(l1) for l1 in lam1 for w in self.wavelets)
        else:
            self.n_paths = 0
            self.paths = ()

    # -- shared stages -------------------------------------------------
    def _average(self, V):
        """``V[frame, ...]`` averaged by ``phi_T`` and cropped to the output frames."""
        return _ops.conv_subsample(_ops.fft(V), self.phi, self.plan.stride).real[: self.n_out]

    def _average_adjoint(self, g):
        n_sub = self.plan.n_frames_padded // self.plan.stride
        g = _ops.crop_adjoint(g, n_sub)
        return _ops.conv_subsample_adjoint(g, self.phi, self.plan.stride).real

    # -- forward / backward ---------------------------------------------
    def forward(self, y):
        """Return ``(S1, S2, cache)``; ``S2`` has shape ``(frames, n_paths)``."""
        p = self.plan
        x = np.asarray(y, dtype=float)
        if x.shape != (p.n_samples,):
            raise ConfigError(f"expected {p.n_samples} samples, got shape {x.shape}")
        X = _ops.fft(x[self.pad_idx])
        Z = _ops.conv_subsample(X, self.psi1)
        A = np.abs(Z)
        U = _ops.lowpass_decimate(A, self.aa, p.hop)
        cache = {"Z": Z, "A": A, "U": U}
        S1 = self._average(U)
        if self.objective == "s1":
            S2 = np.zeros((S1.shape[0], 0))
        elif self.objective == "time_s1s2":
            S2 = np.empty((self.n_out, self.n_paths))
            Uh = _ops.fft(U)
            cache["Y"] = []
            for h2, sel, bands in self.groups:
                Y = _ops.conv_subsample(Uh[:, bands], h2)
                S2[:, sel] = self._average(np.abs(Y))
                cache["Y"].append(Y)
        else:
            Up = _prepare(U, self.n_q)
            Y = self._joint_forward(Up)
            cache["Y"] = Y
            V = np.abs(Y[:, : p.n_bands][:, ::-1])
            S2 = self._average(V).reshape(self.n_out, -1)
        return S1, S2, cache

    def _joint_forward(self, Up):
        Ut = _ops.fft(Up, axis=0)
        out = np.empty(Up.shape + (len(self.wavelets),), dtype=complex)
        for ht, hq, chans in self._joint_groups:
            Yq = _ops.fft(_ops.conv_subsample(Ut, ht, axis=0), axis=1)
            out[:, :, chans] = sfft.ifft(Yq[:, :, None] * hq[None], axis=1)
        return out

    def _joint_adjoint(self, gY):
        """Adjoint of :meth:`_joint_forward`, summing over channels."""
        G = sfft.fft2(gY, axes=(0, 1))
        acc = np.zeros(gY.shape[:2], dtype=complex)
        for ht, hq, chans in self._joint_groups:
            A = np.einsum("tqc,qc->tq", G[:, :, chans], np.conj(hq))
            acc += np.conj(ht)[:, None] * A
        return sfft.ifft2(acc, axes=(0, 1))

    def backward(self, cache, g1, g2):
        """Gradient on the signal samples from gradients on ``S1`` and ``S2``."""
        p = self.plan
        Z, A, U = cache["Z"], cache["A"], cache["U"]
        gU = self._average_adjoint(g1)
        if self.objective == "time_s1s2":
            for (h2, sel, bands), Y in zip(self.groups, cache["Y"]):
                gV = self._average_adjoint(g2[:, sel])
                gY = _ops.modulus_backward(gV, Y, np.abs(Y))
                gU[:, bands] += _ops.conv_subsample_adjoint(gY, h2).real
        elif self.objective == "joint_s1s2":
            Y = cache["Y"]
            n_ch = len(self.wavelets)
            gV = self._average_adjoint(g2.reshape(self.n_out, p.n_bands, n_ch))
            gYabs = np.zeros(Y.shape)
            gYabs[:, : p.n_bands] = gV[:, ::-1]
            gY = _ops.modulus_backward(gYabs, Y, np.abs(Y))
            gUp = self._joint_adjoint(gY).real
            idx = _ops.pad_index(p.n_bands, self.n_q)
            gU += _ops.gather_adjoint(gUp, idx, p.n_bands, axis=1)[:, ::-1]
        gA = _ops.lowpass_decimate_adjoint(gU, self.aa, p.hop)
        gZ = _ops.modulus_backward(gA, Z, A)
        # sum over bands before the inverse transform
        G = sfft.fft(gZ, axis=0)
        gx = sfft.ifft(np.einsum("fb,fb->f", G, np.conj(self.psi1))).real
        return _ops.gather_adjoint(gx, self.pad_idx, p.n_samples)

    def coeffs(self, y) -> ScatteringCoeffs:
        """Forward pass packaged as :class:`ScatteringCoeffs`."""
        S1, S2, _ = self.forward(y)
        p = self.plan
        log_c = np.log2(p.bank1.centers / (2 * np.pi))
        kind = {"s1": "s1", "time_s1s2": "time", "joint_s1s2": "joint"}[self.objective]
        meta = _meta(p, kind)
        if kind == "joint":
            meta["n_channels"] = len(self.wavelets)
        return ScatteringCoeffs(S1Coeffs(S1, p.T / 2, log_c), S2, self.paths, meta)

    def loss_and_grad(self, y, target: ScatteringCoeffs):
        S1, S2, cache = self.forward(y)
        d1 = S1 - target.s1.values
        d2 = S2 - target.s2
        loss = float(np.sum(d1 ** 2) + np.sum(d2 ** 2))
        return loss, self.backward(cache, 2 * d1, 2 * d2)

    def loss(self, y, target: ScatteringCoeffs):
        S1, S2, _ = self.forward(y)
        return float(np.sum((S1 - target.s1.values) ** 2) + np.sum((S2 - target.s2) ** 2))


def plan_from_meta(meta, n_samples=None) -> ScatteringPlan:
    """Rebuild the analysis plan recorded in coefficient metadata."""
    try:
        return ScatteringPlan(n_samples or meta["n_samples"], meta["sample_rate"], meta["Q"],
                              meta["T"], meta.get("K"), meta.get("oversampling", 2),
                              meta.get("padding", "reflect"))
    except KeyError as exc:
        raise ConfigError(f"coefficient metadata lacks {exc.args[0]!r}") from None


def objective_of(coeffs: ScatteringCoeffs):
    kind = coeffs.meta.get("transform_kind")
    if kind not in _KIND_TO_OBJECTIVE:
        raise ConfigError(f"cannot reconstruct from {kind!r} coefficients")
    return _KIND_TO_OBJECTIVE[kind]


def analyze(x, objective="time_s1s2", Q=8, T=0.032, K=4, oversampling=2, padding="reflect",
            sample_rate=None) -> ScatteringCoeffs:
    """Coefficients of ``x`` for a reconstruction objective."""
    x = as_signal(x, sample_rate)
    plan = ScatteringPlan(len(x), x.sample_rate, Q, T, K, oversampling, padding)
    return ScatteringOperator(plan, objective).coeffs(x.samples)


def scattering_loss(target: ScatteringCoeffs, candidate: ScatteringCoeffs) -> float:
    """``||S1 x - S1 y||^2 + ||S2 x - S2 y||^2``."""
    if target.paths != candidate.paths:
        raise ConfigError("target and candidate have different scattering paths")
    if target.s1.values.shape != candidate.s1.values.shape or \
            target.s2.shape != candidate.s2.shape:
        raise ConfigError("target and candidate have different shapes")
    return float(np.sum((target.s1.values - candidate.s1.values) ** 2)
                 + np.sum((target.s2 - candidate.s2) ** 2))


def backprop_gradient(target: ScatteringCoeffs, y, objective=None) -> np.ndarray:
    """``d/dy ||S x - S y||^2`` for the objective the target was computed with."""
    objective = objective or objective_of(target)
    y = as_signal(y, target.meta.get("sample_rate"))
    op = ScatteringOperator(plan_from_meta(target.meta, len(y)), objective)
    return op.loss_and_grad(y.samples, target)[1]


@dataclass
class ReconstructionState:
    """Progress of a reconstruction run.

    ``loss_history`` holds the loss of every accepted iterate, starting with
    the initial noise, so it is nonincreasing.
    """

    y: Signal
    loss_history: list
    step: float
    iteration: int
    seed: int
    objective: str
    rejected: int = 0
    stopped: str = ""
    meta: dict = field(default_factory=dict)

    @property
    def loss_ratio(self):
        h = self.loss_history
        return h[-1] / h[0] if h[0] > 0 else 0.0


def _init_noise(op, target, n_samples, seed):
    rng = np.random.default_rng(seed)
    y = rng.uniform(-1.0, 1.0, n_samples)
    s1y = np.linalg.norm(op.forward(y)[0]) if op.objective == "s1" else \
        np.linalg.norm(ScatteringOperator(op.plan, "s1").forward(y)[0])
    s1x = np.linalg.norm(target.s1.values)
    return y * (s1x / s1y) if s1y > 0 else y


def reconstruct(target: ScatteringCoeffs, n_samples=None, iterations=1000, seed=0,
                objective=None, step=0.1, grow=1.1, shrink=0.5, tol=None, callback=None):
    """Gradient descent from random noise towards coefficients ``target``.

    Each iteration moves ``y`` by ``step * ||y|| / ||g||`` along ``-g``. The
    step grows by ``grow`` when the loss decreases; otherwise the move is
    undone and the step multiplied by ``shrink``.

    Parameters
    ----------
    target : ScatteringCoeffs
        Coefficients to match; their metadata fixes the analysis settings.
    n_samples : int, optional
        Defaults to the length of the analyzed signal.
    iterations : int
    seed : int
    objective : str, optional
        Inferred from ``target`` when omitted.
    tol : float, optional
        Stop once ``loss / initial_loss <= tol``.
    callback : callable, optional
        Called as ``callback(state)`` after every iteration.

    Returns
    -------
    y : Signal
    state : ReconstructionState

    Raises
    ------
    NumericalError
        If the loss or gradient is not finite. Rejected moves never raise:
        once the step falls below ``1e-12`` times its initial value the run
        ends with ``stopped == 'step underflow'``.
    """
    if iterations < 1:
        raise ConfigError(f"iterations must be >= 1, got {iterations}")
    if not step > 0:
        raise ConfigError(f"step must be positive, got {step}")
    objective = objective or objective_of(target)
    _check_objective(objective)
    n_samples = n_samples or target.meta.get("n_samples")
    plan = plan_from_meta(target.meta, n_samples)
    if plan.n_frames_T != target.s1.values.shape[0]:
        raise ConfigError("n_samples gives a different frame count than the target")
    op = ScatteringOperator(plan, objective)
    if op.paths != target.paths:
        raise ConfigError("target paths do not match the requested objective")

    y = _init_noise(op, target, plan.n_samples, seed)
    loss, g = op.loss_and_grad(y, target)
    if not (np.isfinite(loss) and np.all(np.isfinite(g))):
        raise NumericalError(f"initial loss {loss:g} or its gradient is not finite")
    step0 = step
    state = ReconstructionState(Signal(y, plan.sample_rate), [loss], step, 0, seed, objective,
                                meta={"initial_loss": loss})
    for it in range(1, iterations + 1):
        state.iteration = it
        gn = np.linalg.norm(g)
        if not np.isfinite(gn):
            raise NumericalError(f"non-finite gradient at iteration {it}")
        if gn == 0:
            state.stopped = "zero gradient"
            break
        y_new = y - step * (np.linalg.norm(y) / gn) * g
        loss_new, g_new = op.loss_and_grad(y_new, target)
        if np.isfinite(loss_new) and loss_new < loss:
            y, loss, g = y_new, loss_new, g_new
            state.loss_history.append(loss)
            step *= grow
        else:
            state.rejected += 1
            step *= shrink
            if step < 1e-12 * step0:
                state.stopped = "step underflow"
                break
        state.step = step
        state.y = Signal(y, plan.sample_rate)
        if callback is not None:
            callback(state)
        if tol is not None and loss <= tol * state.loss_history[0]:
            state.stopped = "tolerance"
            break
    state.step = step
    state.y = Signal(y, plan.sample_rate)
    if not state.stopped:
        state.stopped = "iterations"
    return state.y, state
