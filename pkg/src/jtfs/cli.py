"""Command-line interface: ``jtfs <command> ...``.

Exit codes: 0 success, 1 validation failed, 2 configuration error, 3 data
error, 4 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import warnings
from contextlib import nullcontext
from pathlib import Path

import numpy as np
import scipy.fft as sfft

from . import io
from .config import Config, config_from_dict, load_config, parse_ms
from .errors import ConfigError, DataError, InvalidSpecError, NumericalError
from .filterbank import littlewood_paley
from .joint import extract_ridge, joint_grid, joint_transform
from .models import (BETA_SMALL, ExponentialChirp, FMModel, GaussianFormant,
                     HarmonicTVFilterModel, gen_fm, gen_tv_filtered, predict_fm,
                     predict_s1_tv, predict_s2_joint_tv, tv_admissible_bands)
from .plan import ScatteringPlan
from .reconstruction import OBJECTIVES, ScatteringOperator, analyze, reconstruct
from .scalogram import Signal, s1, scalogram
from .time_scattering import freq_scatter, log_compress, time_scatter

EXIT_FAIL, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 1, 2, 3, 4


# ---------------------------------------------------------------------------
# argument parsing

def _common(p):
    p.add_argument("--json", action="store_true", help="print a JSON report on stdout")
    p.add_argument("--config", help="JSON configuration file (flags take precedence)")
    p.add_argument("--threads", type=int, help="FFT worker threads (env SCT_THREADS)")


def _analysis(p):
    p.add_argument("--Q", type=int)
    p.add_argument("--T", dest="T_ms", type=parse_ms, help="averaging window, e.g. 32ms")
    p.add_argument("--K", dest="K_octaves", type=float)
    p.add_argument("--oversampling", type=int)
    p.add_argument("--padding", choices=("reflect", "periodic"))


def build_parser():
    ap = argparse.ArgumentParser(prog="jtfs", description="Time, frequency and joint "
                                 "time-frequency scattering of audio.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="WAV -> scattering coefficients (SCT1 tensor)")
    _common(p)
    _analysis(p)
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--transform", choices=("s1", "time", "time+freq", "joint"))
    p.add_argument("--log-eps", dest="log_eps", type=float)

    p = sub.add_parser("scalogram", help="WAV -> scalogram as PGM image or CSV")
    _common(p)
    _analysis(p)
    p.add_argument("input")
    p.add_argument("output", help="*.pgm or *.csv")

    p = sub.add_parser("reconstruct", help="WAV or tensor -> reconstructed WAV + loss CSV")
    _common(p)
    _analysis(p)
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--objective", choices=OBJECTIVES)
    p.add_argument("--iterations", type=int)
    p.add_argument("--step", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--tol", type=float)
    p.add_argument("--loss-csv", help="default: <output>.loss.csv")

    p = sub.add_parser("synth", help="synthesize a model signal (WAV + JSON truth)")
    msub = p.add_subparsers(dest="model", required=True)
    q = msub.add_parser("tvfilter")
    _common(q)
    q.add_argument("output")
    q.add_argument("--pitch-hz", type=float, default=200.0)
    q.add_argument("--formant-hz", type=float, default=1500.0)
    q.add_argument("--depth-hz", type=float, default=500.0)
    q.add_argument("--rate-hz", type=float, default=3.0)
    q.add_argument("--width-hz", type=float, default=300.0)
    q.add_argument("--duration", type=float, default=1.0)
    q.add_argument("--sample-rate", type=float, default=16000.0)
    q = msub.add_parser("fm")
    _common(q)
    q.add_argument("output")
    q.add_argument("--f0", type=float, default=400.0)
    q.add_argument("--gamma", type=float, default=2.0)
    q.add_argument("--partials", type=int, default=1)
    q.add_argument("--duration", type=float, default=1.0)
    q.add_argument("--sample-rate", type=float, default=16000.0)

    p = sub.add_parser("validate", help="run an oracle check and report")
    vsub = p.add_subparsers(dest="suite", required=True)
    q = vsub.add_parser("fm")
    _common(q)
    q.add_argument("--gamma", type=float, default=2.0)
    q.add_argument("--T", dest="T_ms", type=parse_ms, default=256.0)
    q = vsub.add_parser("tvfilter")
    _common(q)
    q.add_argument("--pitch-hz", type=float, default=200.0)
    q = vsub.add_parser("frame")
    _common(q)
    q.add_argument("--sample-rate", type=float, default=16000.0)
    _analysis(q)

    p = sub.add_parser("filters", help="dump filter-bank geometry and frame bounds")
    _common(p)
    _analysis(p)
    p.add_argument("--sample-rate", type=float, default=16000.0)
    p.add_argument("--n-samples", type=int, default=16000)
    p.add_argument("--bank", choices=("first", "second", "quefrency"), default="first")
    p.add_argument("--out", help="CSV path (default: stdout)")
    return ap


def _config(args) -> Config:
    cfg = load_config(args.config) if getattr(args, "config", None) else Config()
    flags = {k: getattr(args, k) for k in ("Q", "T_ms", "K_octaves", "oversampling",
                                           "padding", "transform", "log_eps")
             if getattr(args, k, None) is not None}
    recon = {k: getattr(args, k) for k in ("objective", "iterations", "step", "seed", "tol")
             if getattr(args, k, None) is not None}
    if recon:
        flags["recon"] = recon
    return config_from_dict(flags, cfg)


def _plan(cfg: Config, n, sr):
    return ScatteringPlan(n, sr, cfg.Q, cfg.T, cfg.K_octaves, cfg.oversampling, cfg.padding)


def _geometry(plan):
    return {"T_ms": plan.T * 1000, "T_samples": plan.T_samples, "hop_samples": plan.hop,
            "Q": plan.Q, "K": plan.K, "oversampling": plan.oversampling,
            "sample_rate": plan.sample_rate}


# ---------------------------------------------------------------------------
# commands

def cmd_analyze(args, cfg):
    x = io.read_wav(args.input)
    plan = _plan(cfg, len(x), x.sample_rate)
    if cfg.transform == "s1":
        c = ScatteringOperator(plan, "s1").coeffs(x.samples)
    elif cfg.transform == "joint":
        c = joint_transform(x, plan=plan)
    else:
        c = time_scatter(x, plan=plan)
        if cfg.transform == "time+freq":
            c = freq_scatter(c, K=cfg.K_octaves)
    if cfg.log_eps is not None:
        c = log_compress(c, cfg.log_eps)
    io.save_coeffs(args.output, c)
    return {"output": args.output, "transform": cfg.transform, "frames": c.n_frames,
            "s1_bands": int(c.s1.values.shape[1]), "s2_paths": len(c.paths),
            **_geometry(plan)}


def cmd_scalogram(args, cfg):
    x = io.read_wav(args.input)
    plan = _plan(cfg, len(x), x.sample_rate)
    sc = scalogram(x, plan.bank1, plan.oversampling, plan.padding)
    out = Path(args.output)
    if out.suffix.lower() == ".csv":
        io.write_csv(out, sc.values)
    elif out.suffix.lower() == ".pgm":
        io.write_pgm(out, io.scalogram_image(sc.values))
    else:
        raise ConfigError(f"scalogram output must end in .pgm or .csv, got {out.name}")
    return {"output": str(out), "frames": sc.n_frames, "bands": sc.n_bands,
            "hop_s": sc.hop, **_geometry(plan)}


def cmd_reconstruct(args, cfg):
    r = cfg.recon
    if args.input.lower().endswith(".wav"):
        x = io.read_wav(args.input)
        target = analyze(x, r.objective, cfg.Q, cfg.T, cfg.K_octaves, cfg.oversampling,
                         cfg.padding)
        objective = r.objective
    else:
        target = io.load_coeffs(args.input)
        if target.meta.get("log"):
            raise ConfigError("cannot reconstruct from log-compressed coefficients")
        objective = args.objective or None
    y, state = reconstruct(target, iterations=r.iterations, seed=r.seed, step=r.step,
                           objective=objective, tol=r.tol)
    io.write_wav(args.output, y, encoding="float32")
    loss_csv = args.loss_csv or args.output + ".loss.csv"
    io.write_csv(loss_csv, np.column_stack([np.arange(len(state.loss_history)),
                                            state.loss_history]),
                 header=["accepted_step", "loss"])
    return {"output": args.output, "loss_csv": loss_csv, "objective": state.objective,
            "iterations": state.iteration, "accepted": len(state.loss_history) - 1,
            "rejected": state.rejected, "initial_loss": state.loss_history[0],
            "final_loss": state.loss_history[-1], "loss_ratio": state.loss_ratio,
            "stopped": state.stopped, "seed": state.seed}


def _peak_normalize(x):
    peak = float(np.max(np.abs(x.samples)))
    g = 0.9 / peak if peak > 0 else 1.0
    return Signal(x.samples * g, x.sample_rate), g


def cmd_synth(args, cfg):
    sidecar = {"model": args.model, "sample_rate": args.sample_rate}
    if args.model == "tvfilter":
        h = GaussianFormant(args.formant_hz, args.depth_hz, args.rate_hz, args.width_hz)
        m = HarmonicTVFilterModel(2 * np.pi * args.pitch_hz, h, args.duration, args.sample_rate)
        x = gen_tv_filtered(m)
        tt = np.arange(0, args.duration, 0.01)
        sidecar.update(xi=m.xi, pitch_hz=args.pitch_hz, formant_times=tt.tolist(),
                       formant_hz=h.center(tt).tolist(), width_hz=args.width_hz)
    else:
        m = FMModel(ExponentialChirp(args.f0, args.gamma), args.duration, args.sample_rate,
                    args.partials)
        x = gen_fm(m)
        tt = np.arange(0, args.duration, 0.01)
        sidecar.update(f0=args.f0, gamma=args.gamma, partials=args.partials,
                       times=tt.tolist(),
                       inst_freq_hz=(m.theta.dtheta(tt) / (2 * np.pi)).tolist())
    x, gain = _peak_normalize(x)
    sidecar["gain"] = gain
    io.write_wav(args.output, x, encoding="float32")
    Path(args.output + ".json").write_text(json.dumps(sidecar, indent=1))
    return {"output": args.output, "samples": len(x), "gain": gain}


def validate_fm(gamma, T_ms=256.0, sample_rate=16000.0, duration=1.0, f_low=400.0):
    """Median ridge slope of an exponential chirp vs ``theta''/theta' = gamma``."""
    f0 = f_low if gamma >= 0 else f_low * np.exp(-gamma * duration)
    m = FMModel(ExponentialChirp(f0, gamma), duration, sample_rate)
    x = gen_fm(m)
    plan = ScatteringPlan(len(x), sample_rate, 8, T_ms / 1000, 4)
    measured = extract_ridge(joint_transform(x, plan=plan)).median_slope()
    predicted = float(np.median(predict_fm(m, plan.bank1).slope))
    if gamma == 0:
        ok = abs(measured) <= 0.5
    else:
        ok = np.sign(measured) == np.sign(gamma) and 0.5 <= measured / gamma <= 2.0
    return {"suite": "fm", "gamma": gamma, "measured_slope": measured,
            "predicted_slope": predicted, "T_ms": plan.T * 1000, "pass": bool(ok)}


def validate_tvfilter(pitch_hz=200.0, sample_rate=16000.0, duration=1.0):
    """First-order and small-quefrency joint correlations with the filter oracle."""
    m = HarmonicTVFilterModel(2 * np.pi * pitch_hz, GaussianFormant(), duration, sample_rate)
    x = gen_tv_filtered(m)
    p1 = ScatteringPlan(len(x), sample_rate, 8, 0.032, 4)
    meas = s1(scalogram(x, p1.bank1), p1.bank1).values
    pred = predict_s1_tv(m, p1.bank1).values
    ok1 = tv_admissible_bands(m, p1.bank1)
    r1 = float(np.corrcoef(meas[:, ok1].ravel(), pred[:, ok1].ravel())[0, 1])
    p2 = ScatteringPlan(len(x), sample_rate, 8, 0.256, 4)
    grid, _ = joint_grid(joint_transform(x, plan=p2))
    pred2, wav = predict_s2_joint_tv(m, p2)
    ok2 = tv_admissible_bands(m, p2.bank1)
    chans = []
    for c, w in enumerate(wav):
        if w.beta_sign == 0 or w.beta > BETA_SMALL:
            continue
        r = np.corrcoef(grid[:, ok2, c].ravel(), pred2[:, ok2, c].ravel())[0, 1]
        chans.append({"alpha_hz": w.alpha / (2 * np.pi), "beta": w.signed_beta, "r": float(r)})
    ok = r1 >= 0.95 and all(c["r"] >= 0.8 for c in chans)
    return {"suite": "tvfilter", "s1_r": r1, "s1_bands": int(ok1.sum()),
            "joint_channels": chans, "pass": bool(ok)}


def validate_frame(sample_rate=16000.0, cfg: Config | None = None):
    """Littlewood-Paley bounds of the three 1-D banks and the joint half-plane."""
    from .filterbank import angular_grid, covered_band
    from .joint import joint_littlewood_paley
    cfg = cfg or Config()
    plan = _plan(cfg, int(sample_rate), sample_rate)

    def bound(bank):
        lo, hi = covered_band(bank)
        w = angular_grid(bank.spec.n_fft, bank.spec.sample_rate)
        d = abs(w[1] - w[0]) / 2
        lp = littlewood_paley(bank)[(w >= lo - d) & (w <= hi + d)]
        return float(lp.min()), float(lp.max())

    out = {name: bound(b) for name, b in
           (("first", plan.bank1), ("second", plan.bank2), ("quefrency", plan.qbank))}
    J, om, eta = joint_littlewood_paley(plan.joint_wavelets, plan.T, plan.hop_seconds, plan.Q)
    lo, hi = covered_band(plan.bank2)
    qlo, qhi = covered_band(plan.qbank)
    dt, dq = abs(om[1] - om[0]) / 2, abs(eta[1] - eta[0]) / 2
    mt = (om >= lo - dt) & (om <= hi + dt)
    mq = (np.abs(eta) >= qlo - dq) & (np.abs(eta) <= qhi + dq)
    sub = J[np.ix_(mt, mq)]
    out["joint"] = (float(sub.min()), float(sub.max()))
    ok = all(0.8 <= out[k][0] and out[k][1] <= 1.001 for k in ("first", "second", "quefrency"))
    ok = ok and 0.75 <= out["joint"][0] and out["joint"][1] <= 1.001
    return {"suite": "frame", **{k: {"min": v[0], "max": v[1]} for k, v in out.items()},
            **_geometry(plan), "pass": bool(ok)}


def cmd_validate(args, cfg):
    if args.suite == "fm":
        return validate_fm(args.gamma, args.T_ms)
    if args.suite == "tvfilter":
        return validate_tvfilter(args.pitch_hz)
    return validate_frame(args.sample_rate, cfg)


def cmd_filters(args, cfg):
    plan = _plan(cfg, args.n_samples, args.sample_rate)
    bank = {"first": plan.bank1, "second": plan.bank2, "quefrency": plan.qbank}[args.bank]
    rows, summary = io.filterbank_table(bank)
    header = ["index", "center", "bandwidth", "linear_lowband"]
    if args.out:
        io.write_csv(args.out, rows, header)
    elif not args.json:
        print(",".join(header))
        for r in rows:
            print(",".join(repr(float(v)) for v in r))
    return {"bank": args.bank, **summary, **_geometry(plan),
            "filters": [dict(zip(header, map(float, r))) for r in rows]}


COMMANDS = {"analyze": cmd_analyze, "scalogram": cmd_scalogram, "reconstruct": cmd_reconstruct,
            "synth": cmd_synth, "validate": cmd_validate, "filters": cmd_filters}


def _workers(args):
    n = getattr(args, "threads", None)
    if n is None and os.environ.get("SCT_THREADS"):
        try:
            n = int(os.environ["SCT_THREADS"])
        except ValueError:
            raise ConfigError("SCT_THREADS must be an integer") from None
    if n is not None and n < 1:
        raise ConfigError("--threads must be >= 1")
    return n


def cli_run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _config(args)
        n = _workers(args)
        with sfft.set_workers(n) if n else nullcontext():
            with warnings.catch_warnings():
                warnings.simplefilter("always")
                report = COMMANDS[args.command](args, cfg)
    except (ConfigError, InvalidSpecError) as exc:
        print(f"jtfs: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"jtfs: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as exc:
        print(f"jtfs: numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"jtfs: data error: {exc.strerror}: {exc.filename}", file=sys.stderr)
        return EXIT_DATA
    if args.json:
        print(json.dumps(report, indent=1, sort_keys=True))
    if args.command == "validate" and not report["pass"]:
        return EXIT_FAIL
    return 0


def main():
    sys.exit(cli_run())


if __name__ == "__main__":
    main()
