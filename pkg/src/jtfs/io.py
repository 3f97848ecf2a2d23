"""WAV audio, coefficient tensor files and plain-text exports."""
from __future__ import annotations

import json
import struct
import warnings
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataError, ParseError, UnsupportedFormatError
from .filterbank import FilterBank, angular_grid, covered_band, littlewood_paley
from .scalogram import S1Coeffs, Signal
from .time_scattering import ScatteringCoeffs, ScatteringPath

__all__ = ["read_wav", "write_wav", "write_tensor", "read_tensor", "save_coeffs",
           "load_coeffs", "write_csv", "write_pgm", "read_pgm", "scalogram_image",
           "filterbank_table"]

_PCM, _FLOAT = 1, 3
_EXTENSIBLE = 0xFFFE


# ---------------------------------------------------------------------------
# WAV

def _chunks(data):
    """Yield ``(chunk_id, offset_of_payload, payload)`` after the RIFF header."""
    pos = 12
    while pos < len(data):
        if pos + 8 > len(data):
            raise ParseError(f"truncated chunk header at byte {pos}")
        cid, size = struct.unpack_from("<4sI", data, pos)
        start = pos + 8
        if start + size > len(data):
            raise ParseError(f"chunk {cid.decode('latin-1')!r} at byte {pos} declares "
                             f"{size} bytes but only {len(data) - start} remain")
        yield cid, start, data[start:start + size]
        pos = start + size + (size & 1)


def read_wav(path) -> Signal:
    """Read a PCM 16-bit or IEEE float 32-bit WAV file.

    Samples are scaled to ``[-1, 1]``; multichannel files are averaged to mono
    with a warning.

    Raises
    ------
    ParseError
        Malformed RIFF structure; the message gives the byte offset or the
        missing chunk.
    UnsupportedFormatError
        Any other codec or bit depth.
    """
    data = Path(path).read_bytes()
    if len(data) < 12:
        raise ParseError(f"file is {len(data)} bytes, too short for a RIFF header at byte 0")
    riff, _, wave = struct.unpack_from("<4sI4s", data, 0)
    if riff != b"RIFF":
        raise ParseError("missing 'RIFF' signature at byte 0")
    if wave != b"WAVE":
        raise ParseError("missing 'WAVE' form type at byte 8")
    fmt = payload = None
    for cid, off, body in _chunks(data):
        if cid == b"fmt ":
            if len(body) < 16:
                raise ParseError(f"'fmt ' chunk at byte {off - 8} is {len(body)} bytes, need 16")
            fmt = struct.unpack_from("<HHIIHH", body, 0)
            if fmt[0] == _EXTENSIBLE and len(body) >= 26:
                fmt = (struct.unpack_from("<H", body, 24)[0],) + fmt[1:]
        elif cid == b"data":
            payload = body
    if fmt is None:
        raise ParseError("missing 'fmt ' chunk")
    if payload is None:
        raise ParseError("missing 'data' chunk")
    code, channels, rate, _, align, bits = fmt
    if channels < 1 or rate < 1:
        raise ParseError(f"'fmt ' chunk declares {channels} channels at {rate} Hz")
    if code == _PCM and bits == 16:
        x = np.frombuffer(payload[: len(payload) // 2 * 2], dtype="<i2") / 32768.0
    elif code == _FLOAT and bits == 32:
        x = np.frombuffer(payload[: len(payload) // 4 * 4], dtype="<f4").astype(float)
    else:
        raise UnsupportedFormatError(f"unsupported WAV encoding: format {code}, {bits} bits")
    x = x[: x.size // channels * channels].reshape(-1, channels)
    if channels > 1:
        warnings.warn(f"downmixing {channels} channels to mono", RuntimeWarning, stacklevel=2)
    x = x.mean(axis=1)
    if x.size == 0:
        raise DataError("WAV file holds no samples")
    return Signal(x, float(rate))


def write_wav(path, signal: Signal, encoding="pcm16"):
    """Write mono WAV; ``encoding`` is ``'pcm16'`` (clipped to [-1, 1]) or ``'float32'``."""
    rate = int(round(signal.sample_rate))
    if abs(rate - signal.sample_rate) > 1e-9:
        raise ConfigError(f"WAV needs an integer sample rate, got {signal.sample_rate}")
    x = signal.samples
    if encoding == "pcm16":
        q = np.round(np.clip(x, -1.0, 32767 / 32768) * 32768.0).astype("<i2")
        code, bits = _PCM, 16
    elif encoding == "float32":
        q = x.astype("<f4")
        code, bits = _FLOAT, 32
    else:
        raise ConfigError(f"unknown WAV encoding {encoding!r}")
    body = q.tobytes()
    align = bits // 8
    fmt = struct.pack("<HHIIHH", code, 1, rate, rate * align, align, bits)
    out = b"".join([b"RIFF", struct.pack("<I", 4 + 8 + len(fmt) + 8 + len(body) + (len(body) & 1)),
                    b"WAVE", b"fmt ", struct.pack("<I", len(fmt)), fmt,
                    b"data", struct.pack("<I", len(body)), body, b"\0" * (len(body) & 1)])
    Path(path).write_bytes(out)


# ---------------------------------------------------------------------------
# tensor files

_MAGIC = b"SCT1"


def _json_default(v):
    if isinstance(v, np.generic):
        return v.item()
    if isinstance(v, np.ndarray):
        return v.tolist()
    raise TypeError(f"cannot serialize {type(v).__name__}")


def _sidecar(path):
    return Path(str(path) + ".json")


def write_tensor(path, array, sidecar=None):
    """``SCT1`` file: magic, u32 rank, u32 dims, float64 row-major payload.

    ``sidecar`` (a JSON-serializable dict) is written next to it as
    ``<path>.json``.
    """
    a = np.ascontiguousarray(array, dtype="<f8")
    head = _MAGIC + struct.pack(f"<I{a.ndim}I", a.ndim, *a.shape)
    Path(path).write_bytes(head + a.tobytes())
    if sidecar is not None:
        _sidecar(path).write_text(json.dumps(sidecar, indent=1, sort_keys=True,
                                             default=_json_default))


def read_tensor(path):
    """Return ``(array, sidecar_or_None)``."""
    data = Path(path).read_bytes()
    if data[:4] != _MAGIC:
        raise ParseError("missing 'SCT1' magic at byte 0")
    if len(data) < 8:
        raise ParseError("truncated rank field at byte 4")
    (rank,) = struct.unpack_from("<I", data, 4)
    end = 8 + 4 * rank
    if len(data) < end:
        raise ParseError(f"truncated dims at byte 8: need {4 * rank} bytes")
    dims = struct.unpack_from(f"<{rank}I", data, 8)
    n = int(np.prod(dims, dtype=np.int64))
    if len(data) - end != 8 * n:
        raise ParseError(f"payload at byte {end} holds {len(data) - end} bytes, "
                         f"dims {dims} need {8 * n}")
    a = np.frombuffer(data, dtype="<f8", offset=end).reshape(dims).copy()
    side = _sidecar(path)
    meta = json.loads(side.read_text()) if side.exists() else None
    return a, meta


def save_coeffs(path, coeffs: ScatteringCoeffs):
    """Store ``[frame, channel]`` with channels = S1 bands, then S2 paths."""
    s1 = coeffs.s1
    first = [ScatteringPath(1, float(2 * np.pi * 2.0 ** c)).to_dict()
             for c in s1.band_log_centers]
    side = {"axes": ["frame", "channel"], "n_s1": int(s1.values.shape[1]),
            "hop": s1.hop, "band_log_centers": [float(v) for v in s1.band_log_centers],
            "paths": first + [p.to_dict() for p in coeffs.paths],
            "meta": {k: v for k, v in coeffs.meta.items()}}
    write_tensor(path, np.concatenate([s1.values, coeffs.s2], axis=1), side)


def load_coeffs(path) -> ScatteringCoeffs:
    a, side = read_tensor(path)
    if side is None:
        raise ParseError(f"missing sidecar {_sidecar(path).name}")
    try:
        n1 = side["n_s1"]
        paths = [ScatteringPath.from_dict(p) for p in side["paths"][n1:]]
        s1 = S1Coeffs(a[:, :n1], side["hop"], np.asarray(side["band_log_centers"]))
        meta = side.get("meta", {})
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"malformed sidecar: {exc}") from None
    if a.ndim != 2 or len(side["paths"]) != a.shape[1]:
        raise ParseError("sidecar path count does not match the channel dimension")
    return ScatteringCoeffs(s1, a[:, n1:], paths, meta)


# ---------------------------------------------------------------------------
# text and image exports

def write_csv(path, rows, header=None):
    """Plain CSV with '.' decimals and '\\n' row ends, independent of locale."""
    lines = [",".join(header)] if header else []
    for r in np.atleast_2d(rows):
        lines.append(",".join(repr(float(v)) for v in r))
    Path(path).write_text("\n".join(lines) + "\n")


def scalogram_image(values, eps=1e-3):
    """8-bit log image with rows = bands (highest frequency on top), columns = frames."""
    v = np.asarray(values, dtype=float).T
    floor = eps * v.max() if v.size and v.max() > 0 else 1.0
    lv = np.log(v + floor)
    lo, hi = lv.min(), lv.max()
    if hi <= lo:
        return np.zeros(lv.shape, dtype=np.uint8)
    return np.round(255 * (lv - lo) / (hi - lo)).astype(np.uint8)


def write_pgm(path, image):
    img = np.asarray(image, dtype=np.uint8)
    if img.ndim != 2:
        raise ConfigError("PGM images must be 2-D")
    h, w = img.shape
    Path(path).write_bytes(f"P5\n{w} {h}\n255\n".encode() + img.tobytes())


def read_pgm(path):
    data = Path(path).read_bytes()
    parts = data.split(maxsplit=4)
    if len(parts) < 5 or parts[0] != b"P5":
        raise ParseError("missing 'P5' header at byte 0")
    w, h, maxval = int(parts[1]), int(parts[2]), int(parts[3])
    if maxval != 255:
        raise UnsupportedFormatError("only 8-bit PGM is supported")
    body = data[len(data) - w * h:]
    return np.frombuffer(body, dtype=np.uint8).reshape(h, w).copy()


def filterbank_table(bank: FilterBank):
    """Rows ``(index, center_hz, bandwidth_hz, kind_code)`` plus LP diagnostics.

    ``kind_code`` is 0 for geometric and 1 for linear low-band filters.
    Returns ``(rows, summary)`` where ``summary`` holds the Littlewood-Paley
    minimum and maximum over the covered band.
    """
    unit = 2 * np.pi if bank.spec.axis == "time" else 1.0
    rows = [(i, f.center / unit, f.bandwidth / unit, 0 if f.kind == "geometric" else 1)
            for i, f in enumerate(bank.filters)]
    lp = littlewood_paley(bank)
    lo, hi = covered_band(bank)
    w = angular_grid(bank.spec.n_fft, bank.spec.sample_rate)
    m = (w >= lo) & (w <= hi)
    summary = {"lp_min": float(lp[m].min()) if m.any() else None,
               "lp_max": float(lp.max()), "covered": [lo / (2 * np.pi), hi / (2 * np.pi)],
               "n_filters": len(bank)}
    return rows, summary
