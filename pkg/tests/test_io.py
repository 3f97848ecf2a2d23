import json
import struct

import numpy as np
import pytest

from jtfs.errors import ConfigError, DataError, ParseError, UnsupportedFormatError
from jtfs.filterbank import FilterBankSpec, build_filterbank
from jtfs.io import (filterbank_table, load_coeffs, read_pgm, read_tensor, read_wav,
                     save_coeffs, scalogram_image, write_csv, write_pgm, write_tensor, write_wav)
from jtfs.joint import joint_transform
from jtfs.scalogram import Signal


def wav_bytes(code, channels, rate, bits, payload, extra_chunks=b""):
    align = channels * bits // 8
    fmt = struct.pack("<HHIIHH", code, channels, rate, rate * align, align, bits)
    body = (b"WAVE" + extra_chunks + b"fmt " + struct.pack("<I", len(fmt)) + fmt
            + b"data" + struct.pack("<I", len(payload)) + payload)
    return b"RIFF" + struct.pack("<I", len(body)) + body


class TestWav:
    def test_pcm16_round_trip(self, tmp_path, rng):
        x = rng.uniform(-1, 1, 1001)
        write_wav(tmp_path / "a.wav", Signal(x, 8000.0))
        y = read_wav(tmp_path / "a.wav")
        assert y.sample_rate == 8000.0
        np.testing.assert_allclose(y.samples, x, atol=1 / 32768)

    def test_float32_round_trip(self, tmp_path, rng):
        x = rng.standard_normal(500)
        write_wav(tmp_path / "a.wav", Signal(x, 22050.0), encoding="float32")
        y = read_wav(tmp_path / "a.wav")
        np.testing.assert_array_equal(y.samples, x.astype(np.float32))

    def test_pcm16_known_bytes(self, tmp_path):
        p = tmp_path / "k.wav"
        p.write_bytes(wav_bytes(1, 1, 8000, 16, struct.pack("<3h", 0, 16384, -32768)))
        np.testing.assert_array_equal(read_wav(p).samples, [0.0, 0.5, -1.0])

    def test_skips_unknown_chunks(self, tmp_path):
        p = tmp_path / "k.wav"
        extra = b"LIST" + struct.pack("<I", 3) + b"abc\0"
        p.write_bytes(wav_bytes(1, 1, 8000, 16, struct.pack("<2h", 1, 2), extra))
        assert len(read_wav(p)) == 2

    def test_stereo_downmix(self, tmp_path):
        p = tmp_path / "s.wav"
        p.write_bytes(wav_bytes(1, 2, 8000, 16, struct.pack("<4h", 16384, 0, 0, -16384)))
        with pytest.warns(RuntimeWarning, match="downmixing 2"):
            y = read_wav(p)
        np.testing.assert_array_equal(y.samples, [0.25, -0.25])

    def test_truncated_header(self, tmp_path):
        p = tmp_path / "t.wav"
        p.write_bytes(b"RIFF\0\0")
        with pytest.raises(ParseError, match="byte 0"):
            read_wav(p)

    def test_truncated_chunk(self, tmp_path):
        p = tmp_path / "t.wav"
        p.write_bytes(wav_bytes(1, 1, 8000, 16, b"\0" * 20)[:-6])
        with pytest.raises(ParseError, match="declares 20 bytes"):
            read_wav(p)

    def test_missing_data(self, tmp_path):
        p = tmp_path / "t.wav"
        fmt = struct.pack("<HHIIHH", 1, 1, 8000, 16000, 2, 16)
        body = b"WAVE" + b"fmt " + struct.pack("<I", 16) + fmt
        p.write_bytes(b"RIFF" + struct.pack("<I", len(body)) + body)
        with pytest.raises(ParseError, match="'data'"):
            read_wav(p)

    def test_not_riff(self, tmp_path):
        p = tmp_path / "t.wav"
        p.write_bytes(b"OggS" + b"\0" * 40)
        with pytest.raises(ParseError, match="RIFF"):
            read_wav(p)

    @pytest.mark.parametrize("code,bits", [(1, 24), (1, 8), (3, 64), (2, 16)])
    def test_unsupported(self, tmp_path, code, bits):
        p = tmp_path / "u.wav"
        p.write_bytes(wav_bytes(code, 1, 8000, bits, b"\0" * 24))
        with pytest.raises(UnsupportedFormatError):
            read_wav(p)

    def test_empty(self, tmp_path):
        p = tmp_path / "e.wav"
        p.write_bytes(wav_bytes(1, 1, 8000, 16, b""))
        with pytest.raises(DataError):
            read_wav(p)

    def test_write_errors(self, tmp_path):
        with pytest.raises(ConfigError):
            write_wav(tmp_path / "a.wav", Signal(np.zeros(4), 8000.5))
        with pytest.raises(ConfigError):
            write_wav(tmp_path / "a.wav", Signal(np.zeros(4), 8000.0), encoding="mp3")

    def test_clipping(self, tmp_path):
        write_wav(tmp_path / "c.wav", Signal(np.array([2.0, -2.0]), 8000.0))
        np.testing.assert_allclose(read_wav(tmp_path / "c.wav").samples, [32767 / 32768, -1.0])


class TestTensor:
    def test_layout(self, tmp_path):
        a = np.arange(6.0).reshape(2, 3)
        write_tensor(tmp_path / "t.sct", a)
        raw = (tmp_path / "t.sct").read_bytes()
        assert raw[:4] == b"SCT1"
        assert struct.unpack_from("<3I", raw, 4) == (2, 2, 3)
        np.testing.assert_array_equal(np.frombuffer(raw[16:], "<f8"), np.arange(6.0))
        b, side = read_tensor(tmp_path / "t.sct")
        assert side is None
        np.testing.assert_array_equal(a, b)

    def test_coeffs_round_trip(self, tmp_path, rng):
        c = joint_transform(rng.standard_normal(4000), T=0.032, sample_rate=8000.0)
        save_coeffs(tmp_path / "c.sct", c)
        d = load_coeffs(tmp_path / "c.sct")
        np.testing.assert_array_equal(d.s1.values, c.s1.values)
        np.testing.assert_array_equal(d.s2, c.s2)
        assert d.paths == c.paths
        assert d.meta["transform_kind"] == "joint"
        side = json.loads((tmp_path / "c.sct.json").read_text())
        assert side["axes"] == ["frame", "channel"]

    def test_bad_magic(self, tmp_path):
        (tmp_path / "b.sct").write_bytes(b"SCT2" + b"\0" * 8)
        with pytest.raises(ParseError, match="magic"):
            read_tensor(tmp_path / "b.sct")

    def test_truncated_payload(self, tmp_path):
        write_tensor(tmp_path / "t.sct", np.ones((3, 3)))
        raw = (tmp_path / "t.sct").read_bytes()
        (tmp_path / "t.sct").write_bytes(raw[:-8])
        with pytest.raises(ParseError, match="byte 16"):
            read_tensor(tmp_path / "t.sct")

    def test_missing_sidecar(self, tmp_path):
        write_tensor(tmp_path / "t.sct", np.ones((3, 3)))
        with pytest.raises(ParseError, match="sidecar"):
            load_coeffs(tmp_path / "t.sct")

    def test_sidecar_mismatch(self, tmp_path):
        write_tensor(tmp_path / "t.sct", np.ones((3, 3)),
                     {"n_s1": 1, "hop": 0.016, "band_log_centers": [8.0], "paths": []})
        with pytest.raises(ParseError):
            load_coeffs(tmp_path / "t.sct")


class TestExports:
    def test_csv(self, tmp_path):
        write_csv(tmp_path / "a.csv", [[1.5, 2.0], [0.1, -3.0]], header=["a", "b"])
        assert (tmp_path / "a.csv").read_text() == "a,b\n1.5,2.0\n0.1,-3.0\n"

    def test_pgm_round_trip(self, tmp_path, rng):
        img = rng.integers(0, 256, (7, 11)).astype(np.uint8)
        write_pgm(tmp_path / "a.pgm", img)
        assert (tmp_path / "a.pgm").read_bytes().startswith(b"P5\n11 7\n255\n")
        np.testing.assert_array_equal(read_pgm(tmp_path / "a.pgm"), img)
        with pytest.raises(ConfigError):
            write_pgm(tmp_path / "b.pgm", np.zeros(3))

    def test_pgm_bad_header(self, tmp_path):
        (tmp_path / "a.pgm").write_bytes(b"P2\n1 1\n255\n0")
        with pytest.raises(ParseError):
            read_pgm(tmp_path / "a.pgm")

    def test_scalogram_image(self):
        v = np.array([[1.0, 0.0], [1.0, 0.5]])
        img = scalogram_image(v)
        assert img.shape == (2, 2) and img.dtype == np.uint8
        assert img.max() == 255 and img.min() == 0
        assert not scalogram_image(np.zeros((3, 2))).any()

    def test_filterbank_table(self):
        bank = build_filterbank(FilterBankSpec(16000.0, 8, 0.032, 16384))
        rows, summary = filterbank_table(bank)
        assert len(rows) == summary["n_filters"] == len(bank)
        assert rows[0][1] == pytest.approx(bank.centers[0] / (2 * np.pi))
        assert 0.8 <= summary["lp_min"] <= summary["lp_max"] <= 1.001
