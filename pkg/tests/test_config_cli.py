import json
import subprocess
import sys

import numpy as np
import pytest

from jtfs.cli import cli_run
from jtfs.config import Config, ReconConfig, config_from_dict, load_config, parse_ms
from jtfs.errors import ConfigError
from jtfs.io import load_coeffs, read_wav, save_coeffs, write_wav
from jtfs.reconstruction import analyze
from jtfs.scalogram import Signal


class TestConfig:
    def test_defaults(self):
        c = Config()
        assert (c.Q, c.T, c.K_octaves, c.oversampling) == (8, 0.032, 4.0, 2)

    @pytest.mark.parametrize("kw", [{"Q": 0}, {"Q": 2.5}, {"T_ms": 0}, {"K_octaves": 0.5},
                                    {"oversampling": -1}, {"transform": "wavelet"},
                                    {"log_eps": 0.0}, {"padding": "zero"}])
    def test_invalid(self, kw):
        with pytest.raises(ConfigError):
            Config(**kw)

    @pytest.mark.parametrize("kw", [{"objective": "s2"}, {"iterations": 0}, {"step": 0},
                                    {"tol": -1.0}])
    def test_invalid_recon(self, kw):
        with pytest.raises(ConfigError):
            ReconConfig(**kw)

    def test_unknown_keys(self):
        with pytest.raises(ConfigError, match="unknown config keys: bogus"):
            config_from_dict({"bogus": 1})
        with pytest.raises(ConfigError, match="unknown recon keys"):
            config_from_dict({"recon": {"lr": 1}})
        with pytest.raises(ConfigError):
            config_from_dict([1, 2])

    def test_overlay(self):
        base = config_from_dict({"Q": 4, "recon": {"iterations": 7}})
        c = config_from_dict({"recon": {"seed": 3}}, base)
        assert (c.Q, c.recon.iterations, c.recon.seed) == (4, 7, 3)

    def test_load(self, tmp_path):
        (tmp_path / "c.json").write_text('{"T_ms": 64}')
        assert load_config(tmp_path / "c.json").T == 0.064
        (tmp_path / "bad.json").write_text("{")
        with pytest.raises(ConfigError):
            load_config(tmp_path / "bad.json")
        with pytest.raises(ConfigError, match="cannot read"):
            load_config(tmp_path / "missing.json")

    @pytest.mark.parametrize("text,ms", [("32ms", 32.0), ("0.256s", 256.0), ("16", 16.0),
                                         (" 1e2 ms", 100.0)])
    def test_parse_ms(self, text, ms):
        assert parse_ms(text) == pytest.approx(ms)

    @pytest.mark.parametrize("text", ["", "ms", "32 min", "-5ms"])
    def test_parse_ms_rejects(self, text):
        with pytest.raises(ConfigError):
            parse_ms(text)


@pytest.fixture(scope="module")
def wav(tmp_path_factory):
    p = tmp_path_factory.mktemp("cli") / "noise.wav"
    write_wav(p, Signal(0.3 * np.random.default_rng(0).standard_normal(8000), 8000.0))
    return p


def run_json(argv, capsys):
    code = cli_run(argv + ["--json"])
    return code, json.loads(capsys.readouterr().out)


class TestCli:
    def test_analyze(self, wav, tmp_path, capsys):
        out = tmp_path / "c.sct"
        code, rep = run_json(["analyze", str(wav), str(out), "--transform", "joint"], capsys)
        assert code == 0
        c = load_coeffs(out)
        assert rep["s2_paths"] == len(c.paths)
        assert rep["hop_samples"] == 32 and rep["T_samples"] == 256
        ref = analyze(read_wav(wav), "joint_s1s2", T=0.032)
        np.testing.assert_allclose(c.s2, ref.s2, atol=1e-12)

    def test_flags_override_config(self, wav, tmp_path, capsys):
        cfg = tmp_path / "c.json"
        cfg.write_text('{"T_ms": 64, "Q": 4}')
        code, rep = run_json(["analyze", str(wav), str(tmp_path / "c.sct"), "--config",
                              str(cfg), "--T", "16ms"], capsys)
        assert code == 0
        assert rep["T_ms"] == 16.0 and rep["Q"] == 4

    def test_deterministic_bytes(self, wav, tmp_path):
        for name in ("a", "b"):
            assert cli_run(["analyze", str(wav), str(tmp_path / f"{name}.sct"),
                            "--transform", "time+freq", "--log-eps", "1e-3"]) == 0
        assert (tmp_path / "a.sct").read_bytes() == (tmp_path / "b.sct").read_bytes()
        assert (tmp_path / "a.sct.json").read_text() == (tmp_path / "b.sct.json").read_text()

    def test_threads_do_not_change_output(self, wav, tmp_path, monkeypatch):
        assert cli_run(["analyze", str(wav), str(tmp_path / "a.sct"), "--threads", "2"]) == 0
        monkeypatch.setenv("SCT_THREADS", "1")
        assert cli_run(["analyze", str(wav), str(tmp_path / "b.sct")]) == 0
        assert (tmp_path / "a.sct").read_bytes() == (tmp_path / "b.sct").read_bytes()

    def test_bad_threads(self, wav, tmp_path, monkeypatch, capsys):
        assert cli_run(["analyze", str(wav), str(tmp_path / "a.sct"), "--threads", "0"]) == 2
        monkeypatch.setenv("SCT_THREADS", "many")
        assert cli_run(["analyze", str(wav), str(tmp_path / "a.sct")]) == 2
        assert "SCT_THREADS" in capsys.readouterr().err

    @pytest.mark.parametrize("ext", ["pgm", "csv"])
    def test_scalogram(self, wav, tmp_path, capsys, ext):
        code, rep = run_json(["scalogram", str(wav), str(tmp_path / f"s.{ext}")], capsys)
        assert code == 0 and rep["frames"] == 8000 // 32
        assert (tmp_path / f"s.{ext}").stat().st_size > 0

    def test_scalogram_bad_suffix(self, wav, tmp_path):
        assert cli_run(["scalogram", str(wav), str(tmp_path / "s.png")]) == 2

    def test_reconstruct(self, wav, tmp_path, capsys):
        out = tmp_path / "r.wav"
        code, rep = run_json(["reconstruct", str(wav), str(out), "--objective", "s1",
                              "--iterations", "5"], capsys)
        assert code == 0
        assert rep["loss_ratio"] < 1 and rep["iterations"] == 5
        assert len(read_wav(out)) == 8000
        lines = (tmp_path / "r.wav.loss.csv").read_text().splitlines()
        assert lines[0] == "accepted_step,loss" and len(lines) == rep["accepted"] + 2

    def test_reconstruct_from_tensor(self, wav, tmp_path, capsys):
        assert cli_run(["analyze", str(wav), str(tmp_path / "c.sct")]) == 0
        code, rep = run_json(["reconstruct", str(tmp_path / "c.sct"), str(tmp_path / "r.wav"),
                              "--iterations", "2"], capsys)
        assert code == 0 and rep["objective"] == "time_s1s2"

    def test_reconstruct_log_rejected(self, wav, tmp_path):
        assert cli_run(["analyze", str(wav), str(tmp_path / "c.sct"), "--log-eps", "1e-3"]) == 0
        assert cli_run(["reconstruct", str(tmp_path / "c.sct"), str(tmp_path / "r.wav")]) == 2

    def test_numerical_failure(self, wav, tmp_path, capsys):
        c = analyze(read_wav(wav), "s1", T=0.032)
        c.s1.values[:] = 1e200
        save_coeffs(tmp_path / "big.sct", c)
        assert cli_run(["reconstruct", str(tmp_path / "big.sct"), str(tmp_path / "r.wav"),
                        "--iterations", "2"]) == 4
        assert "numerical error" in capsys.readouterr().err

    def test_data_errors(self, tmp_path, capsys):
        (tmp_path / "junk.wav").write_bytes(b"not a wav file at all")
        assert cli_run(["analyze", str(tmp_path / "junk.wav"), str(tmp_path / "c.sct")]) == 3
        assert cli_run(["analyze", str(tmp_path / "none.wav"), str(tmp_path / "c.sct")]) == 3
        assert "data error" in capsys.readouterr().err

    def test_config_errors(self, wav, tmp_path):
        assert cli_run(["analyze", str(wav), str(tmp_path / "c.sct"), "--Q", "0"]) == 2
        # second-order bank impossible at this frame rate
        assert cli_run(["analyze", str(wav), str(tmp_path / "c.sct"), "--oversampling",
                        "0"]) == 2

    def test_synth_and_validate(self, tmp_path, capsys):
        out = tmp_path / "fm.wav"
        code, rep = run_json(["synth", "fm", str(out), "--gamma", "1.0", "--duration", "0.5"],
                             capsys)
        assert code == 0
        truth = json.loads((tmp_path / "fm.wav.json").read_text())
        assert truth["inst_freq_hz"][0] == pytest.approx(400.0)
        assert np.abs(read_wav(out).samples).max() == pytest.approx(0.9, rel=1e-6)
        code, rep = run_json(["validate", "frame"], capsys)
        assert code == 0 and rep["pass"]

    def test_validate_failure_exit(self, capsys):
        code, rep = run_json(["validate", "frame", "--oversampling", "4"], capsys)
        assert code == 1 and not rep["pass"]

    def test_filters(self, tmp_path, capsys):
        code, rep = run_json(["filters", "--bank", "quefrency"], capsys)
        assert code == 0
        assert [round(f["center"], 6) for f in rep["filters"]][:5] == [2, 1, 0.5, 0.25, 0.125]
        assert cli_run(["filters", "--out", str(tmp_path / "f.csv")]) == 0
        assert (tmp_path / "f.csv").read_text().startswith("index,center")

    def test_usage_error(self):
        with pytest.raises(SystemExit) as e:
            cli_run(["analyze"])
        assert e.value.code == 2

    def test_module_entry_point(self):
        r = subprocess.run([sys.executable, "-m", "jtfs", "validate", "frame", "--json"],
                           capture_output=True, text=True, timeout=120)
        assert r.returncode == 0
        assert json.loads(r.stdout)["suite"] == "frame"
