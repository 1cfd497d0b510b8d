import json
import subprocess
import sys

import pytest

from toaqrng import pipeline
from toaqrng.cli import main, parse_time
from toaqrng.errors import ConfigError
from toaqrng.formats import open_bsf, open_tsf

SMALL = ["--duration", "0.05s", "--seq-len", "20000", "--seed", "5"]


def _report(path):
    return json.loads(path.read_text())


def test_parse_time():
    assert parse_time("12.8ns", "s") == pytest.approx(12.8e-9)
    assert parse_time("24", "ns") == pytest.approx(24e-9)
    assert parse_time("1.5 us", "s") == pytest.approx(1.5e-6)


def test_config_round_trip(tmp_path):
    cfg = pipeline.PipelineConfig(seed=9)
    path = tmp_path / "c.json"
    path.write_text(json.dumps(cfg.to_dict()))
    assert pipeline.PipelineConfig.load(path) == cfg
    bad = cfg.to_dict()
    bad["source"]["colour"] = 1
    with pytest.raises(ConfigError):
        pipeline.PipelineConfig.from_dict(bad)


def test_run_equals_staged_commands(tmp_path):
    assert main(["run", *SMALL, "--outdir", str(tmp_path / "r")]) == 0
    assert main(["simulate", "--duration", "0.05s", "--seed", "5", "-o", str(tmp_path / "t.tsf")]) == 0
    assert main(["extract", str(tmp_path / "t.tsf"), "-o", str(tmp_path / "b.bsf")]) == 0
    assert main(["analyze", str(tmp_path / "b.bsf"), *SMALL, "-o", str(tmp_path / "a.json")]) == 0
    run = _report(tmp_path / "r" / "report.json")
    staged = _report(tmp_path / "a.json")
    for key in ("input", "qmetrics", "pearson", "ent", "nist", "tests", "config"):
        assert run[key] == staged[key], key
    assert (tmp_path / "r" / "raw.bsf").read_bytes() == (tmp_path / "b.bsf").read_bytes()
    assert run["nist"]["sequence_count"] >= 2


def test_run_is_deterministic_across_threads(tmp_path):
    for name, threads in (("a", "1"), ("b", "1"), ("c", "3")):
        assert main(["run", *SMALL, "--threads", threads, "--shuffle", "--outdir", str(tmp_path / name)]) == 0
    reports = [pipeline.stable_view(_report(tmp_path / n / "report.json")) for n in "abc"]
    assert reports[0] == reports[1] == reports[2]
    for f in ("timestamps.tsf", "raw.bsf", "shuffled.bsf"):
        data = {(tmp_path / n / f).read_bytes() for n in "abc"}
        assert len(data) == 1, f


def test_config_echo_reproduces_run(tmp_path):
    assert main(["run", *SMALL, "--outdir", str(tmp_path / "a")]) == 0
    echo = _report(tmp_path / "a" / "report.json")["config"]
    (tmp_path / "cfg.json").write_text(json.dumps(echo))
    assert main(["run", "--config", str(tmp_path / "cfg.json"), "--outdir", str(tmp_path / "b")]) == 0
    assert (tmp_path / "a" / "raw.bsf").read_bytes() == (tmp_path / "b" / "raw.bsf").read_bytes()


def test_shuffle_command_round_trip(tmp_path):
    assert main(["run", *SMALL, "--outdir", str(tmp_path)]) == 0
    raw = tmp_path / "raw.bsf"
    assert main(["shuffle", str(raw), "-o", str(tmp_path / "s.bsf")]) == 0
    assert main(["shuffle", str(tmp_path / "s.bsf"), "-o", str(tmp_path / "s2.bsf")]) == 0
    assert open_bsf(tmp_path / "s2.bsf") == open_bsf(raw)


def test_metrics_and_budget_commands(tmp_path, capsys):
    assert main(["metrics", "--rate", "5.2e6", "--T", "12.8ns", "--dead", "24ns"]) == 0
    m = json.loads(capsys.readouterr().out)
    assert m["mean_photons_per_interval"] == pytest.approx(0.07605, abs=1e-5)
    assert m["correction_factor"] == pytest.approx(1.143, abs=5e-4)
    assert main(["budget", "-o", str(tmp_path / "b.json")]) == 0
    assert _report(tmp_path / "b.json")["eta_nwr"] == pytest.approx(0.0637, abs=1e-4)


def test_export_ascii_command(tmp_path):
    assert main(["run", *SMALL, "--outdir", str(tmp_path)]) == 0
    assert main(["export-ascii", str(tmp_path / "raw.bsf"), "-o", str(tmp_path / "bits.txt")]) == 0
    text = (tmp_path / "bits.txt").read_text()
    assert len(text) == open_bsf(tmp_path / "raw.bsf").bit_length and set(text) <= {"0", "1"}


def test_exit_codes(tmp_path):
    # configuration error
    assert main(["metrics", "--rate", "5e7", "--T", "12.8ns", "--dead", "24ns"]) == 2
    assert main(["simulate", "--rate", "1e6", "--flux", "1e6", "-o", str(tmp_path / "x.tsf")]) == 2
    # format / io error
    (tmp_path / "junk.bsf").write_bytes(b"JUNKJUNKJUNKJUNK")
    assert main(["analyze", str(tmp_path / "junk.bsf")]) == 3
    assert main(["analyze", str(tmp_path / "missing.bsf")]) == 3
    # statistical precondition
    (tmp_path / "tiny.bsf").write_bytes(b"BSF1" + bytes(4) + (8).to_bytes(8, "little") + b"\x01")
    assert main(["analyze", str(tmp_path / "tiny.bsf")]) == 4


def test_module_entry_point(tmp_path):
    out = subprocess.run([sys.executable, "-m", "toaqrng", "metrics", "--rate", "1.8e6", "--T", "12.8ns",
                          "--dead", "24ns"], capture_output=True, text=True, check=True)
    assert json.loads(out.stdout)["min_entropy_per_bit"] == pytest.approx(0.99783, abs=1e-5)


def test_simulate_writes_resolution(tmp_path):
    assert main(["simulate", "--duration", "0.02s", "--resolution", "25ps", "-o", str(tmp_path / "t.tsf")]) == 0
    res, ticks = open_tsf(tmp_path / "t.tsf")
    assert res == 25 and ticks.size > 0 and not (ticks % 25).any()
