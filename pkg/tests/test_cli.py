import csv
import io
import json
import subprocess
import sys

import pytest

from acoustic_rte.cli import EXIT_CHECK, EXIT_CONFIG, EXIT_OK, EXIT_RUNTIME, main, run
from acoustic_rte.config import load_config, parse_config


def write(tmp_path, text, name="run.cfg"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


TRACE = """
[flow]
c0 = 340
v0 = 10, 0, 0
[ray]
x0 = 1, 2, 3
k0 = 1, 0, 0
t_final = 0.5
dt = 0.01
"""


def test_trace_final_row_matches_group_velocity(tmp_path):
    out = tmp_path / "out"
    assert main(["trace", "--config", write(tmp_path, TRACE), "--out", str(out)]) == EXIT_OK
    rows = read_csv(out / "trace.csv")
    assert list(rows[0]) == ["t", "x1", "x2", "x3", "k1", "k2", "k3", "omega", "h_drift"]
    last = rows[-1]
    assert float(last["t"]) == 0.5
    assert float(last["x1"]) == pytest.approx(1.0 + 350.0 * 0.5, rel=1e-13)
    assert float(last["x2"]) == 2.0 and float(last["x3"]) == 3.0
    assert float(last["omega"]) == -350.0
    echo = load_config(out / "resolved_config.cfg")
    assert echo == parse_config(TRACE).with_overrides("output", dir=str(out))


def test_validate_writes_nothing(tmp_path):
    out = tmp_path / "out"
    assert main(["validate", "--config", write(tmp_path, TRACE), "--out", str(out)]) == EXIT_OK
    assert not out.exists()


def test_config_errors_exit_2_with_json(tmp_path, capsys):
    assert main(["trace", "--config", write(tmp_path, "[flow]\nc0 = -1\n")]) == EXIT_CONFIG
    rec = json.loads(capsys.readouterr().err.strip())
    assert rec["kind"] == "config" and rec["key"] == "[flow].c0"
    assert main(["trace", "--config", write(tmp_path, "[flow]\nc0 = 1\nc0 = 2\n")]) == EXIT_CONFIG
    rec = json.loads(capsys.readouterr().err.strip())
    assert rec["type"] == "ParseError" and rec["line"] == 3
    assert main(["trace", "--config", str(tmp_path / "missing.cfg")]) == EXIT_CONFIG
    assert main(["trace", "--config", write(tmp_path, TRACE), "--workers", "0"]) == EXIT_CONFIG


def test_runtime_error_exit_3(tmp_path, capsys):
    text = "[flow]\nkind = linear_c\nc0 = 1\ng = -1\n[ray]\nx0 = 0, 0, -0.5\nk0 = 0, 0, 1\n"
    assert main(["trace", "--config", write(tmp_path, text), "--out", str(tmp_path / "o")]) == EXIT_RUNTIME
    rec = json.loads(capsys.readouterr().err.strip())
    assert rec["kind"] == "runtime" and rec["subcommand"] == "trace"


TRANSPORT = """
[flow]
c0 = 1
[source]
kind = gaussian_beam
k0 = 0, 0, 2
x_spread = 0.1
k_spread = 0.05
[mc]
n_particles = 2000
t_final = 1
snapshots = 0.5, 1
seed = 3
x3_edges = -1, 0, 1, 2, 3
mu_edges = -1, 0, 0.5, 1
"""


def test_transport_byte_identical_with_seed(tmp_path):
    cfg = write(tmp_path, TRANSPORT)
    for d in ("a", "b"):
        assert main(["transport", "--config", cfg, "--seed", "42", "--out", str(tmp_path / d)]) == EXIT_OK
    for name in ("histogram_000.csv", "histogram_001.csv", "summary.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    summary = read_csv(tmp_path / "a" / "summary.csv")
    assert [float(r["time"]) for r in summary] == [0.5, 1.0]
    assert float(summary[-1]["total_action"]) == 1.0
    echo_a = load_config(tmp_path / "a" / "resolved_config.cfg")
    echo_b = load_config(tmp_path / "b" / "resolved_config.cfg")
    assert echo_a["mc"]["seed"] == 42
    assert echo_a == echo_b.with_overrides("output", dir=str(tmp_path / "a"))


def test_xsec_outputs(tmp_path):
    text = """
[flow]
c0 = 1
[spectrum]
kind = velocity_gaussian
variance = 0.01
length = 1
tau = 1
[xsec]
k_mag = 1, 2
n_angles = 5
"""
    out = tmp_path / "o"
    assert main(["xsec", "--config", write(tmp_path, text), "--out", str(out)]) == EXIT_OK
    rows = read_csv(out / "xsec.csv")
    assert len(rows) == 2 * 5 * 4
    tot = read_csv(out / "total.csv")
    for r in tot:
        assert float(r["gain"]) == pytest.approx(float(r["total"]), rel=1e-10)


def test_wigner_outputs(tmp_path):
    text = """
[flow]
c0 = 1
[field]
kind = plane
waves = 1, 1, -1
nx = 128
nt = 128
n_lags_x = 64
n_lags_t = 64
x_stride = 16
t_stride = 16
"""
    out = tmp_path / "o"
    assert main(["wigner", "--config", write(tmp_path, text), "--out", str(out)]) == EXIT_OK
    dens = read_csv(out / "density.csv")
    assert dens
    for r in dens:
        assert float(r["density"]) == pytest.approx(1.0, rel=1e-10)
        assert float(r["strain"]) == pytest.approx(float(r["kinetic"]), rel=1e-10)
    meta = json.loads((out / "wigner_meta.json").read_text())
    assert meta["quantization"] == 0 and meta["n_lags_x"] == 64


def test_validate_deep():
    text = TRACE + "[spectrum]\nkind = gaussian_c\nvariance = 0.01\nlength = 1\n"
    cfg = parse_config(text)
    stream = io.StringIO()
    status = run("validate", cfg, deep=True, stream=stream)
    lines = stream.getvalue().splitlines()
    assert lines and all(ln.startswith(("PASS", "FAIL")) for ln in lines)
    assert status == (EXIT_OK if all(ln.startswith("PASS") for ln in lines) else EXIT_CHECK)
    assert status == EXIT_OK


def test_module_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "acoustic_rte", "validate", "--config",
                          write(tmp_path, TRACE)], capture_output=True, text=True)
    assert res.returncode == 0
    res = subprocess.run([sys.executable, "-m", "acoustic_rte", "trace"], capture_output=True, text=True)
    assert res.returncode == 2
