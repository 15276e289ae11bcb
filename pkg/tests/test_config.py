import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from acoustic_rte.config import SCHEMA, SECTIONS, RunConfig, load_config, parse_config
from acoustic_rte.errors import ParseError, ValidationError
from acoustic_rte.flow import LinearSoundSpeed, Uniform
from acoustic_rte.spectra import Combined, IsotropicIncompressibleVelocity
from acoustic_rte.transport import GaussianBeam

MINIMAL = """
# uniform straight ray
[flow]
c0 = 340
v0 = 10, 0, 0

[ray]
k0 = 1, 0, 0
"""


def test_minimal_config_fills_defaults():
    cfg = parse_config(MINIMAL)
    assert cfg["flow"]["kind"] == "uniform"
    assert cfg["flow"]["c0"] == 340.0
    assert cfg["flow"]["rho0"] == SCHEMA["flow"]["rho0"].default
    assert cfg["ray"]["branch"] == 1
    assert cfg["mc"]["seed"] == 0
    assert set(SECTIONS) <= set(cfg.sections)
    assert isinstance(cfg.flow_model(), Uniform)


def test_negative_sound_speed_names_key():
    with pytest.raises(ValidationError) as exc:
        parse_config("[flow]\nc0 = -1\n")
    assert exc.value.key == "[flow].c0"
    assert "> 0" in exc.value.constraint or "positive" in exc.value.constraint


def test_duplicate_key_reports_line():
    with pytest.raises(ParseError) as exc:
        parse_config("[flow]\nc0 = 1\nc0 = 2\n")
    assert exc.value.line == 3
    assert "c0" in str(exc.value)


@pytest.mark.parametrize("text, line", [
    ("[flow]\n[flow]\n", 2),
    ("c0 = 1\n", 1),
    ("[flow]\nc0 1\n", 2),
    ("[flow\n", 1),
])
def test_parse_errors(text, line):
    with pytest.raises(ParseError) as exc:
        parse_config(text)
    assert exc.value.line == line
    assert exc.value.column >= 1


@pytest.mark.parametrize("text", [
    "[flow]\nfoo = 1\n",
    "[nosuch]\n",
    "[flow]\nc0 = abc\n",
    "[flow]\ng = 0.1\n",
    "[mc]\nseed = -1\n",
    "[mc]\nseed = 18446744073709551616\n",
    "[ray]\nk0 = 0, 0, 0\n",
    "[ray]\nk0 = 1, 0\n",
    "[field]\nnx = 100\n",
    "[mc]\nmu_edges = 1, 0\n",
])
def test_validation_errors(text):
    with pytest.raises(ValidationError):
        parse_config(text)


def test_comments_and_blank_lines():
    cfg = parse_config("; header\n[flow]\n  # note\nc0 = 2   # trailing\n\n")
    assert cfg["flow"]["c0"] == 2.0


def test_round_trip_exact():
    text = MINIMAL + """
[spectrum]
kind = combined
variance = 0.01
length = 0.7
velocity_variance = 0.02
velocity_length = 1.3
tau = 0.5
[source]
kind = gaussian_beam
k0 = 0, 0, 2
x_spread = 0.1
k_spread = 0.05
[mc]
seed = 18446744073709551615
snapshots = 0.5, 1
t_final = 1
"""
    cfg = parse_config(text)
    again = parse_config(cfg.to_text())
    assert again == cfg
    assert again.to_text() == cfg.to_text()
    assert isinstance(cfg.spectrum(), Combined)
    assert isinstance(cfg.source(), GaussianBeam)
    assert cfg["mc"]["seed"] == 2 ** 64 - 1


@settings(max_examples=100, deadline=None)
@given(st.floats(1e-300, 1e300), st.lists(st.floats(-1e10, 1e10), min_size=3, max_size=3))
def test_float_round_trip(c0, v0):
    cfg = parse_config("[flow]\n").with_overrides("flow", c0=c0, v0=v0)
    again = parse_config(cfg.to_text())
    assert again["flow"]["c0"] == c0
    assert list(again["flow"]["v0"]) == list(v0)


def test_overrides_are_validated():
    cfg = parse_config(MINIMAL)
    assert cfg.with_overrides("mc", seed=5)["mc"]["seed"] == 5
    with pytest.raises(ValidationError):
        cfg.with_overrides("mc", seed=-5)
    assert cfg["mc"]["seed"] == 0


def test_linear_flow_and_builders(tmp_path):
    text = """
[flow]
kind = linear_c
c0 = 1
g = 0.05
direction = 0, 0, 1
box_lo = -10, -10, 0
box_hi = 10, 10, 10
t_max = 100
[spectrum]
kind = velocity_gaussian
variance = 0.01
length = 1
[ray]
k0 = 1, 0, 1
dt = 0.01
"""
    path = tmp_path / "run.cfg"
    path.write_text(text)
    cfg = load_config(path)
    assert isinstance(cfg.flow_model(), LinearSoundSpeed)
    assert isinstance(cfg.spectrum(), IsotropicIncompressibleVelocity)
    assert cfg.spectrum().frozen
    assert cfg.integrator().dt == 0.01
    tc = cfg.transport_config(workers=2)
    assert tc.workers == 2
    assert math.isfinite(cfg.quadrature().nodes_per_length)
    assert np.all(cfg.flow_model().box.hi == [10.0, 10.0, 10.0])


def test_equality_and_type():
    a, b = parse_config(MINIMAL), parse_config(MINIMAL)
    assert a == b and isinstance(a, RunConfig)
    assert a != parse_config(MINIMAL.replace("340", "341"))
