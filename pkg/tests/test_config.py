from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import above_one
from jflow.cli.config import DEFAULT_TOLERANCES, parse_config, serialize, tolerances
from jflow.errors import ConfigError

RULED = 'command = "ruled"\n[ruled]\na = 5\nb = 10\n'

TORUS = """command = "torus"
[torus]
n = 2
N = 16
method = "both"
[torus.field]
type = "fourier"
base = [[1, 0], [0, 1]]
modes = [
  { entry = [0, 0], kind = "sin", wave = [1, 0], amplitude = 0.3 },
  { entry = [1, 1], kind = "sin", wave = [1, 0], amplitude = 0.3 },
]
"""

SLOPE = """command = "slope"
out = "runs/slope"
[slope]
preset = "blowup_p3"
omega = [10, -1]
alpha = ["5", "-1"]
[[slope.subvarieties]]
name = "E0"
divisors = [[0, 1]]
[tolerances]
newton = 1e-9
"""


def test_minimal_ruled_defaults():
    cfg = parse_config(RULED)
    assert cfg.command == "ruled"
    assert cfg.params["a"] == 5 and cfg.params["b"] == 10
    assert cfg.params["flow"] is False and cfg.params["levels"] == ()
    assert cfg.tolerances == DEFAULT_TOLERANCES
    assert cfg.out is None


def test_rational_strings():
    cfg = parse_config('command = "surface"\n[surface]\na = "3/2"\nb = 4\n')
    assert cfg.params["a"] == Fraction(3, 2)


@pytest.mark.parametrize(
    "text,needle",
    [
        ('command = "ruled"\n[ruled]\na = 1\nb = 10\n', "requires a > 1, got a = 1"),
        ('command = "ruled"\n[ruled]\na = 2\nb = "1/2"\n', "requires b > 1, got b = 1/2"),
        ('command = "ruled"\n[ruled]\na = 2\nb = 3\nspeed = 4\n', "ruled.speed: unknown key"),
        ('command = "ruled"\n[ruled]\na = 1.2\nb = 3\n', "float literal"),
        ('command = "ruled"\n[ruled]\na = 2\n', "ruled.b: missing required key"),
        ('command = "ruled"\n[ruled]\na = 2\nb = 3\nlevels = [13]\n', "levels above 12"),
        ('command = "fly"\n', "expected one of"),
        ('[ruled]\na = 2\nb = 3\n', "command: missing required key"),
        ('command = "ruled"\n', "missing [ruled] table"),
        ('command = "ruled"\nextra = 1\n[ruled]\na = 2\nb = 3\n', "extra: unknown key"),
        ('command = "ruled"\n[ruled]\na = 2\nb = 3\n[tolerances]\nnewton = -1\n', "must be positive"),
        ('command = "ruled"\n[ruled]\na = 2\nb = 3\n[tolerances]\nbisect = 1e-3\n', "unknown key"),
    ],
)
def test_rejections(text, needle):
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    assert needle in str(info.value)


def test_syntax_error_has_line():
    with pytest.raises(ConfigError) as info:
        parse_config('command = "ruled"\n[ruled]\na = = 2\n')
    assert info.value.line == 3
    assert str(info.value).startswith("line 3:")


@pytest.mark.parametrize(
    "edit,needle",
    [
        (("n = 2", "n = 4"), "only n = 1, 2, 3"),
        (("N = 16", "N = 2"), "at least 4"),
        (("amplitude = 0.3 },\n  { entry = [1, 1]", "amplitude = 1.3 },\n  { entry = [1, 1]"), "positive definite"),
        (("wave = [1, 0], amplitude = 0.3 },\n]", "wave = [1], amplitude = 0.3 },\n]"), "wave vector needs 2"),
        (("entry = [0, 0]", "entry = [0, 2]"), "pair of indices below 2"),
        (("base = [[1, 0], [0, 1]]", "base = [[1, 0.5], [0, 1]]"), "symmetric"),
        (('method = "both"', 'method = "euler"'), "expected one of"),
    ],
)
def test_torus_rejections(edit, needle):
    with pytest.raises(ConfigError) as info:
        parse_config(TORUS.replace(*edit))
    assert needle in str(info.value)


def test_torus_non_spd_B():
    with pytest.raises(ConfigError, match="positive definite"):
        parse_config(TORUS.replace("N = 16", "N = 16\nB = [[1, 2], [2, 1]]"))


def test_slope_config():
    cfg = parse_config(SLOPE)
    assert cfg.params["alpha"] == (5, -1)
    assert cfg.out == "runs/slope"
    assert cfg.tolerances["newton"] == 1e-9
    with pytest.raises(ConfigError, match="exactly one"):
        parse_config(SLOPE.replace('preset = "blowup_p3"\n', ""))
    with pytest.raises(ConfigError):
        parse_config(SLOPE.replace("omega = [10, -1]", "omega = [10, -1, 3]"))


def test_explicit_space():
    text = """command = "slope"
[slope]
omega = [1]
alpha = [2]
[slope.space]
dimension = 2
basis = ["H"]
entries = [{ index = [0, 0], value = 1 }]
[[slope.subvarieties]]
name = "line"
divisors = [[1]]
"""
    cfg = parse_config(text)
    assert cfg.params["space"]["entries"][0]["value"] == 1


def test_tolerance_overrides():
    tol = tolerances({"newton": 1e-9}, {"flow": 1e-6})
    assert tol == {"newton": 1e-9, "flow": 1e-6, "quadrature": 1e-12}
    with pytest.raises(ConfigError, match="--tol.speed"):
        tolerances({}, {"speed": 1.0})


@pytest.mark.parametrize("text", [RULED, TORUS, SLOPE, 'command = "ruled"\n[ruled]\na = "6/5"\nb = 3\nflow = true\nlevels = [4, 6]\n'])
def test_round_trip(text):
    cfg = parse_config(text)
    assert parse_config(serialize(cfg)) == cfg


@given(
    above_one(20, 50),
    above_one(20, 50),
    st.booleans(),
    st.lists(st.integers(1, 12), max_size=3),
)
def test_round_trip_property(a, b, flow, levels):
    text = f'command = "ruled"\n[ruled]\na = "{a}"\nb = "{b}"\nflow = {str(flow).lower()}\nlevels = {levels}\n'
    cfg = parse_config(text)
    assert parse_config(serialize(cfg)) == cfg
