import json
import math
from pathlib import Path

import numpy as np
import pytest

from dirinf import io
from dirinf.config import ConfigError, load_config, parse_config

CONFIGS = Path(__file__).resolve().parents[1] / "configs"

MINIMAL = """
[curvature]
family = "constant"
k = 1.0
[surface]
R_max = 20.0
"""


def test_defaults_filled():
    cfg = parse_config(MINIMAL)
    assert cfg.seed == 0 and cfg.n == 2
    assert cfg.raw["experiment"]["schedule"] == [4.0, 8.0, 16.0]
    assert cfg.spec.name == "minimal" and cfg.f.kind == "cos"
    assert cfg.surface().R_max == 20.0


@pytest.mark.parametrize("name", ["hyperbolic", "example1", "example2", "example1_plaplace4"])
def test_shipped_configs_parse(name):
    cfg = load_config(CONFIGS / f"{name}.toml")
    assert cfg.seed == 42


@pytest.mark.parametrize("text, match", [
    ("[curvature\nfamily = 1", "line 1"),
    ("[surface]\nR_max = 4.0", "missing section"),
    ("[curvature]\nfamily = 'constant'\nk = 1.0", "R_max"),
    (MINIMAL + "[bogus]\nx = 1", "unknown section"),
    (MINIMAL + "[solver]\nspeed = 3", "unknown keys"),
    ("colour = 1\n" + MINIMAL, "unknown top-level"),
    (MINIMAL + "[experiment]\nschedule = [4.0, 40.0]", "exceeds R_max"),
    (MINIMAL + "[experiment]\nschedule = [8.0, 4.0]", "strictly increasing"),
    (MINIMAL + "[experiment]\nschedule = [4.1]", "multiple of dr"),
    (MINIMAL + "[solver]\nR = 30.0", "R_max"),
    (MINIMAL + "[barrier]\nL = 2.0", "8/pi"),
    (MINIMAL + "[operator]\nkind = 'plaplace'", "requires key 'p'"),
    (MINIMAL + "[experiment.f]\nkind = 'noise'", "experiment.f"),
    ("n = 1\n" + MINIMAL, "n must"),
    ("[curvature]\nfamily = 'example1'\nphi = 1.2\neps = 1.0\n[surface]\nR_max = 10.0", "curvature"),
])
def test_config_errors(text, match):
    with pytest.raises(ConfigError, match=match):
        parse_config(text)


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "none.toml")


def test_json_is_deterministic():
    obj = {"b": np.float64(1.5), "a": [np.int64(2), math.inf, np.array([1.0, math.nan])], "c": np.bool_(True)}
    text = io.dumps(obj)
    assert text == io.dumps(json.loads(text))
    assert json.loads(text) == {"a": [2, None, [1.0, None]], "b": 1.5, "c": True}
    assert text.index('"a"') < text.index('"b"')
    with pytest.raises(TypeError):
        io.dumps({"x": object()})


def test_table_csv_round_trip(tmp_path):
    x = np.array([0.1, 1 / 3, 1e-300])
    io.write_table_csv(tmp_path / "t.csv", {"x": x, "y": 2 * x})
    data = np.loadtxt(tmp_path / "t.csv", delimiter=",", skiprows=1)
    np.testing.assert_array_equal(data[:, 0], x)
    with pytest.raises(ValueError):
        io.write_table_csv(tmp_path / "bad.csv", {"x": [1.0], "y": [1.0, 2.0]})


def test_field_names():
    assert io.field_name(4.0) == "u_0004.csv"
    assert io.field_name(16) == "u_0016.csv"
    assert io.field_name(2.5) == "u_0002p5.csv"


def test_versions_lists_packages():
    v = io.versions()
    assert {"python", "numpy", "scipy", "pyamg"} <= set(v)
