import json

import numpy as np
import pytest

from rayleigh_nehari.config import (
    ConfigError,
    ScenarioConfig,
    bundled_path,
    bundled_scenarios,
    compile_expression,
    eval_expression,
    load_config,
    parse_config,
)
from rayleigh_nehari.grid import build_grid


def test_bundled_scenarios_parse():
    assert bundled_scenarios() == ["log_power", "power", "power_sum"]
    for name in bundled_scenarios():
        cfg = load_config(bundled_path(name))
        assert cfg.name == name
        assert (cfg.d, cfg.n) == (1, 256)
        spec = cfg.build_spec()
        assert spec.grid.shape == (256,)


def test_unknown_bundled_name():
    with pytest.raises(ConfigError, match="available"):
        bundled_path("nope")


def test_values_and_comments():
    cfg = parse_config("# header\nn = 64  # trailing\nexponents = 3, 4\nallow_any_s = yes\nlambda = 0.25\n")
    assert cfg.n == 64
    assert cfg.exponents == (3.0, 4.0)
    assert cfg.allow_any_s is True
    assert cfg.lam == 0.25
    assert cfg.lines == {"n": 2, "exponents": 3, "allow_any_s": 4, "lam": 5}


@pytest.mark.parametrize(
    "text, line, fragment",
    [
        ("n = 64\nfoo = 1\n", 2, "unknown key"),
        ("n = 64\n\nn = 32\n", 3, "duplicate"),
        ("n = 64\nnonsense\n", 2, "key = value"),
        ("n = 6.5\n", 1, "integer"),
        ("s = abc\n", 1, "bad value"),
        ("q = \n", 1, "empty value"),
        ("lambda = 0.1\nlambda_fraction = 0.5\n", 2, "either"),
        ("allow_any_s = maybe\n", 1, "boolean"),
    ],
)
def test_parse_errors_carry_line(text, line, fragment):
    with pytest.raises(ConfigError) as info:
        parse_config(text, "x.cfg")
    assert info.value.line == line
    assert fragment in str(info.value)
    js = info.value.to_json()
    assert js["line"] == line and js["path"] == "x.cfg" and js["error"] == "config"


def test_expression_whitelist():
    fn = compile_expression("1 + 0.25*x**2 + sin(pi*x)", ("x",))
    np.testing.assert_allclose(fn(x=np.array([0.0, 2.0])), [1.0, 2.0], atol=1e-15)
    for bad in ("x.real", "x[0]", "__import__('os')", "(lambda: 1)()", "[y for y in x]", "open"):
        with pytest.raises(ConfigError):
            compile_expression(bad, ("x",), 7)
    with pytest.raises(ConfigError, match="parse"):
        compile_expression("1 +", ("x",))


def test_expression_error_has_line():
    cfg = parse_config("n = 64\nV = 1 + y\n")
    with pytest.raises(ConfigError) as info:
        cfg.build_spec()
    assert info.value.line == 2


def test_nonfinite_field_rejected():
    cfg = parse_config("n = 64\nV = 1/x\n")
    with np.errstate(divide="ignore"):
        with pytest.raises(ConfigError, match="not finite"):
            cfg.build_spec()


def test_two_dimensional_variables():
    cfg = parse_config("d = 2\nn = 16\ns = 0.5\np = 3\nV = 1 + x**2 + y**2\na = exp(-r**2)\n")
    spec = cfg.build_spec()
    g = spec.grid
    x, y = g.coords()
    np.testing.assert_allclose(spec.V, 1 + x**2 + y**2)
    np.testing.assert_allclose(spec.a, np.exp(-(x**2 + y**2)))


def test_nonlinearity_kinds():
    cfg = parse_config("n = 32\nnonlinearity = custom\nf = t**3\nfprime = 3*t**2\n")
    nl = cfg.build_nonlinearity()
    assert nl.F(2.0) == pytest.approx(4.0, rel=1e-12)
    assert parse_config("nonlinearity = linear\n").build_nonlinearity().f(3.0) == 3.0
    with pytest.raises(ConfigError):
        parse_config("nonlinearity = custom\nf = t\n").build_nonlinearity()
    with pytest.raises(ConfigError) as info:
        parse_config("n = 32\nnonlinearity = cubic\n").build_nonlinearity()
    assert info.value.line == 2


def test_text_round_trip():
    cfg = load_config(bundled_path("power_sum"))
    again = parse_config(cfg.to_text())
    assert again.to_json() == cfg.to_json()


def test_report_json_round_trip(tmp_path):
    cfg = load_config(bundled_path("log_power"))
    path = tmp_path / "report.json"
    path.write_text(json.dumps({"command": "fiber", "config": cfg.to_json()}))
    back = load_config(path)
    assert back.to_json() == cfg.to_json()
    grid = build_grid(1, 256, 8.0, 0.4)
    np.testing.assert_array_equal(back.field_from("V", grid), cfg.field_from("V", grid))


def test_bad_json_config(tmp_path):
    path = tmp_path / "r.json"
    path.write_text("{}")
    with pytest.raises(ConfigError, match="config"):
        load_config(path)
    path.write_text(json.dumps({"config": {"bogus": 1}}))
    with pytest.raises(ConfigError, match="bogus"):
        load_config(path)


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(tmp_path / "missing.cfg")


def test_defaults():
    cfg = ScenarioConfig()
    assert cfg.starts == 2 and cfg.probes == 200 and cfg.solver_tol == 1e-8
    assert eval_expression("2*x", {"x": 3.0}) == 6.0
