import json

import pytest

from quenched_sft.cli import main
from quenched_sft.config import ConfigError, parse_config


def _cfg(tmp_path, obj, name="c.json"):
    p = tmp_path / name
    p.write_text(json.dumps(obj, indent=2))
    return str(p)


def test_parse_defaults():
    cfg = parse_config('{"seed": 3}')
    assert cfg.scenario.name == "example5" and cfg.n == 6 and cfg.seed == 3
    assert cfg.R.intervals == ((0.0, 1.0), (1.0, 2.0))
    assert parse_config("{}", seed=5).seed == 5


@pytest.mark.parametrize(
    "text, line",
    [
        ('{\n  "seed": 0,\n  "R": [[0, 2], [1, 3]]\n}', 3),
        ('{\n  "seed": 0,\n  "scenario": "nope"\n}', 3),
        ('{\n  "seed": 0,\n  "bogus": 1\n}', 3),
        ('{\n  "seed": -1\n}', 2),
        ('{\n  "seed": 0,\n  "word": [1, 4]\n}', 3),
        ('{\n  "seed": 0,\n  "scenario": "bernoulli",\n  "psi": "tilt"\n}', 4),
        ('{\n  "seed": 0,\n  "seed2": 1,\n', 4),
    ],
)
def test_config_errors_carry_lines(text, line):
    with pytest.raises(ConfigError) as exc:
        parse_config(text)
    assert exc.value.line == line


def test_seed_required():
    with pytest.raises(ConfigError):
        parse_config("{}")


def test_inline_scenario():
    text = json.dumps({
        "seed": 0,
        "scenario": {"name": "toy", "b": 2, "breakpoints": [0, 0.5],
                     "matrices": [[[1, 1], [1, 1]], [[1, 1], [1, 0]]], "word": [1, 2, 2]},
        "n": 3,
    })
    cfg = parse_config(text)
    assert cfg.scenario.name == "toy" and cfg.word == (1, 2, 2)
    with pytest.raises(ConfigError):
        parse_config(json.dumps({"seed": 0, "scenario": {"b": 2, "breakpoints": [0],
                                                         "matrices": [[[1, 0], [0, 0]]]}}))


def test_describe(tmp_path, capsys):
    assert main(["describe", "--seed", "0", "--out", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert "1 0 0\n    0 1 1\n    0 1 1" in out
    assert "aperiodicity M = 3" in out
    d = json.loads((tmp_path / "describe.json").read_text())
    assert d["aperiodicity_M"] == 3
    cfg = _cfg(tmp_path, {"seed": 0, "scenario": "bernoulli"})
    assert main(["describe", "--config", cfg]) == 0
    assert "aperiodicity M = 1" in capsys.readouterr().out


def test_exit_codes(tmp_path, capsys):
    bad = _cfg(tmp_path, {"seed": 0, "R": [[0, 2], [1, 3]]})
    assert main(["describe", "--config", bad]) == 2
    assert "(0.0, 2.0) and (1.0, 3.0)" in capsys.readouterr().err
    assert main(["describe"]) == 2
    assert main(["describe", "--config", str(tmp_path / "missing.json")]) == 2
    far = _cfg(tmp_path, {"seed": 0, "R": [[0, 1e9]]}, "far.json")
    assert main(["simulate", "--config", far]) == 3


def test_measure_bernoulli(tmp_path):
    cfg = _cfg(tmp_path, {"seed": 0, "scenario": "bernoulli", "n_range": [1, 6]})
    assert main(["measure", "--config", cfg, "--out", str(tmp_path / "m")]) == 0
    rows = (tmp_path / "m" / "epsilon.csv").read_text().splitlines()
    assert rows[0] == "n,epsilon"
    for line in rows[1:]:
        n, eps = line.split(",")
        assert abs(float(eps) - 3.0 ** -int(n)) < 1e-15
    s = json.loads((tmp_path / "m" / "measure.json").read_text())
    assert s["epsilon_fit"]["slope"] < 0


def test_measure_deterministic(tmp_path):
    cfg = _cfg(tmp_path, {"seed": 0})
    for d in ("a", "b"):
        assert main(["measure", "--config", cfg, "--out", str(tmp_path / d)]) == 0
    for f in (tmp_path / "a").iterdir():
        assert f.read_bytes() == (tmp_path / "b" / f.name).read_bytes()


def test_simulate_smoke(tmp_path):
    cfg = _cfg(tmp_path, {"seed": 0, "mc": {"N": 100}, "csv_paths": 3})
    assert main(["simulate", "--config", cfg, "--out", str(tmp_path / "s0")]) == 0
    r0 = json.loads((tmp_path / "s0" / "simulate.json").read_text())
    assert r0["realization_invariants"]["consistent"]
    assert (tmp_path / "s0" / "realizations.csv").read_text().startswith("path,time\n")
    assert main(["simulate", "--config", cfg, "--seed", "1", "--out", str(tmp_path / "s1")]) == 0
    r1 = json.loads((tmp_path / "s1" / "simulate.json").read_text())
    assert r1["realization_invariants"]["consistent"]
    assert r1["mean_counts"] != r0["mean_counts"]


@pytest.mark.slow
def test_verify_oracle_and_tamper(tmp_path, capsys):
    cfg = _cfg(tmp_path, {"seed": 0, "scenario": "bernoulli"})
    assert main(["verify", "--config", cfg, "--out", str(tmp_path / "v")]) == 0
    rep = json.loads((tmp_path / "v" / "verify.json").read_text())
    assert rep["all_passed"] and {c["name"] for c in rep["inapplicable"]} == {"symmetry", "nonmixing_jensen_gap"}
    tampered = _cfg(tmp_path, {"seed": 0, "tamper": {"table_scale": 1.001}}, "t.json")
    assert main(["verify", "--config", tampered]) == 1
    assert "FAIL  normalization_zero" in capsys.readouterr().out
