import csv
import json

import pytest

from bergman_lab.cli import ConfigError, dumps, fmt_float, main, parse_config, run

SMALL = {"levels": 7, "angular_base": 32}


def _codes(exc):
    return [c for c, _ in exc.value.violations]


def _write(tmp_path, cfg, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg), encoding="utf-8")
    return path


def test_parse_valid():
    cfg = parse_config('{"command":"weight-report","weight":"lebesgue",'
                       '"grid":{"levels":10,"angular_base":32}}')
    assert cfg.command == "weight-report" and cfg.grid["levels"] == 10
    assert cfg.grid["angular_base"] == 32 and cfg.seed == 0


def test_parse_missing_command():
    with pytest.raises(ConfigError) as exc:
        parse_config("{}")
    assert "missing-command" in _codes(exc)


def test_parse_out_of_range_epsilon():
    with pytest.raises(ConfigError) as exc:
        parse_config({"command": "dominate", "params": {"epsilon": -1}})
    assert "out-of-range:epsilon" in _codes(exc)


def test_parse_reports_every_violation(tmp_path):
    with pytest.raises(ConfigError) as exc:
        parse_config({"command": "nope", "weight": "mystery",
                      "grid": {"levels": 0},
                      "params": {"r": 2, "atoms_csv": "absent.csv"}, "seed": -3},
                     base_dir=tmp_path)
    codes = _codes(exc)
    for c in ("unknown-command", "unknown-weight", "out-of-range:grid.levels",
              "out-of-range:r", "missing-file", "out-of-range:seed"):
        assert c in codes


def test_config_hash_stable():
    a = parse_config({"command": "zero-test", "seed": 1, "weight": "lebesgue"})
    b = parse_config({"weight": "lebesgue", "seed": 1, "command": "zero-test"})
    c = parse_config({"command": "zero-test", "seed": 2, "weight": "lebesgue"})
    assert a.sha256() == b.sha256() != c.sha256()


def test_serialization_helpers():
    assert fmt_float(0.1) == "0.10000000000000001"
    assert float(fmt_float(1 / 3)) == 1 / 3
    assert json.loads(dumps({"a": [1, 2.5], "b": {"c": None}})) == {"a": [1, 2.5], "b": {"c": None}}


def test_weight_report_doubling(tmp_path):
    cfg = parse_config({"command": "weight-report", "weight": "lebesgue",
                        "grid": SMALL, "params": {"depth": 6}})
    doc = run(cfg, tmp_path)
    with open(tmp_path / "weight-report.csv", newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    assert float(rows[0]["doubling_constant"]) == pytest.approx(2.0, abs=1e-9)
    assert b"\r\n" not in (tmp_path / "weight-report.csv").read_bytes()
    assert doc["config_sha256"] == cfg.sha256()
    assert doc["grid"]["levels"] == 7 and "tolerance_provenance" in doc


def test_zero_test_report(tmp_path):
    cfg = parse_config({"command": "zero-test", "weight": "lebesgue", "grid": SMALL,
                        "params": {"zeros": [[0.5, 0.0, 1]], "p": 2, "max_degree": 2}})
    run(cfg, tmp_path)
    doc = json.loads((tmp_path / "zero-test.json").read_text())
    res = doc["results"]
    assert set(res["prop2"]) == {"f_over_h", "h_over_f"}
    assert res["prop2"]["f_over_h"] <= 1 + 1e-9
    assert res["corollary1"]["best_value"] is not None


def test_factorize_byte_identical(tmp_path):
    cfg = {"command": "factorize", "weight": "lebesgue", "grid": SMALL, "seed": 7,
           "params": {"function": {"zeros": [[0.5, 0.0, 1], [-0.3, 0.4, 1]]}, "p": 1, "trials": 8}}
    path = _write(tmp_path, cfg)
    assert main(["factorize", "--config", str(path), "--out", str(tmp_path / "a")]) == 0
    assert main(["factorize", "--config", str(path), "--out", str(tmp_path / "b")]) == 0
    a = (tmp_path / "a" / "factorize.json").read_bytes()
    b = (tmp_path / "b" / "factorize.json").read_bytes()
    assert a == b
    assert (tmp_path / "a" / "factorize-trials.csv").read_bytes() == \
        (tmp_path / "b" / "factorize-trials.csv").read_bytes()


def test_sample_command(tmp_path):
    path = _write(tmp_path, {"command": "sample", "weight": "lebesgue",
                             "grid": {"levels": 6, "angular_base": 16},
                             "params": {"scale": 2.0, "depth": 5}})
    assert main(["sample", "--config", str(path), "--out", str(tmp_path)]) == 0
    res = json.loads((tmp_path / "sample.json").read_text())["results"]
    assert res["sampling_bounds"] == pytest.approx([2.0, 2.0], rel=1e-9)


def test_exit_code_config(tmp_path):
    path = _write(tmp_path, {"command": "dominate", "params": {"epsilon": -1}})
    assert main(["dominate", "--config", str(path), "--out", str(tmp_path)]) == 2
    assert main(["sample", "--config", str(path), "--out", str(tmp_path)]) == 2
    assert main(["sample", "--config", str(tmp_path / "none.json")]) == 2


def test_exit_code_numeric(tmp_path):
    path = _write(tmp_path, {"command": "kernel-check", "weight": "lebesgue",
                             "grid": {"levels": 4, "angular_base": 16},
                             "params": {"points": [[0.9999999, 0.0]], "inner_levels": 4}})
    assert main(["kernel-check", "--config", str(path), "--out", str(tmp_path)]) == 3


def test_exit_code_resource(tmp_path):
    path = _write(tmp_path, {"command": "weight-report",
                             "grid": {"levels": 12, "angular_base": 64, "node_cap": 1000}})
    assert main(["weight-report", "--config", str(path), "--out", str(tmp_path)]) == 4


def test_threads_env_validation(tmp_path, monkeypatch):
    path = _write(tmp_path, {"command": "weight-report", "grid": SMALL})
    monkeypatch.setenv("BERGMAN_LAB_THREADS", "zero")
    assert main(["weight-report", "--config", str(path), "--out", str(tmp_path)]) == 2
