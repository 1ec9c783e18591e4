import csv
import json
import subprocess
import sys

import pytest

from hlpush.cli import ConfigError, ExperimentConfig, main


def _rows(path):
    lines = [ln for ln in path.read_text().splitlines() if not ln.startswith("#")]
    return list(csv.reader(lines))


def _comments(path):
    return [ln for ln in path.read_text().splitlines() if ln.startswith("#")]


def test_simulate_zero_replicas_writes_header_only(tmp_path):
    out = tmp_path / "s.csv"
    assert main(["simulate", "--replicas", "0", "--t", "5", "--out", str(out)]) == 0
    assert _rows(out) == [["seed", "t", "N", "boundary_touched"]]
    heads = _comments(out)
    assert heads[0].startswith("# version:")
    assert json.loads(heads[1][len("# config: "):])["replicas"] == 0


def test_simulate_deterministic_and_job_independent(tmp_path):
    args = ["simulate", "--replicas", "6", "--t", "20", "--seed", "5", "--b", "0.5", "--rho", "0.6"]
    a, b, c = tmp_path / "a.csv", tmp_path / "b.csv", tmp_path / "c.csv"
    assert main(args + ["--jobs", "1", "--out", str(a)]) == 0
    assert main(args + ["--jobs", "1", "--out", str(b)]) == 0
    assert main(args + ["--jobs", "2", "--out", str(c)]) == 0
    assert _rows(a) == _rows(b) == _rows(c)
    assert [r[0] for r in _rows(a)[1:]] == [str(5 + r) for r in range(6)]
    summary = json.loads((tmp_path / "a.summary.json").read_text())
    assert summary["summary"]["replicas"] == 6


def test_simulate_regime_auto(tmp_path, capsys):
    assert main(["simulate", "--replicas", "1", "--t", "5", "--regime", "auto",
                 "--out", str(tmp_path / "r.csv")]) == 0
    assert '"regime": "GUE"' in capsys.readouterr().out


def test_output_directory_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("HLPUSH_OUTPUT_DIR", str(tmp_path))
    assert main(["simulate", "--replicas", "1", "--t", "2"]) == 0
    assert (tmp_path / "simulate.csv").exists()


def test_invalid_field_is_named(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["simulate", "--b", "1.5"])
    assert exc.value.code == 2
    assert "'b'" in capsys.readouterr().err
    with pytest.raises(ConfigError, match="'rho'"):
        ExperimentConfig("simulate", rho=0.0).validate()


def test_config_file_and_flag_precedence(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"replicas": 2, "t": 3.0, "seed": 11}))
    out = tmp_path / "o.csv"
    assert main(["simulate", "--config", str(cfg), "--seed", "40", "--out", str(out)]) == 0
    rows = _rows(out)[1:]
    assert [r[0] for r in rows] == ["40", "41"] and rows[0][1] == "3"
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"nonsense": 1}))
    with pytest.raises(SystemExit):
        main(["simulate", "--config", str(bad)])


def test_tabulate_gauss(tmp_path):
    out = tmp_path / "g.csv"
    assert main(["tabulate", "gauss", "--grid", "0", "--out", str(out)]) == 0
    (row,) = _rows(out)[1:]
    assert float(row[1]) == pytest.approx(0.5, abs=1e-12) and row[2] == "1"


def test_tabulate_gue_grid(tmp_path):
    out = tmp_path / "gue.csv"
    assert main(["tabulate", "gue", "--lo", "-5", "--hi", "3", "--step", "0.1", "--out", str(out)]) == 0
    rows = _rows(out)[1:]
    assert len(rows) == 81 and all(r[2] == "1" for r in rows)
    f = [float(r[1]) for r in rows]
    assert all(b >= a for a, b in zip(f, f[1:]))


def test_crosscheck_branches(tmp_path):
    assert main(["crosscheck", "qlaplace", "--t", "0", "--x", "3", "--zeta", "-0.7",
                 "--out", str(tmp_path / "q.json")]) == 0
    rep = json.loads((tmp_path / "q.json").read_text())["report"]
    assert rep["mode"] == "exact" and rep["error"] < 1e-8
    assert main(["crosscheck", "transition", "--init", "0", "--final", "3", "--t", "1",
                 "--out", str(tmp_path / "t1.json")]) == 0
    assert json.loads((tmp_path / "t1.json").read_text())["report"]["oracle"] == "compound_poisson"
    assert main(["crosscheck", "transition", "--init", "0,1", "--final", "1,2", "--t", "0.3",
                 "--out", str(tmp_path / "t2.json")]) == 0
    assert json.loads((tmp_path / "t2.json").read_text())["report"]["oracle"] == "master_equation"
    assert main(["crosscheck", "moment", "--t", "1", "--x", "3", "--replicas", "20000",
                 "--out", str(tmp_path / "m.json")]) == 0


def test_crosscheck_tight_tolerance_fails(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"tolerances": {"exact": 1e-30}}))
    rc = main(["crosscheck", "transition", "--config", str(cfg), "--init", "0,1", "--final", "1,2",
               "--t", "0.3", "--out", str(tmp_path / "t.json")])
    assert rc == 1


def test_she_field(tmp_path):
    out = tmp_path / "f.csv"
    assert main(["she", "--eps", "0.01", "--t", "5", "--out", str(out)]) == 0
    rows = _rows(out)
    assert rows[0] == ["x", "y", "Z"] and len(rows) > 10
    assert any(ln.startswith("# scaling:") for ln in _comments(out))


def test_entry_point_version():
    r = subprocess.run([sys.executable, "-m", "hlpush.cli", "--version"], capture_output=True, text=True)
    assert r.returncode == 0 and r.stdout.strip()
