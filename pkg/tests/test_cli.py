import csv
import json
import math

import pytest

from meanproj.cli import ConfigError, ExperimentConfig, dumps, emit_report, main


def write_config(tmp_path, **data):
    path = tmp_path / "config.json"
    path.write_text(json.dumps(data))
    return str(path)


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_identities_mode_all_hold(capsys):
    assert main(["identities", "--trials", "500", "--seed", "42"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert len(lines) == 2000
    assert all(json.loads(line)["holds"] is True for line in lines)


def test_mean_mode_exact_for_functions_in_h(tmp_path):
    out = tmp_path / "out"
    cfg = write_config(tmp_path, functions=[{"name": "monomial", "k": 1}, {"name": "monomial", "k": 2}],
                       replicates=2000, seed=3, out=str(out))
    assert main(["mean", cfg]) == 0
    report = json.loads((out / "report.json").read_text())
    assert [r["z"] for r in report["minors"]] == [0.0, 0.0, 0.0]
    rows = read_csv(out / "report.csv")
    assert rows[0] == ["I", "mean", "variance", "stderr", "target", "z"]
    assert len(rows) == 1 + math.comb(3, 2)


def test_m_larger_than_n_writes_nothing(tmp_path):
    out = tmp_path / "out"
    fs = [{"name": "monomial", "k": k} for k in range(4)]
    cfg = write_config(tmp_path, functions=fs, out=str(out))
    assert main(["mean", cfg]) == 2
    assert not out.exists()


@pytest.mark.parametrize("data", [
    {"functions": [{"name": "sinc"}]},
    {"functions": [{"name": "monomial", "k": -1}]},
    {"functions": [{"name": "exp"}], "m": 2},
    {"functions": [{"name": "exp"}], "replicates": 0},
    {"functions": [{"name": "exp"}], "colour": "red"},
    {"functions": [{"name": "exp"}], "basis": {"family": "legendre", "n": 0}},
])
def test_invalid_configs(tmp_path, data):
    assert main(["mean", write_config(tmp_path, **data)]) == 2


def test_unreadable_config(tmp_path):
    assert main(["mean", str(tmp_path / "missing.json")]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["mean", str(bad)]) == 2


def test_unwritable_output(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    cfg = write_config(tmp_path, functions=[{"name": "exp"}], replicates=100, out=str(blocker / "sub"))
    assert main(["mean", cfg]) == 3


def test_variance_rows(tmp_path):
    out = tmp_path / "out"
    cfg = write_config(tmp_path, functions=[{"name": "monomial", "k": 2}, {"name": "exp"}],
                       replicates=5000, seed=1, out=str(out))
    assert main(["variance", cfg]) == 0
    rows = read_csv(out / "report.csv")
    assert [r[0] for r in rows] == ["k", "1", "2", "total"]
    report = json.loads((out / "report.json").read_text())
    assert report["closed_form"] == pytest.approx(sum(g["contribution"] for g in report["grades"]))


def test_byte_identical_reruns(tmp_path):
    texts = []
    for name, workers in (("a", 1), ("b", 1), ("c", 3)):
        out = tmp_path / name
        cfg = write_config(tmp_path, functions=[{"name": "exp"}, {"name": "runge"}], replicates=9000,
                           seed=5, workers=workers)
        assert main(["mean", cfg, "--out", str(out)]) == 0
        texts.append(((out / "report.json").read_bytes(), (out / "report.csv").read_bytes()))
    assert texts[0] == texts[1] == texts[2]


def test_sample_mode(tmp_path, capsys):
    cfg = write_config(tmp_path, basis={"family": "legendre", "n": 2}, replicates=5, seed=9)
    assert main(["sample", cfg]) == 0
    records = [json.loads(line) for line in capsys.readouterr().out.splitlines()]
    assert [r["replicate"] for r in records] == list(range(5))
    assert all(len(r["points"]) == 2 and math.isfinite(r["log_density"]) for r in records)


def test_discrete_mode(tmp_path):
    out = tmp_path / "out"
    cfg = write_config(tmp_path, kernel={"random": {"d": 6, "n": 3}}, seed=2, out=str(out))
    assert main(["discrete", cfg]) == 0
    report = json.loads((out / "report.json").read_text())
    assert report["passed"] and report["max_deviation"] <= 1e-10
    assert [r[0] for r in read_csv(out / "report.csv")] == ["m", "1", "2", "3"]


def test_basis_coefficient_function(tmp_path):
    out = tmp_path / "out"
    cfg = write_config(tmp_path, functions=[{"name": "basis", "coefficients": [0.0, 1.0, 2.0]}],
                       replicates=100, out=str(out))
    assert main(["mean", cfg]) == 0
    report = json.loads((out / "report.json").read_text())
    assert [r["target"] for r in report["minors"]] == pytest.approx([0.0, 1.0, 2.0], abs=1e-12)


def test_config_round_trip():
    data = {"mode": "variance", "functions": [{"name": "exp"}], "m": 1, "replicates": 10, "seed": 4}
    cfg = ExperimentConfig.from_dict(data)
    assert ExperimentConfig.from_dict(json.loads(json.dumps(cfg.to_dict()))) == cfg
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"functions": []})


def test_dumps_precision():
    x = 0.1 + 0.2
    assert float(json.loads(dumps({"x": x}))["x"]) == x
    assert dumps({"b": 1.0, "a": [float("nan"), 2]}) == '{"b": 1.0, "a": [null, 2]}'


def test_emit_report_formats(tmp_path):
    report = {"mode": "x", "value": 0.5, "table": [["k", "v"], [1, 0.25]]}
    emit_report(report, "json", tmp_path / "r.json")
    emit_report(report, "csv", tmp_path / "r.csv")
    assert json.loads((tmp_path / "r.json").read_text()) == {"mode": "x", "value": 0.5}
    assert (tmp_path / "r.csv").read_text() == "k,v\n1,0.25\n"
    with pytest.raises(ValueError):
        emit_report(report, "xml", tmp_path / "r.xml")
