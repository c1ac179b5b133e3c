import csv
import io
import json
import subprocess
import sys
from fractions import Fraction

import pytest
import yaml

from sdioph import __version__, experiments
from sdioph.cli import main
from sdioph.config import ConfigError, from_dict, validate
from sdioph.lattice import BudgetExceeded, InvariantError, build_gamma, successive_minima
from sdioph.measure import good_certify
from sdioph.padic import PAdicBall
from sdioph.poly import Poly
from sdioph.report import Report, Table, emit, minima_table, plain

LATTICE = {"kind": "lattice-audit", "seed": 1,
           "params": {"primes": [2, 3], "n_max": 2, "j_max": 3, "instances": 8, "Q": [1, 2]}}
COVERING = {"kind": "covering", "seed": 2,
            "params": {"p": 3, "map": {"type": "veronese", "n": 2}, "domain": {"center": [1], "k": 1},
                       "theta": {"3": 3, "1": 9}, "delta": "1/2", "t_values": [2, 3],
                       "samples": 6}}


def write(tmp_path, data, name="c.yaml"):
    path = tmp_path / name
    path.write_text(yaml.safe_dump(data))
    return str(path)


def test_version(capsys):
    assert main(["version"]) == 0
    assert capsys.readouterr().out.strip() == __version__


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "sdioph", "version"], capture_output=True,
                         text=True, check=True)
    assert out.stdout.strip() == __version__


def test_empty_config_is_rejected(tmp_path, capsys):
    path = tmp_path / "empty.yaml"
    path.write_text("")
    assert main(["run", str(path)]) == 2
    errs = json.loads(capsys.readouterr().err)["errors"]
    assert errs and all({"field", "error"} <= set(e) for e in errs)


def test_schema_errors_are_listed(tmp_path, capsys):
    bad = {"kind": "lattice-audit", "params": {"primes": [4], "n_max": 0, "bogus": 1}}
    assert main(["validate", write(tmp_path, bad)]) == 2
    fields = {e["field"] for e in json.loads(capsys.readouterr().err)["errors"]}
    assert {"params.primes", "params.n_max", "params.bogus"} <= fields


def test_unknown_kind_and_missing_file(tmp_path, capsys):
    assert main(["validate", write(tmp_path, {"kind": "nope"})]) == 2
    assert main(["run", str(tmp_path / "missing.yaml")]) == 2
    with pytest.raises(ConfigError):
        from_dict({"kind": "covering", "params": {}})
    assert validate({}) != []


def test_validate_and_overrides(tmp_path, capsys):
    path = write(tmp_path, LATTICE)
    assert main(["validate", path, "params.instances=3", "seed=9"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["valid"] and out["config"]["params"]["instances"] == 3
    assert out["config"]["seed"] == 9
    assert out["config"]["params"]["delta"] == "1/2"      # default filled in
    assert main(["validate", path, "params.instances=-1"]) == 2


def test_run_writes_outputs_and_reruns_are_byte_identical(tmp_path, monkeypatch):
    monkeypatch.setenv("SDIOPH_OUT", str(tmp_path / "out"))
    path = write(tmp_path, LATTICE)
    assert main(["run", path]) == 0
    files = sorted((tmp_path / "out").iterdir())
    first = {f.name: f.read_bytes() for f in files}
    assert "lattice-audit.json" in first
    assert main(["run", path]) == 0
    again = {f.name: f.read_bytes() for f in sorted((tmp_path / "out").iterdir())}
    assert again == first
    rec = json.loads(first["lattice-audit.json"])
    assert rec["summary"]["failures"] == 0


def test_output_dir_from_config_beats_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("SDIOPH_OUT", str(tmp_path / "env"))
    data = dict(LATTICE, output={"dir": str(tmp_path / "cfg"), "name": "x"})
    assert main(["run", write(tmp_path, data)]) == 0
    assert (tmp_path / "cfg" / "x.json").exists()
    assert not (tmp_path / "env").exists()


def test_covering_csv_columns(tmp_path):
    data = dict(COVERING, output={"dir": str(tmp_path), "name": "cov"})
    assert main(["run", write(tmp_path, data)]) == 0
    rows = list(csv.reader(io.StringIO((tmp_path / "cov.csv").read_text())))
    assert rows[0] == ["t", "frequency:f64", "floor:f64", "sigma:f64"]
    assert [r[0] for r in rows[1:]] == ["2", "3"]


def test_invariant_breach_exits_4(tmp_path, monkeypatch):
    def boom(cfg):
        raise InvariantError("forced")
    monkeypatch.setitem(experiments.RUNNERS, "lattice-audit", boom)
    data = dict(LATTICE, output={"dir": str(tmp_path)})
    assert main(["run", write(tmp_path, data)]) == 4


def test_partial_report_exits_3(tmp_path, monkeypatch):
    def partial(cfg):
        return Report(cfg.kind, cfg.resolved(), partial=True)
    monkeypatch.setitem(experiments.RUNNERS, "lattice-audit", partial)
    data = dict(LATTICE, output={"dir": str(tmp_path)})
    assert main(["run", write(tmp_path, data)]) == 3
    assert json.loads((tmp_path / "lattice-audit.json").read_text())["partial"] is True


def test_budget_exceeded_exits_3(tmp_path, monkeypatch):
    def over(cfg):
        raise BudgetExceeded("forced")
    monkeypatch.setitem(experiments.RUNNERS, "lattice-audit", over)
    data = dict(LATTICE, output={"dir": str(tmp_path)})
    assert main(["run", write(tmp_path, data)]) == 3


def test_good_certify_run(tmp_path):
    data = {"kind": "good-certify", "output": {"dir": str(tmp_path)},
            "params": {"p": 5, "f": {"3": 1}, "C": "3^(8/3)", "alpha": "1/3",
                       "eps_exponents": [1, 2, 3]}}
    assert main(["run", write(tmp_path, data)]) == 0
    rec = json.loads((tmp_path / "good-certify.json").read_text())
    assert rec["summary"]["verdict"] == "pass" and not rec["partial"]


def test_good_report_json_round_trip():
    g = good_certify(Poly(1, {(3,): 1}), PAdicBall(5, (0,), 0), 9, Fraction(1, 3), [1, 2, 3])
    rec = json.loads(emit(g, "json"))
    assert rec == plain(g.to_record())
    assert rec["verdict"] == g.verdict
    assert [c["eps"] for c in rec["checks"]][:3] == ["1/5", "1/25", "1/125"]


def test_minima_csv():
    L = build_gamma([5], 2, 3)
    res = successive_minima(L, 2)
    text = emit(minima_table(res), "csv").decode()
    rows = list(csv.reader(io.StringIO(text)))
    assert rows[0] == ["k", "lambda", "witness"]
    assert len(rows) == 1 + len(res.lambdas)
    for row, lam, w in zip(rows[1:], res.lambdas, res.witnesses):
        assert Fraction(row[1]) == lam
        assert [int(v) for v in row[2].split()] == list(w)


def test_emit_exact_and_float_cells():
    t = Table(["q", "x"])
    t.add(Fraction(1, 3), 0.1)
    rep = Report("k", {}, tables={"t": t})
    assert emit(rep, "csv").decode().splitlines() == ["q,x:f64", "1/3,0.10000000000000001"]
    assert json.loads(emit(rep, "json"))["tables"]["t"]["rows"] == [["1/3", 0.1]]
    with pytest.raises(ValueError):
        emit(rep, "xml")
