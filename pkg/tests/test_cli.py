import json

import pytest

from exactsem import documents
from exactsem.cli import main
from exactsem.expr import affine_form

from test_documents import lightbulb_doc


def write(path, doc):
    path.write_text(documents.dumps(doc), encoding="utf-8")
    return str(path)


def test_validate_ok_and_undeclared(tmp_path, capsys):
    good = write(tmp_path / "m.json", lightbulb_doc())
    assert main(["validate", good]) == 0
    assert "3 variables, acyclic" in capsys.readouterr().out
    doc = lightbulb_doc()
    doc["equations"]["L"] = "or(B1, Bx, E3)"
    bad = write(tmp_path / "bad.json", doc)
    assert main(["validate", bad]) == 2
    assert "'Bx'" in capsys.readouterr().err


def test_validate_reports_json_location(tmp_path, capsys):
    p = tmp_path / "broken.json"
    p.write_text('{"variables": [\n  "A",\n}', encoding="utf-8")
    assert main(["validate", str(p)]) == 2
    assert "broken.json:3:1" in capsys.readouterr().err


def test_solve(tmp_path, capsys):
    m = write(tmp_path / "m.json", lightbulb_doc())
    assert main(["solve", "--model", m, "--noise", '{"E1": 1, "E2": 0, "E3": 0}']) == 0
    assert json.loads(capsys.readouterr().out) == {"B1": 1.0, "B2": 0.0, "L": 1.0}
    assert main(["solve", "--model", m, "--intervention", '{"B1": 0}',
                 "--noise", '{"E1": 1, "E2": 0, "E3": 0}']) == 0
    assert json.loads(capsys.readouterr().out)["L"] == 0.0


def test_sample_csv_is_deterministic(tmp_path):
    m = write(tmp_path / "m.json", lightbulb_doc())
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for out in (a, b):
        assert main(["sample", "--model", m, "--n", "20", "--seed", "3", "--out", str(out)]) == 0
    assert a.read_bytes() == b.read_bytes()
    lines = a.read_text().splitlines()
    assert lines[0] == "B1,B2,L" and len(lines) == 21


def test_sample_requires_seed(tmp_path):
    m = write(tmp_path / "m.json", lightbulb_doc())
    with pytest.raises(SystemExit):
        main(["sample", "--model", m, "--n", "5"])


def test_demo_exit_codes(capsys):
    assert main(["demo", "wrong1", "--seed", "0"]) == 1
    out = capsys.readouterr().out
    assert "counterexample: ∅ <= do(X2=0)" in out
    assert main(["demo", "lightbulbs", "--seed", "0", "--samples", "5000"]) == 0


def test_equilibrate_writes_triple(tmp_path, capsys):
    from exactsem.demos import dynamics_spec
    spec = write(tmp_path / "dyn.json", documents.dynamics_to_doc(dynamics_spec()))
    out = tmp_path / "triple"
    assert main(["equilibrate", "--spec", spec, "--seed", "1", "--out", str(out)]) == 0
    assert sorted(p.name for p in out.iterdir()) == ["model.json", "omega.json", "report.json", "tau.json"]
    model = documents.model_from_doc(documents.load(out / "model.json"))
    coefs, _ = affine_form(model.equations["Y2"])
    got = {k.name: v for k, v in coefs.items()}
    assert got["Y1"] == pytest.approx(1 / 7) and got["E2"] == pytest.approx(10 / 7)


def test_marginalize_and_check_exact_round_trip(tmp_path, capsys):
    m = write(tmp_path / "m.json", lightbulb_doc())
    out = tmp_path / "t"
    flags = ["--seed", "4", "--samples", "4000"]
    assert main(["marginalize", "--model", m, "--drop", "L", "--mode", "childless", "--out", str(out)]
                + flags) == 0
    rep = tmp_path / "again.json"
    assert main(["check-exact", "--source", m, "--target", str(out / "model.json"),
                 "--tau", str(out / "tau.json"), "--omega", str(out / "omega.json"),
                 "--out", str(rep)] + flags) == 0
    assert rep.read_bytes() == (out / "report.json").read_bytes()


def test_marginalize_precondition_failure(tmp_path, capsys):
    m = write(tmp_path / "m.json", lightbulb_doc())
    assert main(["marginalize", "--model", m, "--drop", "B1", "--mode", "childless", "--seed", "0"]) == 2
    assert "not childless" in capsys.readouterr().err


def test_aggregate_rejects_unequal_column_sums(tmp_path, capsys):
    from exactsem.demos import micro_macro_model
    doc = documents.model_to_doc(micro_macro_model(A=((2.0, 3.0), (3.0, 1.0))))
    m = write(tmp_path / "mm.json", doc)
    assert main(["aggregate", "--model", m, "--seed", "0"]) == 2
    assert "column sums" in capsys.readouterr().err
