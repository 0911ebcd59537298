import csv
import io
import json
import subprocess
import sys

import pytest

from bcidx.cli import load_model, main
from bcidx.fixtures import data_path, play_outside
from bcidx.idx import IDX

DATA = str(data_path("play_outside.csv"))
CONFIG = str(data_path("play_outside.toml"))


@pytest.fixture(scope="module")
def model(tmp_path_factory):
    path = tmp_path_factory.mktemp("m") / "model.json"
    assert main(["train", "--config", CONFIG, "--data", DATA, "--out", str(path)]) == 0
    return str(path)


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_train_reproduces_fixture(model):
    clf, cuts = load_model(model)
    assert clf == play_outside() and cuts == {}


def test_predict(capsys, model):
    code, out, _ = run(capsys, "predict", "--model", model, "--data", DATA)
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert len(rows) == 18
    assert list(rows[0]) == ["row", "w", "t", "p", "r", "P(r=+)", "P(r=-)", "o", "P(o=+)", "P(o=-)"]
    first = rows[0]
    assert abs(float(first["P(o=+)"]) + float(first["P(o=-)"]) - 1) < 1e-5


def test_explain_and_export(capsys, model, tmp_path):
    dot = tmp_path / "x.dot"
    code, out, _ = run(capsys, "explain", "--model", model, "--instance", "w=l,t=m,p=l", "--dot", str(dot))
    assert code == 0
    idx = IDX.from_json(out)
    assert idx.explanandum == "o" and idx.kit == "md"
    assert idx.relation("−") == {("t", "o"), ("w", "o")}
    stored = tmp_path / "x.json"
    stored.write_text(out)
    code, exported, _ = run(capsys, "export", "--idx", str(stored))
    assert code == 0 and exported == dot.read_text()


def test_explain_by_row_and_attr_kit(capsys, model, tmp_path):
    code, out, _ = run(capsys, "explain", "--model", model, "--data", DATA, "--row", "0", "--kit", "cf")
    assert code == 0 and json.loads(out)["kit"] == "cf"
    scores = tmp_path / "s.csv"
    scores.write_text("instance,observation,output,score\n0,w,o,-0.4\n0,t,o,0.2\n0,p,o,0.0\n")
    code, out, _ = run(capsys, "explain", "--model", model, "--data", DATA, "--row", "0", "--kit", f"file:{scores}")
    assert code == 0
    rel = json.loads(out)["relations"]
    assert rel == {"attr+": [["t", "o"]], "attr−": [["w", "o"]]}


def test_evaluate_reports(capsys, model):
    code, out, _ = run(capsys, "evaluate", "--model", model, "--data", DATA, "--report", "prevalence")
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert {(r["kit"], r["relation"]): r["percent"] for r in rows}[("md", "+")] == "53.333333"
    code, out, _ = run(capsys, "evaluate", "--model", model, "--data", DATA, "--report", "agreement")
    assert code == 0 and out.count("\n") == 2
    code, out, _ = run(capsys, "evaluate", "--report", "props", "--trials", "5")
    assert code == 0 and out.startswith("proposition,")
    code, out, _ = run(capsys, "evaluate", "--model", model, "--data", DATA, "--report", "complexity", "--limit", "2")
    assert code == 0 and len(out.splitlines()) == 1 + 2 * 2


def test_outputs_are_byte_identical(capsys, model):
    argv = ["evaluate", "--model", model, "--data", DATA, "--report", "monotonicity", "--kit", "sd", "--kit", "lime",
            "--attr-samples", "300", "--seed", "4"]
    first = run(capsys, *argv)
    assert first[0] == 0
    assert run(capsys, *argv) == first


def test_exit_codes(capsys, model, tmp_path):
    assert run(capsys, "explain", "--model", model)[0] == 1
    assert run(capsys, "explain", "--model", model, "--instance", "w=l,t=m,p=l", "--kit", "zz")[0] == 1
    with pytest.raises(SystemExit) as exc:
        main(["bogus"])
    assert exc.value.code == 1
    code, _, err = run(capsys, "explain", "--model", str(tmp_path / "none.json"), "--instance", "w=l")
    assert code == 2 and "cannot read model" in err
    assert run(capsys, "explain", "--model", model, "--instance", "w=q,t=m,p=l")[0] == 2
    code, _, err = run(capsys, "explain", "--model", model, "--instance", "w=l,t=m,p=l", "--kit", "cf",
                       "--cf-budget", "1")
    assert code == 3 and "budget" in err


def test_module_entry_point(model):
    proc = subprocess.run(
        [sys.executable, "-m", "bcidx.cli", "explain", "--model", model, "--instance", "w=l,t=m,p=l", "--kit", "sd"],
        capture_output=True, text=True, check=False,
    )
    assert proc.returncode == 0, proc.stderr
    assert json.loads(proc.stdout)["kit"] == "sd"
