import csv
import subprocess
import sys

import numpy as np
import pytest

from bdt.cli import main
from bdt.core import build
from bdt.ensemble import Ensemble
from bdt.model import load_model, save_model

TRAIN = ["--burnin", "0", "--postburnin", "70", "--thin", "7"]


def rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    assert main(["synth", "--pairs", "10", "--cycles", "30", "--seed", "3", "--out", str(d / "data.csv")]) == 0
    assert main(["train", "--data", str(d / "data.csv"), "--out", str(d / "model.json"), "--seed", "1",
                 "--burnin", "300", "--postburnin", "140", "--thin", "7"]) == 0
    return d


def test_synth_header(workdir):
    table = rows(workdir / "data.csv")
    assert table[0] == [f"X{i}" for i in range(1, 13)] + ["alert"]
    assert len(table) == 301


def test_train_writes_ten_trees(workdir, capsys):
    out = workdir / "small.json"
    assert main(["train", "--data", str(workdir / "data.csv"), "--out", str(out), *TRAIN]) == 0
    assert len(load_model(out)) == 10
    assert (workdir / "small.diagnostics.csv").exists()
    text = capsys.readouterr().out
    assert "ensemble size: 10" in text and "acceptance post-burn-in" in text


def test_train_deterministic(workdir):
    paths = [workdir / f"det{i}.json" for i in range(2)]
    for p in paths:
        assert main(["train", "--data", str(workdir / "data.csv"), "--out", str(p), "--seed", "5", *TRAIN]) == 0
    assert paths[0].read_bytes() == paths[1].read_bytes()
    assert (workdir / "det0.diagnostics.csv").read_bytes() == (workdir / "det1.diagnostics.csv").read_bytes()


def test_env_seed(workdir, monkeypatch):
    flag, env = workdir / "flag.json", workdir / "env.json"
    assert main(["train", "--data", str(workdir / "data.csv"), "--out", str(flag), "--seed", "9", *TRAIN]) == 0
    monkeypatch.setenv("BDT_SEED", "9")
    assert main(["train", "--data", str(workdir / "data.csv"), "--out", str(env), *TRAIN]) == 0
    assert env.read_bytes() == flag.read_bytes()
    monkeypatch.setenv("BDT_SEED", "abc")
    assert main(["train", "--data", str(workdir / "data.csv"), "--out", str(env), *TRAIN]) == 2


def test_exit_codes(workdir, capsys):
    assert main(["train", "--data", str(workdir / "missing.csv"), "--out", str(workdir / "x.json")]) == 1
    assert main(["train", "--data", str(workdir / "data.csv"), "--out", str(workdir / "x.json"), "--pmin", "0"]) == 2
    assert main(["select", "--model", str(workdir / "model.json"), "--method", "map", "--out", str(workdir / "s.json")]) == 2
    with pytest.raises(SystemExit) as exc:
        main(["train"])
    assert exc.value.code == 2
    capsys.readouterr()


def test_predict_rates(workdir, capsys):
    out = workdir / "env.csv"
    assert main(["predict", "--model", str(workdir / "model.json"), "--data", str(workdir / "data.csv"),
                 "--out", str(out)]) == 0
    text = capsys.readouterr().out
    vals = {ln.split(":")[0]: float(ln.split(":")[1]) for ln in text.splitlines() if ln.startswith("confident_") or ln.startswith("uncertain")}
    assert sum(vals.values()) == pytest.approx(1.0, abs=1e-3)
    assert len(rows(out)) == 301


def test_predict_floor_threshold(workdir, capsys):
    out = workdir / "env05.csv"
    assert main(["predict", "--model", str(workdir / "model.json"), "--data", str(workdir / "data.csv"),
                 "--gamma0", "0.5", "--out", str(out)]) == 0
    assert all(r[-2] != "uncertain" for r in rows(out)[1:])
    capsys.readouterr()


def test_predict_hand_built(tmp_path, capsys):
    a = build((0, 0.5, (5, 0), (0, 5)))
    b = build((0, 0.7, (5, 0), (0, 5)))
    save_model(Ensemble([a, b], 2, ("x",), [[0.0, 1.0]], label_name="y"), tmp_path / "m.json")
    (tmp_path / "d.csv").write_text("x,y\n0.2,0\n0.6,1\n0.9,0\n")
    out = tmp_path / "e.csv"
    assert main(["predict", "--model", str(tmp_path / "m.json"), "--data", str(tmp_path / "d.csv"), "--out", str(out)]) == 0
    assert [r[-2] for r in rows(out)[1:]] == ["confident-correct", "uncertain", "confident-incorrect"]
    text = capsys.readouterr().out
    assert "confident_correct: 0.3333" in text and "uncertain: 0.3333" in text
    (tmp_path / "bad.csv").write_text("x,z,y\n0.2,1,0\n")
    assert main(["predict", "--model", str(tmp_path / "m.json"), "--data", str(tmp_path / "bad.csv")]) == 1


@pytest.mark.parametrize("method", ["sc", "map", "mapw"])
def test_select(workdir, method, capsys):
    out = workdir / f"{method}.json"
    argv = ["select", "--model", str(workdir / "model.json"), "--method", method, "--out", str(out)]
    if method != "mapw":
        argv += ["--data", str(workdir / "data.csv")]
    if method == "map":
        argv.append("--audit")
    assert main(argv) == 0
    single = load_model(out)
    assert len(single) == 1
    assert (workdir / f"{method}.txt").read_text().startswith("node01 ")
    if method == "map":
        audit = rows(workdir / "map.scores.csv")
        assert audit[0] == ["index", "score", "nodes", "chosen"] and len(audit) == 21
        assert sum(int(r[3]) for r in audit[1:]) == 1
    capsys.readouterr()


def test_importance(workdir, tmp_path, capsys):
    out = tmp_path / "imp.csv"
    assert main(["importance", "--model", str(workdir / "model.json"), "--out", str(out)]) == 0
    table = rows(out)
    assert table[0] == ["feature", "weight", "rank"] and len(table) == 13
    assert sum(float(r[1]) for r in table[1:]) == pytest.approx(1.0, abs=1e-12)
    assert [int(r[2]) for r in table[1:]] == list(range(1, 13))
    capsys.readouterr()


def test_crossval(workdir, capsys):
    out = workdir / "cv.csv"
    assert main(["crossval", "--data", str(workdir / "data.csv"), "--out", str(out), *TRAIN]) == 0
    table = rows(out)
    assert len(table) == 7 and table[-1][0] == "mean"
    assert table[0][:4] == ["fold", "n_train", "n_test", "ensemble_error"]
    capsys.readouterr()


def test_console_module(workdir):
    res = subprocess.run([sys.executable, "-m", "bdt.cli", "importance", "--model", str(workdir / "model.json")],
                         capture_output=True, text=True)
    assert res.returncode == 0 and "sum 1.000" in res.stdout
