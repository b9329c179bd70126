import hashlib
import io
import json
import subprocess
import sys
from pathlib import Path

import pytest

from feverscreen.cli import main


def run(*argv):
    return main([str(a) for a in argv])


def run_proc(cwd, *argv, stdin=None):
    return subprocess.run([sys.executable, "-m", "feverscreen", *map(str, argv)], cwd=cwd,
                          input=stdin, capture_output=True, text=True, timeout=300)


@pytest.fixture(scope="module")
def small(tmp_path_factory):
    """A small generated cohort and a model trained on it."""
    d = tmp_path_factory.mktemp("cli")
    assert run("generate", "--out", d / "c.csv", "--n-positive", 80, "--n-negative", 80) == 0
    assert run("train", d / "c.csv", "--out", d / "m.json") == 0
    return d


def test_generate_outputs(small):
    lines = (small / "c.csv").read_text().splitlines()
    assert lines[0] == ",".join([f"r{k}" for k in range(1, 12)] + ["label"])
    assert len(lines) == 161
    split = json.loads((small / "c.split.json").read_text())
    assert [len(split[k]) for k in ("train", "val", "test")] == [112, 24, 24]


def test_train_outputs(small):
    rows = (small / "m.curve.csv").read_text().splitlines()
    assert rows[0] == "epoch,train_mse,val_mse,test_mse"
    assert 1 <= len(rows) - 1 <= 11
    assert (small / "m.curve.svg").read_text().lstrip().startswith("<?xml")
    assert json.loads((small / "m.json").read_text())["dims"] == [11, 8, 1]


def test_train_max_epochs_one(small, tmp_path):
    assert run("train", small / "c.csv", "--out", tmp_path / "m1.json", "--max-epochs", 1) == 0
    assert len((tmp_path / "m1.curve.csv").read_text().splitlines()) == 2


def test_evaluate_outputs(small, tmp_path, capsys):
    assert run("evaluate", small / "m.json", small / "c.csv", "--out", tmp_path / "r.json") == 0
    out = capsys.readouterr().out
    assert "Overall training performance" in out
    rep = json.loads((tmp_path / "r.json").read_text())
    assert set(rep["splits"]) == {"train", "val", "test", "overall"}
    assert rep["splits"]["overall"]["confusion"]["tp"] + \
        rep["splits"]["overall"]["confusion"]["fn"] == 80
    roc = (tmp_path / "r.roc.csv").read_text().splitlines()
    assert roc[0] == "threshold,tpr,fpr" and len(roc) == 103
    assert (tmp_path / "r.confusion.csv").exists() and (tmp_path / "r.roc.svg").exists()


def test_detect_records(small, tmp_path, monkeypatch, capsys):
    src = "39.0," * 10 + "39.0\n" + " ".join(["36.5"] * 15) + "\n\n# comment\n37.0 37.1\n"
    monkeypatch.setattr(sys, "stdin", io.StringIO(src))
    assert run("detect", small / "m.json") == 0
    recs = [json.loads(l) for l in capsys.readouterr().out.splitlines()]
    assert [r["verdict"] for r in recs] == ["positive", "negative", "insufficient-history"]
    assert recs[2]["score"] is None
    assert all(set(r) == {"score", "verdict", "threshold"} for r in recs)


def test_detect_from_file_and_bad_line(small, tmp_path, capsys):
    f = tmp_path / "in.txt"
    f.write_text("36.6 " * 11 + "\n")
    assert run("detect", small / "m.json", "--input", f) == 0
    assert json.loads(capsys.readouterr().out)["verdict"] == "negative"
    f.write_text("36.6 abc\n")
    assert run("detect", small / "m.json", "--input", f) == 2
    assert "line 1" in capsys.readouterr().err


def test_emit_hdl(small, tmp_path, capsys):
    out = tmp_path / "fd.v"
    assert run("emit-hdl", small / "m.json", "--out", out) == 0
    assert "saturation count: 0" in capsys.readouterr().out
    side = json.loads((tmp_path / "fd.manifest.json").read_text())
    text = (small / "m.json").read_text()
    assert side["fingerprint"] == hashlib.sha256(text.encode()).hexdigest()
    assert side["module"] == "fd" and side["qformat"]["name"] == "Q4.12"
    assert "module fd" in out.read_text()


def test_report(small, tmp_path):
    assert run("report", small / "m.json", small / "c.csv", "--out-dir", tmp_path / "rep",
               "--curve", small / "m.curve.csv") == 0
    names = {p.name for p in (tmp_path / "rep").iterdir()}
    assert names == {"evaluation.json", "roc_table.csv", "confusion.csv", "roc.csv",
                     "confusion.svg", "roc.svg", "training.svg"}
    table = (tmp_path / "rep" / "roc_table.csv").read_text().splitlines()
    assert table[0].startswith("multiset,false_positive_rate,true_positive_rate")
    assert [r.split(",")[0] for r in table[1:]] == [
        "Training", "Testing", "Validation", "Overall training performance"]


def test_config_file(small, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"max-epochs": 2, "seed": 5}))
    assert run("--config", cfg, "train", small / "c.csv", "--out", tmp_path / "m.json") == 0
    assert len((tmp_path / "m.curve.csv").read_text().splitlines()) <= 3
    cfg.write_text("[1, 2]")
    assert run("--config", cfg, "train", small / "c.csv") == 2


@pytest.mark.parametrize("argv", [
    ["generate", "--out", "{d}/x.csv", "--n-positive", "0"],
    ["generate", "--out", "{d}/missing/x.csv"],
    ["train", "{d}/nope.csv"],
    ["train", "{s}/c.csv", "--out", "{d}/m.json", "--learning-rate", "-1"],
    ["emit-hdl", "{s}/m.json", "--out", "{d}/a.v", "--frac-bits", "16", "--total-bits", "16"],
    ["emit-hdl", "{s}/m.json", "--out", "{d}/a.v", "--module-name", "module"],
    ["evaluate", "{d}/nope.json", "{s}/c.csv"],
    ["detect", "{s}/c.csv"],
])
def test_usage_errors_exit_2(small, tmp_path, argv):
    argv = [a.format(d=tmp_path, s=small) for a in argv]
    assert main(argv) == 2


def test_model_dataset_mismatch(small, tmp_path):
    assert run("generate", "--out", tmp_path / "w.csv", "--n-positive", 20, "--n-negative", 20,
               "--input-delays", 5) == 0
    assert run("evaluate", small / "m.json", tmp_path / "w.csv",
               "--out", tmp_path / "r.json") == 2


def test_bad_csv(small, tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text((small / "c.csv").read_text().replace(",1\n", ",7\n", 1))
    assert run("train", bad, "--out", tmp_path / "m.json") == 2


def _artifacts(d):
    return {p.relative_to(d).as_posix(): p.read_bytes() for p in sorted(d.rglob("*"))
            if p.is_file()}


def _pipeline(d):
    steps = [
        ["generate", "--out", "c.csv", "--n-positive", "60", "--n-negative", "60"],
        ["train", "c.csv", "--out", "m.json"],
        ["evaluate", "m.json", "c.csv", "--out", "r.json"],
        ["emit-hdl", "m.json", "--out", "fd.v"],
        ["report", "m.json", "c.csv", "--out-dir", "rep", "--curve", "m.curve.csv"],
    ]
    outs = [run_proc(d, *s) for s in steps]
    det = run_proc(d, "detect", "m.json", stdin="38.9 " * 11 + "\n" + "36.7 " * 12 + "\n")
    for r in outs + [det]:
        assert r.returncode == 0, r.stderr
    (d / "detect.jsonl").write_text(det.stdout)
    return _artifacts(d)


def test_every_subcommand_is_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    a.mkdir()
    b.mkdir()
    first, second = _pipeline(a), _pipeline(b)
    assert sorted(first) == sorted(second)
    assert len(first) >= 17
    for name in first:
        assert first[name] == second[name], name
