import csv
import json

import pytest

from xlre.cli import main

TINY_MODEL = {"n_layers": 1, "hidden_size": 16, "n_heads": 2, "max_positions": 64}


def run(*args):
    return main([str(a) for a in args])


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    data, runs = root / "data", root / "runs"
    (root / "model.json").write_text(json.dumps(TINY_MODEL))
    raw = ",".join(str(data / f"l{i}.raw.txt") for i in (1, 2, 3))
    assert run("gen-data", "--seed", 4, "--n", 60, "--n-raw", 80, "--out", data) == 0
    assert run("build-vocab", "--corpus", raw, "--size", 300, "--out", root / "vocab.txt") == 0
    assert run("pretrain", "--text", raw, "--vocab", root / "vocab.txt", "--model-config", root / "model.json",
               "--steps", 5, "--seed", 1, "--out", root / "pre.ckpt") == 0
    for lang in ("l1", "l2"):
        assert run("train", "--corpus", data / f"{lang}.train.jsonl", "--vocab", root / "vocab.txt",
                   "--init", root / "pre.ckpt", "--seeds", "1,2", "--epochs", 2, "--lr", 1e-3,
                   "--max-len", 64, "--out", runs / lang) == 0
    assert run("eval", "--ckpt", runs / "l1", "--test", data / "l1.test.jsonl", "--out", root / "eval") == 0
    assert run("transfer-matrix", "--ckpts", runs, "--tests", data, "--out", root / "tm") == 0
    assert run("report", "--in", root, "--out", root / "report") == 0
    return root


def test_gen_data_outputs(pipeline):
    data = pipeline / "data"
    for lang in ("l1", "l2", "l3"):
        for part in ("train", "dev", "test"):
            assert (data / f"{lang}.{part}.jsonl").exists()
    manifest = json.loads((data / "manifest.json").read_text())
    assert manifest["command"] == "gen-data" and manifest["seed"] == 4
    assert manifest["config"]["n"] == 60 and manifest["format_versions"]["checkpoint"] == 1


def test_train_outputs(pipeline):
    run_dir = pipeline / "runs" / "l1"
    for seed in (1, 2):
        assert (run_dir / f"seed{seed}.ckpt").exists()
        lines = (run_dir / f"seed{seed}.log").read_text().splitlines()
        assert len(lines) == 2 and all(len(line.split("\t")) == 6 for line in lines)
        meta = json.loads((run_dir / f"seed{seed}.ckpt.json").read_text())
        assert meta["languages"] == ["l1"] and 1 <= meta["best_epoch"] <= 2
    assert json.loads((run_dir / "manifest.json").read_text())["seed"] == [1, 2]


def test_eval_csv(pipeline):
    with open(pipeline / "eval" / "metrics.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert list(rows[0]) == ["class", "P", "R", "F1", "support"]
    assert rows[-1]["class"] == "micro" and 0.0 <= float(rows[-1]["F1"]) <= 1.0
    assert len(rows) == 7


def test_transfer_matrix_shape(pipeline):
    with open(pipeline / "tm" / "transfer.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0][0] == "source" and rows[0][-1] == "rho"
    assert [r[0] for r in rows[1:]] == ["l1", "l2"]
    assert all(len(r) == len(rows[0]) for r in rows)


def test_transfer_matrix_two_languages(pipeline, tmp_path):
    tests = tmp_path / "tests"
    tests.mkdir()
    for lang in ("l1", "l2"):
        (tests / f"{lang}.test.jsonl").write_text((pipeline / "data" / f"{lang}.test.jsonl").read_text())
    assert run("transfer-matrix", "--ckpts", pipeline / "runs", "--tests", tests, "--out", tmp_path / "tm") == 0
    rows = list(csv.reader(open(tmp_path / "tm" / "transfer.csv")))
    assert rows[0] == ["source", "l1", "l2", "rho"] and len(rows) == 3


def test_report_artifacts(pipeline):
    rep = pipeline / "report"
    assert (rep / "report.csv").read_text().startswith("run,label,P,R,F1")
    for svg in ("f1_by_scheme.svg", "transfer.svg"):
        text = (rep / svg).read_text()
        assert text.lstrip().startswith("<?xml") and "</svg>" in text


def test_report_is_reproducible(pipeline, tmp_path):
    assert run("report", "--in", pipeline, "--out", tmp_path / "again") == 0
    for name in ("report.csv", "f1_by_scheme.svg", "transfer.svg"):
        assert (tmp_path / "again" / name).read_bytes() == (pipeline / "report" / name).read_bytes()


def test_manifest_rerun_is_bit_identical(pipeline, tmp_path):
    manifest = pipeline / "runs" / "l1" / "manifest.json"
    assert run("train", "--config", manifest, "--out", tmp_path / "again") == 0
    for name in ("seed1.ckpt", "seed2.ckpt", "seed1.ckpt.json"):
        assert (tmp_path / "again" / name).read_bytes() == (pipeline / "runs" / "l1" / name).read_bytes()
    assert run("gen-data", "--config", pipeline / "data" / "manifest.json", "--out", tmp_path / "data") == 0
    assert (tmp_path / "data" / "l3.test.jsonl").read_bytes() == (pipeline / "data" / "l3.test.jsonl").read_bytes()


def test_inputs_not_mutated(pipeline, tmp_path):
    before = (pipeline / "data" / "l1.train.jsonl").read_bytes()
    run("train", "--config", pipeline / "runs" / "l1" / "manifest.json", "--seeds", "3", "--out", tmp_path / "x")
    assert (pipeline / "data" / "l1.train.jsonl").read_bytes() == before


def test_missing_corpus(capsys, tmp_path):
    code = run("train", "--seeds", "1", "--out", tmp_path / "x")
    assert code != 0
    err = capsys.readouterr().err.strip()
    assert len(err.splitlines()) == 1 and "'corpus'" in err


def test_seed_required(capsys, tmp_path):
    assert run("gen-data", "--out", tmp_path / "x") != 0
    assert "'seed'" in capsys.readouterr().err


def test_unknown_command(capsys):
    assert run("frobnicate") != 0
    assert "unknown command" in capsys.readouterr().err


def test_vocabulary_mismatch(pipeline, tmp_path, capsys):
    other = tmp_path / "other.txt"
    assert run("build-vocab", "--corpus", pipeline / "data" / "l1.raw.txt", "--size", 150, "--out", other) == 0
    code = run("train", "--corpus", pipeline / "data" / "l1.train.jsonl", "--vocab", other,
               "--init", pipeline / "pre.ckpt", "--seeds", "1", "--out", tmp_path / "x")
    assert code == 1 and "VocabularyMismatch" in capsys.readouterr().err


def test_flags_override_config(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"n": 5, "n_raw": 3, "seed": 9}))
    assert run("gen-data", "--config", cfg, "--n", 10, "--out", tmp_path / "d") == 0
    manifest = json.loads((tmp_path / "d" / "manifest.json").read_text())
    assert manifest["config"]["n"] == 10 and manifest["seed"] == 9


def test_unknown_config_key(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"bogus": 1}))
    assert run("gen-data", "--config", cfg, "--seed", 1, "--out", tmp_path / "d") == 2
    assert "bogus" in capsys.readouterr().err


def test_eval_manifest_rerun(pipeline, tmp_path):
    assert run("eval", "--config", pipeline / "eval" / "manifest.json", "--out", tmp_path / "e") == 0
    assert (tmp_path / "e" / "metrics.csv").read_bytes() == (pipeline / "eval" / "metrics.csv").read_bytes()
