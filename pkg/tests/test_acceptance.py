"""Acceptance criteria 1-9, each printed as one PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v -s``; the summary block at the
end of the pytest output lists every criterion again.
"""

import csv
import math
import random
import subprocess
import sys
import time
import xml.etree.ElementTree as ET
from pathlib import Path
from statistics import median

import numpy as np
import pytest

from xlre import transformer as tf
from xlre.checkpoint import load_model, save_model
from xlre.corpus import EntityMention, RelationInstance, Sentence, corpus_candidates
from xlre.encoding import EncodedExample, InstanceEncoder
from xlre.errors import VocabularyMismatch
from xlre.evaluation import TransferMatrix, compute_metrics, compute_rho
from xlre.head import ClassifierHead, SummaryScheme, classify, summarize
from xlre.model import RelationModel
from xlre.synthetic import DEFAULT_SCHEMA, LanguageSpec, generate_synthetic
from xlre.tokenizer import CONT, Vocabulary, build_vocabulary, tokenize
from xlre.training import TrainConfig, fine_tune, mlm_eval_loss, predict_classes, pretrain_mlm, to_sequences
from xlre.transformer import ModelConfig

from .helpers import finite_difference_check

SCHEMA = DEFAULT_SCHEMA
RESULTS: dict[int, str] = {}
SEEDS = (1, 2, 3, 4, 5)


def record(n: int, ok: bool, detail: str, seconds: float) -> None:
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'} | {detail} | {seconds:.1f}s"
    RESULTS[n] = line
    print("\n" + line, flush=True)
    assert ok, line


def f1_on(model, examples):
    return compute_metrics(predict_classes(model, examples), [e.label for e in examples], SCHEMA).f1


def train_eval(train, dev, tests, scheme, seed, epochs=10, lr=1e-3, encoder_params=None, cfg=None):
    cfg = cfg or ModelConfig(vocab_size=VOCAB_SIZE[0])
    model = RelationModel.create(cfg, SummaryScheme("emp"), scheme, SCHEMA.num_classes, len(SCHEMA.entity_types),
                                 seed, encoder_params)
    rec = fine_tune(model, train, dev, TrainConfig(learning_rate=lr, epochs=epochs, early_stop_patience=None),
                    seed, SCHEMA.class_names())
    return {name: f1_on(rec.model, ex) for name, ex in tests.items()}


VOCAB_SIZE = [0]


# 1

def test_criterion_1_gradients():
    t0 = time.perf_counter()
    cfg = ModelConfig(n_layers=1, hidden_size=8, n_heads=2, ffn_size=16, max_positions=16, vocab_size=16,
                      dropout_rate=0.0, dtype="float64")
    batch = [
        EncodedExample((2, 5, 11, 12, 5, 13, 6, 14, 6, 3), 1, 4, 5, 7, 2, 0, 1),
        EncodedExample((2, 9, 5, 11, 5, 6, 12, 6, 3), 2, 4, 5, 7, 1, 2, 2),
    ]
    worst, groups = 0.0, set()
    for scheme in (SummaryScheme("ss", append_type_embedding=True, type_dim=3),
                   SummaryScheme("es", append_type_embedding=True, type_dim=3),
                   SummaryScheme("emp", append_type_embedding=True, type_dim=3)):
        model = RelationModel.create(cfg, scheme, "etm", 4, 3, seed=1)
        rng = np.random.default_rng(0)
        for k in model.params:
            model.params[k] += rng.normal(0, 0.3, model.params[k].shape)
        errors = finite_difference_check(lambda: model.loss_and_grads(batch), model.params)
        worst = max(worst, max(errors.values()))
        groups |= set(errors)
    seconds = time.perf_counter() - t0
    expected = set(tf.parameter_names(cfg)) - {"mlm.bias"}
    ok = worst <= 1e-4 and expected <= groups and seconds < 60
    record(1, ok, f"max relative error {worst:.2e} over {len(groups)} tensors (limit 1e-4)", seconds)


# 2

def test_criterion_2_invariants():
    t0 = time.perf_counter()
    rng = np.random.default_rng(0)
    cfg = ModelConfig(n_layers=2, hidden_size=16, n_heads=4, max_positions=32, vocab_size=40, dropout_rate=0.0,
                      dtype="float64")
    attn_err = ln_mean = ln_var = 0.0
    for trial in range(50):
        params = tf.init_parameters(cfg, trial)
        params = {k: v + rng.normal(0, 0.5, v.shape) for k, v in params.items()}
        ids = rng.integers(0, 40, size=(3, int(rng.integers(2, 32))))
        _, cache = tf.forward(params, cfg, ids)
        for c in cache.layers:
            attn_err = max(attn_err, np.abs(c.probs.sum(-1) - 1).max())
            for xhat in (c.ln1_xhat, c.ln2_xhat):
                ln_mean = max(ln_mean, np.abs(xhat.mean(-1)).max())
                ln_var = max(ln_var, np.abs(xhat.var(-1) - 1).max())
    sm_err = 0.0
    for _ in range(1000):
        n = int(rng.integers(2, 14))
        p, _ = classify(ClassifierHead(rng.normal(size=(n, 5)), rng.normal(size=n) * 10), rng.normal(size=5))
        sm_err = max(sm_err, abs(p.sum() - 1))
    emp_bad = 0
    for _ in range(1000):
        T, H = int(rng.integers(4, 30)), int(rng.integers(1, 8))
        a = int(rng.integers(1, T - 2))
        b = int(rng.integers(a, T - 2))
        c_ = int(rng.integers(b + 1, T - 1))
        d = int(rng.integers(c_, T))
        hidden = rng.normal(size=(T, H))
        ex = EncodedExample(tuple([1] * T), a, b, c_, d, 0)
        out = summarize(hidden, ex, SummaryScheme("emp"))
        want = [max(hidden[t][j] for t in range(lo, hi + 1)) for lo, hi in ((a, b), (c_, d)) for j in range(H)]
        emp_bad += out.tolist() != want
    vocab = Vocabulary(["a", "b", "ab", CONT + "a", CONT + "b", CONT + "ab"], SCHEMA.entity_types)
    pyrng = random.Random(0)
    rt_bad = 0
    for i in range(1000):
        words = ["".join(pyrng.choice("ab") for _ in range(pyrng.randint(1, 5)))
                 for _ in range(pyrng.randint(2, 30))]
        n = len(words)
        s1 = pyrng.randint(1, n - 1)
        e1 = pyrng.randint(s1, n - 1)
        s2 = pyrng.randint(e1 + 1, n)
        e2 = pyrng.randint(s2, n)
        m1 = EntityMention("x", s1, e1, pyrng.choice(SCHEMA.entity_types))
        m2 = EntityMention("y", s2, e2, pyrng.choice(SCHEMA.entity_types))
        inst = RelationInstance(Sentence(f"s{i}", words, "", (m1, m2)), m1, m2, 0)
        ex = InstanceEncoder(vocab, "etm" if i % 2 else "um", 512).encode(inst)
        drop = {0, len(ex) - 1, *ex.markers}
        restored = [p for k, p in enumerate(ex.piece_ids) if k not in drop]
        rt_bad += restored != list(tokenize(words, vocab).piece_ids)
    seconds = time.perf_counter() - t0
    ok = (attn_err <= 1e-6 and ln_mean <= 1e-6 and ln_var <= 1e-5 and sm_err <= 1e-9 and emp_bad == 0
          and rt_bad == 0 and seconds < 60)
    record(2, ok, f"attention {attn_err:.1e}, LN mean {ln_mean:.1e} var {ln_var:.1e}, softmax {sm_err:.1e}, "
                  f"EMP mismatches {emp_bad}/1000, round-trip mismatches {rt_bad}/1000", seconds)


# 3

def test_criterion_3_metrics():
    t0 = time.perf_counter()
    rng = random.Random(0)
    names = SCHEMA.class_names()
    C = len(names)
    bad = 0
    for _ in range(200):
        n = rng.randint(0, 60)
        gold = [rng.choice([0, 0, rng.randrange(C)]) for _ in range(n)]
        pred = [g if rng.random() < 0.5 else rng.randrange(C) for g in gold]
        rep = compute_metrics(pred, gold, names)
        conf = [[0] * C for _ in range(C)]
        for p, g in zip(pred, gold):
            conf[g][p] += 1
        for k in range(C):
            cls = range(1, C) if k == 0 else [k]
            tp = sum(conf[j][j] for j in cls)
            pp = sum(conf[g][p] for g in range(C) for p in cls)
            gp = sum(conf[g][p] for g in cls for p in range(C))
            P = tp / pp if pp else 0.0
            R = tp / gp if gp else 0.0
            F = 2 * P * R / (P + R) if P + R else 0.0
            got = rep if k == 0 else rep.per_type[names[k]]
            bad += not (math.isclose(got.precision, P, abs_tol=1e-12) and math.isclose(got.recall, R, abs_tol=1e-12)
                        and math.isclose(got.f1, F, abs_tol=1e-12))
    rho = compute_rho(TransferMatrix(["en", "ar"], {("en", "ar"): 49.7, ("ar", "ar"): 72.9}), "en")
    seconds = time.perf_counter() - t0
    ok = bad == 0 and abs(rho - 0.68) <= 0.005
    record(3, ok, f"oracle mismatches {bad} (micro + per-type, 200 sets); rho(en->ar) = {rho:.4f} (0.68 +/- 0.005)",
           seconds)


# 4

def test_criterion_4_overfit():
    t0 = time.perf_counter()
    corpus = generate_synthetic([LanguageSpec("A", "SVO", 0.5, 1)], SCHEMA, 200, True, seed=11)
    instances = corpus_candidates(corpus.sentences["A"], SCHEMA).instances[:200]
    vocab = build_vocabulary([s.words for s in corpus.sentences["A"]], 1000, SCHEMA)
    train = InstanceEncoder(vocab, "etm", 128).encode_all(instances)[0]
    model = RelationModel.create(ModelConfig(vocab_size=len(vocab)), SummaryScheme("emp"), "etm",
                                 SCHEMA.num_classes, len(SCHEMA.entity_types), seed=1)
    rec = fine_tune(model, train, train, TrainConfig(learning_rate=1e-3, epochs=50, early_stop_patience=None),
                    1, SCHEMA.class_names())
    scores = [e.dev_f1 for e in rec.history]
    first = next((e.epoch for e in rec.history if e.dev_f1 >= 0.99), None)
    seconds = time.perf_counter() - t0
    ok = len(train) == 200 and first is not None and seconds < 300
    record(4, ok, f"training micro-F1 {max(scores):.4f} on {len(train)} instances; >= 0.99 first at epoch {first}",
           seconds)


# 5

def test_criterion_5_etm_beats_um():
    t0 = time.perf_counter()
    corpus = generate_synthetic([LanguageSpec("A", "SVO", 0.5, 1)], SCHEMA, 2000, True, seed=0)
    sents = corpus.sentences["A"]
    train_i = corpus_candidates(sents[:1200], SCHEMA).instances[:2000]
    dev_i = corpus_candidates(sents[1200:1450], SCHEMA).instances[:500]
    test_i = corpus_candidates(sents[1450:], SCHEMA).instances[:500]
    vocab = build_vocabulary(corpus.raw_text["A"] + [s.words for s in sents[:1200]], 1000, SCHEMA)
    VOCAB_SIZE[0] = len(vocab)
    scores = {}
    for scheme in ("etm", "um"):
        enc = InstanceEncoder(vocab, scheme, 128)
        tr, dv, te = (enc.encode_all(x)[0] for x in (train_i, dev_i, test_i))
        scores[scheme] = [train_eval(tr, dv, {"test": te}, scheme, s)["test"] for s in SEEDS]
    etm, um = median(scores["etm"]), median(scores["um"])
    seconds = time.perf_counter() - t0
    ok = len(train_i) == 2000 and len(test_i) == 500 and etm - um >= 0.05 and seconds < 1800
    record(5, ok, f"median test F1 ETM-EMP {etm:.4f} vs UM-EMP {um:.4f}, gap {100 * (etm - um):.1f} points "
                  f"(need >= 5); per seed ETM {[round(x, 3) for x in scores['etm']]} "
                  f"UM {[round(x, 3) for x in scores['um']]}", seconds)


# 6 and 7 share one pretrained multilingual encoder

@pytest.fixture(scope="module")
def pretrained():
    t0 = time.perf_counter()
    specs = [LanguageSpec("A", "SVO", 0.5, 1), LanguageSpec("B", "SVO", 0.5, 2), LanguageSpec("C", "SOV", 0.5, 3)]
    corpus = generate_synthetic(specs, SCHEMA, 2000, True, seed=0, n_raw=4000)
    raw = [w for lang in "ABC" for w in corpus.raw_text[lang]]
    vocab = build_vocabulary(raw, 2000, SCHEMA)
    cfg = ModelConfig(vocab_size=len(vocab))
    seqs = to_sequences(raw, vocab, 128)
    order = np.random.default_rng(0).permutation(len(seqs))
    held = [seqs[i] for i in order[:300]]
    params = tf.init_parameters(cfg, 0)
    before = mlm_eval_loss(params, cfg, held, vocab)
    pretrain_mlm(params, cfg, [seqs[i] for i in order[300:]], vocab, steps=2000, lr=1e-3, seed=0)
    after = mlm_eval_loss(params, cfg, held, vocab)
    return dict(corpus=corpus, vocab=vocab, cfg=cfg, params=params, mlm=(before, after),
                seconds=time.perf_counter() - t0)


def test_criterion_6_word_order(pretrained):
    t0 = time.perf_counter()
    corpus, vocab, cfg = pretrained["corpus"], pretrained["vocab"], pretrained["cfg"]
    S = corpus.sentences
    enc = InstanceEncoder(vocab, "etm", 128)
    train = enc.encode_all(corpus_candidates(S["A"][:1200], SCHEMA).instances[:2000])[0]
    dev = enc.encode_all(corpus_candidates(S["A"][1200:1450], SCHEMA).instances[:500])[0]
    tests = {lang: enc.encode_all(corpus_candidates(S[lang][1450:], SCHEMA).instances[:500])[0] for lang in "ABC"}
    runs = [train_eval(train, dev, tests, "etm", s, encoder_params=pretrained["params"], cfg=cfg) for s in SEEDS]
    med = {lang: median(r[lang] for r in runs) for lang in "ABC"}
    seconds = time.perf_counter() - t0 + pretrained["seconds"]
    ok = med["B"] - med["C"] >= 0.05 and med["B"] > 0 and med["C"] > 0 and seconds < 3600
    before, after = pretrained["mlm"]
    record(6, ok, f"median zero-shot F1 SVO target {med['B']:.4f} vs SOV target {med['C']:.4f}, gap "
                  f"{100 * (med['B'] - med['C']):.1f} points (need >= 5, both > 0); source {med['A']:.4f}; "
                  f"held-out MLM loss {before:.3f} -> {after:.3f}", seconds)


def test_criterion_7_joint_training(pretrained):
    t0 = time.perf_counter()
    corpus, vocab, cfg = pretrained["corpus"], pretrained["vocab"], pretrained["cfg"]
    S = corpus.sentences
    enc = InstanceEncoder(vocab, "etm", 128)
    # disjoint source sentences per language so the joint set is not a translation of itself
    train = {"A": enc.encode_all(corpus_candidates(S["A"][:300], SCHEMA).instances[:300])[0],
             "C": enc.encode_all(corpus_candidates(S["C"][600:900], SCHEMA).instances[:300])[0]}
    dev = {lang: enc.encode_all(corpus_candidates(S[lang][1200:1450], SCHEMA).instances[:500])[0] for lang in "AC"}
    tests = {lang: enc.encode_all(corpus_candidates(S[lang][1450:], SCHEMA).instances[:500])[0] for lang in "AC"}
    joint_scores, mono_scores = [], []
    for s in SEEDS:
        mono = [train_eval(train[lang], dev[lang], {lang: tests[lang]}, "etm", s,
                           encoder_params=pretrained["params"], cfg=cfg)[lang] for lang in "AC"]
        joint = train_eval(train["A"] + train["C"], dev["A"] + dev["C"], tests, "etm", s,
                           encoder_params=pretrained["params"], cfg=cfg)
        mono_scores.append(sum(mono) / 2)
        joint_scores.append((joint["A"] + joint["C"]) / 2)
    j, m = median(joint_scores), median(mono_scores)
    seconds = time.perf_counter() - t0
    ok = len(train["A"]) == len(train["C"]) == 300 and j >= m and seconds < 1800
    record(7, ok, f"median average test F1 joint {j:.4f} vs monolingual {m:.4f} (need joint >= mono); "
                  f"per seed joint {[round(x, 3) for x in joint_scores]} mono {[round(x, 3) for x in mono_scores]}",
           seconds)


# 8

def test_criterion_8_determinism_persistence(tmp_path):
    t0 = time.perf_counter()
    corpus = generate_synthetic([LanguageSpec("A", "SVO", 0.5, 1)], SCHEMA, 120, True, seed=5)
    sents = corpus.sentences["A"]
    vocab = build_vocabulary([s.words for s in sents], 600, SCHEMA)
    enc = InstanceEncoder(vocab, "etm", 64)
    train = enc.encode_all(corpus_candidates(sents[:80], SCHEMA).instances)[0]
    test = enc.encode_all(corpus_candidates(sents[80:], SCHEMA).instances)[0]
    cfg = ModelConfig(n_layers=2, hidden_size=32, n_heads=4, max_positions=64, vocab_size=len(vocab))
    blobs = []
    for k in range(2):
        model = RelationModel.create(cfg, SummaryScheme("emp"), "etm", SCHEMA.num_classes, 4, seed=7)
        rec = fine_tune(model, train, test, TrainConfig(learning_rate=2e-3, epochs=8), 7, SCHEMA.class_names())
        save_model(tmp_path / f"run{k}.ckpt", rec.model, vocab, SCHEMA)
        blobs.append((tmp_path / f"run{k}.ckpt").read_bytes())
    identical = blobs[0] == blobs[1]
    loaded = load_model(tmp_path / "run0.ckpt", vocab)
    f1_before, f1_after = f1_on(rec.model, test), f1_on(loaded, test)
    other = build_vocabulary([s.words for s in sents[:10]], 300, SCHEMA)
    try:
        load_model(tmp_path / "run0.ckpt", other)
        rejected = False
    except VocabularyMismatch:
        rejected = True
    seconds = time.perf_counter() - t0
    ok = identical and f1_before == f1_after and f1_before > 0 and rejected
    record(8, ok, f"identical checkpoints {identical}; F1 before/after reload {f1_before:.6f}/{f1_after:.6f}; "
                  f"vocabulary mismatch rejected {rejected}", seconds)


# 9

def _cli(*args, cwd):
    proc = subprocess.run([sys.executable, "-m", "xlre", *map(str, args)], cwd=cwd, capture_output=True, text=True)
    if proc.returncode:
        raise AssertionError(f"xlre {args[0]} failed: {proc.stderr.strip().splitlines()[-1:]}")


def _well_formed_csv(path: Path) -> bool:
    with open(path) as fh:
        rows = list(csv.reader(fh))
    if len(rows) < 2 or any(len(r) != len(rows[0]) for r in rows):
        return False
    numeric = [k for k, name in enumerate(rows[0]) if name not in ("run", "label", "source", "target")][1:]
    for r in rows[1:]:
        for k in numeric:
            if r[k]:
                float(r[k])
    return True


def test_criterion_9_cli_end_to_end(tmp_path):
    t0 = time.perf_counter()
    raw = "data/l1.raw.txt,data/l2.raw.txt,data/l3.raw.txt"
    _cli("gen-data", "--seed", 1, "--out", "data", cwd=tmp_path)
    _cli("build-vocab", "--corpus", raw, "--out", "vocab.txt", cwd=tmp_path)
    _cli("pretrain", "--text", raw, "--vocab", "vocab.txt", "--seed", 1, "--out", "pre.ckpt", cwd=tmp_path)
    for lang in ("l1", "l2"):
        _cli("train", "--corpus", f"data/{lang}.train.jsonl", "--vocab", "vocab.txt", "--init", "pre.ckpt",
             "--seeds", "1", "--out", f"runs/{lang}", cwd=tmp_path)
    _cli("eval", "--ckpt", "runs/l1", "--test", "data/l1.test.jsonl", "--out", "eval", cwd=tmp_path)
    _cli("transfer-matrix", "--ckpts", "runs", "--tests", "data", "--out", "tm", cwd=tmp_path)
    _cli("report", "--in", ".", "--out", "report", cwd=tmp_path)
    csvs = [tmp_path / p for p in ("eval/metrics.csv", "tm/transfer.csv", "report/report.csv")]
    svgs = sorted((tmp_path / "report").glob("*.svg"))
    manifests = [tmp_path / p for p in ("data/manifest.json", "vocab.txt.manifest.json", "pre.ckpt.manifest.json",
                                        "runs/l1/manifest.json", "eval/manifest.json", "tm/manifest.json",
                                        "report/manifest.json")]
    csv_ok = all(_well_formed_csv(p) for p in csvs)
    svg_ok = bool(svgs) and all(ET.parse(p).getroot().tag.endswith("svg") for p in svgs)
    manifest_ok = all(p.exists() for p in manifests)
    seconds = time.perf_counter() - t0
    ok = csv_ok and svg_ok and manifest_ok and seconds < 600
    record(9, ok, f"CSV well-formed {csv_ok} ({len(csvs)} files); SVG parse {svg_ok} ({len(svgs)} files); "
                  f"manifests {sum(p.exists() for p in manifests)}/{len(manifests)}", seconds)
