"""Command-line entry point.

Every command resolves its settings as built-in defaults, then values from
an optional flat JSON ``--config`` file, then explicit flags, and writes the
resolved settings to a manifest next to its outputs.  A manifest is itself a
valid ``--config`` file, so ``xlre <command> --config manifest.json``
repeats a run.
"""

from __future__ import annotations

import argparse
import json
import logging
import shutil
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .checkpoint import FORMAT_VERSION, load_encoder, load_metadata, load_model, save_encoder, save_model
from .corpus import RelationSchema, corpus_candidates, load_corpus, load_schema, save_corpus, save_schema, split_corpus
from .encoding import InstanceEncoder, MarkerScheme
from .errors import ConfigError, UnknownCommand, XLREError
from .evaluation import (aggregate_csv, aggregate_seeds, compute_metrics, compute_transfer_matrix, metrics_table,
                         predict_corpus, transfer_csv)
from .head import SummaryScheme
from .model import RelationModel
from .synthetic import DEFAULT_SCHEMA, LanguageSpec, generate_synthetic, load_language_specs
from .tokenizer import Vocabulary, build_vocabulary
from .training import TrainConfig, fine_tune, joint_training_set, pretrain_mlm, to_sequences
from .transformer import ModelConfig, init_parameters

log = logging.getLogger("xlre")

MANIFEST_VERSION = 1
MANIFEST = "manifest.json"

DEFAULT_SPECS = (
    LanguageSpec("l1", "SVO", 0.5, 1),
    LanguageSpec("l2", "SVO", 0.5, 2),
    LanguageSpec("l3", "SOV", 0.5, 3),
)

DEFAULTS = {
    "gen-data": dict(specs=None, schema=None, n=300, n_raw=1000, type_informative=True, split="0.8,0.1,0.1",
                     seed=None, out=None),
    "build-vocab": dict(corpus=None, size=2000, schema=None, out=None),
    "pretrain": dict(text=None, vocab=None, model_config=None, steps=300, lr=1e-3, batch_size=32,
                     mask_fraction=0.15, max_len=128, seed=None, out=None),
    "train": dict(corpus=None, dev=None, schema=None, vocab=None, scheme="etm", summary="emp",
                  append_type_emb=False, type_dim=32, mention_pooling=False, concat_cls=False, init=None,
                  model_config=None, seeds=None, lr=1e-4, epochs=10, batch_size=16, patience=3, max_len=128,
                  max_neg_ratio=None, out=None),
    "eval": dict(ckpt=None, test=None, vocab=None, batch_size=64, out=None),
    "transfer-matrix": dict(ckpts=None, tests=None, out=None),
    "report": dict(**{"in": None}, out=None),
}
COMMANDS = tuple(DEFAULTS)


def _bool(text: str) -> bool:
    value = str(text).strip().lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {text!r}")


def _optional_int(text: str):
    return None if str(text).lower() in ("none", "off", "inf") else int(text)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="xlre", description="Cross-lingual relation extraction experiments.")
    parser.add_argument("--version", action="version", version=f"xlre {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sup = argparse.SUPPRESS

    def command(name, help_text):
        p = sub.add_parser(name, help=help_text, argument_default=sup)
        p.add_argument("--config", help="flat JSON settings file (a manifest also works)")
        p.add_argument("--log-level", default="INFO")
        return p

    p = command("gen-data", "generate a parallel synthetic corpus")
    p.add_argument("--specs", help="language spec file (JSON list or JSON lines)")
    p.add_argument("--schema", help="schema file")
    p.add_argument("--n", type=int, help="labeled sentences per language")
    p.add_argument("--n-raw", type=int, help="unlabeled sentences per language")
    p.add_argument("--type-informative", type=_bool)
    p.add_argument("--split", help="train,dev,test ratios")
    p.add_argument("--seed", type=int)
    p.add_argument("--out")

    p = command("build-vocab", "build a subword vocabulary")
    p.add_argument("--corpus", help="comma-separated corpus (.jsonl) or raw text files")
    p.add_argument("--size", type=int)
    p.add_argument("--schema")
    p.add_argument("--out")

    p = command("pretrain", "masked-language-model pretraining")
    p.add_argument("--text", help="comma-separated raw text or corpus files")
    p.add_argument("--vocab")
    p.add_argument("--model-config")
    p.add_argument("--steps", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--mask-fraction", type=float)
    p.add_argument("--max-len", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")

    p = command("train", "fine-tune relation classifiers, one per seed")
    p.add_argument("--corpus", help="comma-separated training corpora (several means joint training)")
    p.add_argument("--dev", help="comma-separated dev corpora (default: *.train.* -> *.dev.*)")
    p.add_argument("--schema")
    p.add_argument("--vocab")
    p.add_argument("--scheme", choices=[m.value for m in MarkerScheme])
    p.add_argument("--summary", choices=["ss", "es", "emp"])
    p.add_argument("--append-type-emb", action="store_true")
    p.add_argument("--type-dim", type=int)
    p.add_argument("--mention-pooling", action="store_true")
    p.add_argument("--concat-cls", action="store_true")
    p.add_argument("--init", help="pretrained checkpoint")
    p.add_argument("--model-config")
    p.add_argument("--seeds", help="comma-separated seeds")
    p.add_argument("--lr", type=float)
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--patience", type=_optional_int)
    p.add_argument("--max-len", type=int)
    p.add_argument("--max-neg-ratio", type=float)
    p.add_argument("--out")

    p = command("eval", "score checkpoints on a test corpus")
    p.add_argument("--ckpt", help="checkpoint file or a train output directory")
    p.add_argument("--test")
    p.add_argument("--vocab")
    p.add_argument("--batch-size", type=int)
    p.add_argument("--out")

    p = command("transfer-matrix", "all-pairs source/target evaluation")
    p.add_argument("--ckpts", help="directory with one train output directory per source language")
    p.add_argument("--tests", help="directory of <lang>.test.jsonl files")
    p.add_argument("--out")

    p = command("report", "collect metrics into CSV and SVG")
    p.add_argument("--in", dest="in")
    p.add_argument("--out")
    return parser


def read_config(path) -> dict:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError("config", str(exc)) from None
    if isinstance(data, dict) and "command" in data and "config" in data:
        data = data["config"]
    if not isinstance(data, dict):
        raise ConfigError("config", "expected a JSON object")
    return {k.replace("-", "_"): v for k, v in data.items()}


def resolve(command: str, explicit: dict) -> dict:
    """Defaults < config file < flags."""
    cfg = dict(DEFAULTS[command])
    if explicit.get("config"):
        from_file = read_config(explicit["config"])
        unknown = sorted(set(from_file) - set(cfg))
        if unknown:
            raise ConfigError(unknown[0], f"not a setting of {command}")
        cfg.update(from_file)
    cfg.update({k: v for k, v in explicit.items() if k in cfg})
    return cfg


def need(cfg: dict, key: str):
    if cfg.get(key) in (None, ""):
        raise ConfigError(key.replace("_", "-"), "required")
    return cfg[key]


def existing(cfg: dict, key: str) -> Path:
    path = Path(need(cfg, key))
    if not path.exists():
        raise ConfigError(key.replace("_", "-"), f"{path} does not exist")
    return path


def path_list(cfg: dict, key: str) -> list[Path]:
    value = need(cfg, key)
    items = value if isinstance(value, list) else [v for v in str(value).split(",") if v]
    paths = [Path(v) for v in items]
    for p in paths:
        if not p.exists():
            raise ConfigError(key, f"{p} does not exist")
    return paths


def parse_seeds(value) -> list[int]:
    try:
        seeds = [int(s) for s in value] if isinstance(value, list) else [int(s) for s in str(value).split(",") if s]
    except ValueError:
        raise ConfigError("seeds", f"not a comma-separated integer list: {value!r}") from None
    if not seeds:
        raise ConfigError("seeds", "required")
    return seeds


def write_manifest(path: Path, command: str, cfg: dict, outputs, seed=None, extra: dict | None = None) -> None:
    manifest = {
        **(extra or {}),
        "command": command,
        "config": cfg,
        "seed": seed,
        "format_versions": {"manifest": MANIFEST_VERSION, "checkpoint": FORMAT_VERSION},
        "xlre_version": __version__,
        "outputs": sorted(str(o) for o in outputs),
    }
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def read_words(paths) -> list[tuple[str, ...]]:
    """Word sequences from corpus files (.jsonl) or whitespace-tokenized text files."""
    out = []
    for p in paths:
        with open(p, encoding="utf-8") as fh:
            if str(p).endswith(".jsonl"):
                out += [tuple(json.loads(line)["words"]) for line in fh if line.strip()]
            else:
                out += [tuple(line.split()) for line in fh if line.strip()]
    return out


def schema_near(cfg: dict, anchor: Path) -> RelationSchema:
    if cfg.get("schema"):
        return load_schema(existing(cfg, "schema"))
    guess = anchor.parent / "schema.json"
    if guess.exists():
        return load_schema(guess)
    raise ConfigError("schema", f"not given and no schema.json beside {anchor}")


def model_config_from(cfg: dict, vocab_size: int) -> ModelConfig:
    fields = {}
    if cfg.get("model_config"):
        fields = read_config(existing(cfg, "model_config"))
    fields["vocab_size"] = vocab_size
    try:
        return ModelConfig.from_dict(fields)
    except XLREError as exc:
        raise ConfigError("model-config", str(exc)) from None


# commands

def cmd_gen_data(cfg: dict) -> None:
    seed = need(cfg, "seed")
    out = Path(need(cfg, "out"))
    specs = load_language_specs(existing(cfg, "specs")) if cfg.get("specs") else list(DEFAULT_SPECS)
    schema = load_schema(existing(cfg, "schema")) if cfg.get("schema") else DEFAULT_SCHEMA
    try:
        ratios = [float(r) for r in str(cfg["split"]).split(",")]
    except ValueError:
        raise ConfigError("split", "expected three comma-separated ratios") from None
    corpus = generate_synthetic(specs, schema, cfg["n"], bool(cfg["type_informative"]), seed=seed,
                                n_raw=cfg["n_raw"])
    out.mkdir(parents=True, exist_ok=True)
    outputs = ["schema.json", "specs.json"]
    save_schema(schema, out / "schema.json")
    (out / "specs.json").write_text(json.dumps([s.to_dict() for s in specs], indent=2) + "\n", encoding="utf-8")
    for spec in specs:
        # one seed for every language keeps the splits parallel
        parts = split_corpus(corpus.sentences[spec.name], ratios, seed)
        for part, sentences in zip(("train", "dev", "test"), parts):
            save_corpus(sentences, out / f"{spec.name}.{part}.jsonl")
            outputs.append(f"{spec.name}.{part}.jsonl")
        raw = "".join(" ".join(words) + "\n" for words in corpus.raw_text[spec.name])
        (out / f"{spec.name}.raw.txt").write_text(raw, encoding="utf-8")
        outputs.append(f"{spec.name}.raw.txt")
        log.info("%s: %s train/dev/test sentences", spec.name, "/".join(str(len(p)) for p in parts))
    write_manifest(out / MANIFEST, "gen-data", cfg, outputs, seed)


def cmd_build_vocab(cfg: dict) -> None:
    paths = path_list(cfg, "corpus")
    out = Path(need(cfg, "out"))
    schema = schema_near(cfg, paths[0])
    vocab = build_vocabulary(read_words(paths), int(cfg["size"]), schema)
    out.parent.mkdir(parents=True, exist_ok=True)
    vocab.save(out)
    log.info("vocabulary of %d entries -> %s", len(vocab), out)
    write_manifest(out.with_name(out.name + ".manifest.json"), "build-vocab", cfg, [out.name])


def cmd_pretrain(cfg: dict) -> None:
    seed = need(cfg, "seed")
    texts = path_list(cfg, "text")
    vocab = Vocabulary.load(existing(cfg, "vocab"))
    out = Path(need(cfg, "out"))
    config = model_config_from(cfg, len(vocab))
    seqs = to_sequences(read_words(texts), vocab, min(cfg["max_len"], config.max_positions))
    params = init_parameters(config, seed)
    every = max(1, cfg["steps"] // 10)

    def progress(step, loss):
        if (step + 1) % every == 0:
            log.info("step %d loss %.4f", step + 1, loss)

    _, losses = pretrain_mlm(params, config, seqs, vocab, cfg["mask_fraction"], cfg["steps"], cfg["lr"], seed,
                             cfg["batch_size"], on_step=progress)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_encoder(out, config, params, vocab, {"mlm_losses": [round(x, 6) for x in losses], "seed": seed})
    write_manifest(out.with_name(out.name + ".manifest.json"), "pretrain", cfg,
                   [out.name, out.name + ".json"], seed)


def _dev_paths(cfg: dict, train_paths: list[Path]) -> list[Path]:
    if cfg.get("dev"):
        return path_list(cfg, "dev")
    out = []
    for p in train_paths:
        if ".train." not in p.name:
            raise ConfigError("dev", f"not given and cannot be derived from {p.name}")
        cand = p.with_name(p.name.replace(".train.", ".dev."))
        if not cand.exists():
            raise ConfigError("dev", f"{cand} does not exist")
        out.append(cand)
    return out


def _encode_corpora(paths, schema, encoder, max_neg_ratio, seed):
    """Returns (examples per file, languages)."""
    per_file, langs = [], []
    for p in paths:
        sentences = load_corpus(p, schema)
        cands = corpus_candidates(sentences, schema, max_neg_ratio, seed)
        examples, _, too_far = encoder.encode_all(cands.instances)
        if too_far:
            log.warning("%s: %d pairs too far apart to encode were left out", p.name, too_far)
        per_file.append(examples)
        langs.append(sentences[0].language if sentences else p.name.split(".")[0])
    return per_file, langs


def cmd_train(cfg: dict) -> None:
    train_paths = path_list(cfg, "corpus")
    seeds = parse_seeds(need(cfg, "seeds"))
    out = Path(need(cfg, "out"))
    vocab_path = existing(cfg, "vocab")
    vocab = Vocabulary.load(vocab_path)
    schema = schema_near(cfg, train_paths[0])
    if vocab.entity_types != schema.entity_types:
        raise ConfigError("vocab", "type markers do not match the schema")
    dev_paths = _dev_paths(cfg, train_paths)
    scheme = SummaryScheme(cfg["summary"], bool(cfg["append_type_emb"]), int(cfg["type_dim"]),
                           not cfg["mention_pooling"], bool(cfg["concat_cls"]))
    encoder_params = None
    if cfg.get("init"):
        config, encoder_params = load_encoder(existing(cfg, "init"), vocab)
    else:
        config = model_config_from(cfg, len(vocab))
    max_len = min(int(cfg["max_len"]), config.max_positions)
    encoder = InstanceEncoder(vocab, cfg["scheme"], max_len)
    train_sets, langs = _encode_corpora(train_paths, schema, encoder, cfg["max_neg_ratio"], seeds[0])
    dev_sets, _ = _encode_corpora(dev_paths, schema, encoder, None, seeds[0])
    train = joint_training_set(dict(enumerate(train_sets)), range(len(train_sets)))
    dev = joint_training_set(dict(enumerate(dev_sets)), range(len(dev_sets)))
    tc = TrainConfig(cfg["lr"], cfg["epochs"], cfg["batch_size"], cfg["patience"], tuple(seeds), tuple(langs))
    out.mkdir(parents=True, exist_ok=True)
    shutil.copyfile(vocab_path, out / "vocab.txt")
    outputs = ["vocab.txt"]
    for seed in seeds:
        model = RelationModel.create(config, scheme, cfg["scheme"], schema.num_classes,
                                     len(schema.entity_types), seed, encoder_params)
        lines = []

        def on_epoch(entry, seed=seed, lines=lines):
            lines.append(entry.line())
            log.info("seed %d epoch %d loss %.4f dev F1 %.4f", seed, entry.epoch, entry.train_loss, entry.dev_f1)

        rec = fine_tune(model, train, dev, tc, seed, schema.class_names(), on_epoch)
        name = f"seed{seed}.ckpt"
        save_model(out / name, rec.model, vocab, schema, {
            "vocab_file": "vocab.txt", "max_len": max_len, "seed": seed, "languages": langs,
            "train_config": tc.to_dict(), "best_epoch": rec.best_epoch,
            # wall-clock seconds stay in the log so metadata is reproducible
            "history": [{k: v for k, v in e.__dict__.items() if k != "seconds"} for e in rec.history],
        })
        (out / f"seed{seed}.log").write_text("\n".join(lines) + "\n", encoding="utf-8")
        outputs += [name, name + ".json", f"seed{seed}.log"]
    write_manifest(out / MANIFEST, "train", cfg, outputs, seeds)


def _checkpoints(target: Path) -> list[Path]:
    found = sorted(target.glob("*.ckpt")) if target.is_dir() else [target]
    if not found:
        raise ConfigError("ckpt", f"no checkpoints in {target}")
    return found


def _load_run(ckpt: Path, vocab_override=None):
    meta = load_metadata(ckpt)
    vocab_path = Path(vocab_override) if vocab_override else ckpt.parent / meta.get("vocab_file", "vocab.txt")
    vocab = Vocabulary.load(vocab_path)
    model = load_model(ckpt, vocab)
    schema = RelationSchema.from_dict(meta["schema"])
    return model, vocab, schema, meta


def cmd_eval(cfg: dict) -> None:
    ckpts = _checkpoints(existing(cfg, "ckpt"))
    test_path = existing(cfg, "test")
    out = Path(need(cfg, "out"))
    reports, rows = [], []
    for ckpt in ckpts:
        model, vocab, schema, meta = _load_run(ckpt, cfg.get("vocab"))
        instances = corpus_candidates(load_corpus(test_path, schema), schema).instances
        encoder = InstanceEncoder(vocab, model.marker_scheme, meta.get("max_len", 128))
        rep = compute_metrics(predict_corpus(model, instances, encoder, cfg["batch_size"]), instances, schema)
        reports.append(rep)
        rows.append(f"{ckpt.name},{rep.precision:.4f},{rep.recall:.4f},{rep.f1:.4f},{rep.skipped}")
        log.info("%s: P %.4f R %.4f F1 %.4f", ckpt.name, rep.precision, rep.recall, rep.f1)
    out.mkdir(parents=True, exist_ok=True)
    agg = aggregate_seeds(reports)
    (out / "metrics.csv").write_text(aggregate_csv(agg), encoding="utf-8")
    (out / "per_seed.csv").write_text("checkpoint,P,R,F1,skipped\n" + "\n".join(rows) + "\n", encoding="utf-8")
    (out / "metrics.txt").write_text(
        "".join(f"== {c.name}\n{metrics_table(r)}" for c, r in zip(ckpts, reports)), encoding="utf-8")
    label = f"{model.marker_scheme.value.upper()}-{model.summary.kind.value.upper()}"
    write_manifest(out / MANIFEST, "eval", cfg, ["metrics.csv", "per_seed.csv", "metrics.txt"],
                   extra={"label": label})


def cmd_transfer_matrix(cfg: dict) -> None:
    root = existing(cfg, "ckpts")
    tests_dir = existing(cfg, "tests")
    out = Path(need(cfg, "out"))
    models, encoders, schema = {}, {}, None
    for sub in sorted(p for p in root.iterdir() if p.is_dir() and any(p.glob("*.ckpt"))):
        runs = [_load_run(c) for c in sorted(sub.glob("*.ckpt"))]
        meta = runs[0][3]
        source = meta["languages"][0] if len(meta.get("languages", [])) == 1 else sub.name
        models[source] = [r[0] for r in runs]
        encoders[source] = InstanceEncoder(runs[0][1], runs[0][0].marker_scheme, meta.get("max_len", 128))
        schema = schema or runs[0][2]
    if not models:
        raise ConfigError("ckpts", f"no checkpoint directories under {root}")
    tests = {}
    for p in sorted(tests_dir.glob("*.test.jsonl")):
        tests[p.name[: -len(".test.jsonl")]] = corpus_candidates(load_corpus(p, schema), schema).instances
    if not tests:
        raise ConfigError("tests", f"no *.test.jsonl files in {tests_dir}")
    matrix = compute_transfer_matrix(models, tests, encoders, schema)
    out.mkdir(parents=True, exist_ok=True)
    (out / "transfer.csv").write_text(transfer_csv(matrix), encoding="utf-8")
    write_manifest(out / MANIFEST, "transfer-matrix", cfg, ["transfer.csv"])


def _save_svg(fig, path: Path) -> None:
    fig.savefig(path, format="svg", metadata={"Date": None})


def cmd_report(cfg: dict) -> None:
    import csv

    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    src = existing(cfg, "in")
    out = Path(need(cfg, "out"))
    runs, transfers = [], []
    for manifest in sorted(src.rglob(MANIFEST)):
        info = json.loads(manifest.read_text(encoding="utf-8"))
        run = manifest.parent.relative_to(src).as_posix() or "."
        if info.get("command") == "eval":
            with open(manifest.parent / "metrics.csv", encoding="utf-8") as fh:
                micro = [r for r in csv.DictReader(fh) if r["class"] == "micro"][0]
            runs.append((run, info.get("label", run), micro["P"], micro["R"], micro["F1"]))
        elif info.get("command") == "transfer-matrix":
            transfers.append((run, manifest.parent / "transfer.csv"))
    if not runs and not transfers:
        raise ConfigError("in", f"no eval or transfer-matrix outputs under {src}")
    out.mkdir(parents=True, exist_ok=True)
    outputs = []
    plt.rcParams["svg.hashsalt"] = "xlre-report"
    if runs:
        lines = ["run,label,P,R,F1"] + [",".join(r) for r in runs]
        (out / "report.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
        fig, ax = plt.subplots(figsize=(max(4.0, 1.2 * len(runs)), 3.5))
        names = [f"{label}\n{run}" for run, label, *_ in runs]
        ax.bar(range(len(runs)), [float(r[4]) for r in runs], color="#4C72B0")
        ax.set_xticks(range(len(runs)), names, fontsize=7)
        ax.set_ylabel("micro F1")
        ax.set_ylim(0, 1)
        fig.tight_layout()
        _save_svg(fig, out / "f1_by_scheme.svg")
        plt.close(fig)
        outputs += ["report.csv", "f1_by_scheme.svg"]
    for i, (run, path) in enumerate(transfers):
        name = "transfer" if len(transfers) == 1 else f"transfer_{i}"
        shutil.copyfile(path, out / f"{name}.csv")
        with open(path, encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
        targets = [t for t in rows[0][1:] if t != "rho"]
        sources = [r[0] for r in rows[1:]]
        grid = np.array([[float(v) if v else np.nan for v in r[1:1 + len(targets)]] for r in rows[1:]])
        fig, ax = plt.subplots(figsize=(1 + 0.8 * len(targets), 1 + 0.6 * len(sources)))
        ax.imshow(grid, vmin=0, vmax=1, cmap="Blues")
        ax.set_xticks(range(len(targets)), targets)
        ax.set_yticks(range(len(sources)), sources)
        ax.set_xlabel("target")
        ax.set_ylabel("source")
        for (a, b), v in np.ndenumerate(grid):
            if not np.isnan(v):
                ax.text(b, a, f"{v:.2f}", ha="center", va="center", fontsize=8)
        fig.tight_layout()
        _save_svg(fig, out / f"{name}.svg")
        plt.close(fig)
        outputs += [f"{name}.csv", f"{name}.svg"]
    write_manifest(out / MANIFEST, "report", cfg, outputs)


HANDLERS = {
    "gen-data": cmd_gen_data,
    "build-vocab": cmd_build_vocab,
    "pretrain": cmd_pretrain,
    "train": cmd_train,
    "eval": cmd_eval,
    "transfer-matrix": cmd_transfer_matrix,
    "report": cmd_report,
}


def run(argv=None) -> None:
    argv = list(sys.argv[1:] if argv is None else argv)
    if argv and not argv[0].startswith("-") and argv[0] not in COMMANDS:
        raise UnknownCommand(f"unknown command {argv[0]!r}; expected one of {', '.join(COMMANDS)}")
    args = vars(build_parser().parse_args(argv))
    command = args.pop("command", None)
    if command is None:
        raise UnknownCommand(f"no command given; expected one of {', '.join(COMMANDS)}")
    logging.basicConfig(level=str(args.pop("log_level", "INFO")).upper(), format="%(message)s", stream=sys.stderr)
    HANDLERS[command](resolve(command, args))


def main(argv=None) -> int:
    try:
        run(argv)
    except (ConfigError, UnknownCommand) as exc:
        print(f"xlre: error: {exc}", file=sys.stderr)
        return 2
    except XLREError as exc:
        print(f"xlre: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError, KeyError) as exc:
        print(f"xlre: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0
