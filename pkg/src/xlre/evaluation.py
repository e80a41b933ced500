"""Prediction, micro/per-type F1, transfer matrices and seed aggregation.

F1 follows the usual relation-extraction convention: the null class never
counts as a positive, so a pair is "predicted" only when the model outputs
a non-null class and "correct" only when that class equals a non-null gold.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from statistics import mean
from typing import Sequence

import numpy as np

from .corpus import RelationInstance, RelationSchema
from .encoding import InstanceEncoder
from .errors import (DegenerateSupervised, EmptyList, LengthMismatch, MissingDiagonal,
                     TooFewLanguages)


@dataclass
class PredictionRecord:
    instance: RelationInstance | None
    predicted: int
    probs: np.ndarray
    skipped: bool = False


def predict_corpus(model, instances: Sequence[RelationInstance], encoder: InstanceEncoder,
                   batch_size: int = 64) -> list[PredictionRecord]:
    """Score every instance; pairs too far apart to encode predict null."""
    examples, kept, _ = encoder.encode_all(instances)
    probs = model.predict_proba(examples, batch_size)
    records = []
    for inst in instances:
        null = np.zeros(model.n_classes)
        null[0] = 1.0
        records.append(PredictionRecord(inst, 0, null, skipped=True))
    for row, i in enumerate(kept):
        p = probs[row]
        records[i] = PredictionRecord(instances[i], int(np.argmax(p)), p)
    return records


def _f1(p: float, r: float) -> float:
    return 2 * p * r / (p + r) if p + r > 0 else 0.0


def _ratio(a: int, b: int) -> float:
    return a / b if b else 0.0


@dataclass
class TypeMetrics:
    precision: float
    recall: float
    f1: float
    support: int
    predicted: int
    correct: int


@dataclass
class MetricsReport:
    precision: float
    recall: float
    f1: float
    per_type: dict[str, TypeMetrics]
    gold_positives: int
    predicted_positives: int
    correct: int
    skipped: int = 0


def _labels(items) -> list[int]:
    out = []
    for x in items:
        if isinstance(x, PredictionRecord):
            out.append(x.predicted)
        elif isinstance(x, RelationInstance):
            out.append(x.label)
        else:
            out.append(int(getattr(x, "label", x)))
    return out


def compute_metrics(predictions, gold, schema: RelationSchema | Sequence[str], skipped: int | None = None) -> MetricsReport:
    """Micro and per-type precision/recall/F1 over non-null classes.

    ``predictions`` and ``gold`` may be class indices, prediction records or
    instances.  ``schema`` may also be a plain list of class names with the
    null class first.
    """
    pred = np.asarray(_labels(predictions), dtype=np.int64)
    gold_ = np.asarray(_labels(gold), dtype=np.int64)
    if pred.shape != gold_.shape:
        raise LengthMismatch(f"{len(pred)} predictions for {len(gold_)} gold labels")
    names = schema.class_names() if isinstance(schema, RelationSchema) else list(schema)
    if skipped is None:
        skipped = sum(1 for p in predictions if isinstance(p, PredictionRecord) and p.skipped)
    per_type = {}
    for k in range(1, len(names)):
        tp = int(np.sum((pred == k) & (gold_ == k)))
        n_pred = int(np.sum(pred == k))
        n_gold = int(np.sum(gold_ == k))
        p, r = _ratio(tp, n_pred), _ratio(tp, n_gold)
        per_type[names[k]] = TypeMetrics(p, r, _f1(p, r), n_gold, n_pred, tp)
    correct = int(np.sum((pred == gold_) & (gold_ != 0)))
    n_pred = int(np.sum(pred != 0))
    n_gold = int(np.sum(gold_ != 0))
    p, r = _ratio(correct, n_pred), _ratio(correct, n_gold)
    return MetricsReport(p, r, _f1(p, r), per_type, n_gold, n_pred, correct, skipped)


def metrics_csv(report: MetricsReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["class", "P", "R", "F1", "support"])
    for name, m in report.per_type.items():
        w.writerow([name, f"{m.precision:.4f}", f"{m.recall:.4f}", f"{m.f1:.4f}", m.support])
    w.writerow(["micro", f"{report.precision:.4f}", f"{report.recall:.4f}", f"{report.f1:.4f}",
                report.gold_positives])
    return buf.getvalue()


def metrics_table(report: MetricsReport) -> str:
    rows = [(name, m.precision, m.recall, m.f1, m.support) for name, m in report.per_type.items()]
    rows.append(("micro", report.precision, report.recall, report.f1, report.gold_positives))
    width = max(len("class"), *(len(r[0]) for r in rows))
    lines = [f"{'class':<{width}}  {'P':>6}  {'R':>6}  {'F1':>6}  {'support':>7}"]
    for name, p, r, f, s in rows:
        lines.append(f"{name:<{width}}  {p * 100:6.2f}  {r * 100:6.2f}  {f * 100:6.2f}  {s:>7d}")
    if report.skipped:
        lines.append(f"({report.skipped} pairs too far apart to encode were scored as null)")
    return "\n".join(lines) + "\n"


@dataclass
class SeedAggregate:
    precision: float
    recall: float
    f1: float
    per_type_f1: dict[str, float]
    per_seed: list[MetricsReport] = field(default_factory=list)
    per_type_precision: dict[str, float] = field(default_factory=dict)
    per_type_recall: dict[str, float] = field(default_factory=dict)


def aggregate_seeds(reports: Sequence[MetricsReport]) -> SeedAggregate:
    """Arithmetic mean of per-seed scores (not F1 of pooled counts)."""
    if not reports:
        raise EmptyList("no reports to aggregate")
    names = list(reports[0].per_type)
    if any(list(r.per_type) != names for r in reports):
        raise ValueError("reports use different class inventories")
    return SeedAggregate(
        mean(r.precision for r in reports),
        mean(r.recall for r in reports),
        mean(r.f1 for r in reports),
        {n: mean(r.per_type[n].f1 for r in reports) for n in names},
        list(reports),
        {n: mean(r.per_type[n].precision for r in reports) for n in names},
        {n: mean(r.per_type[n].recall for r in reports) for n in names},
    )


def aggregate_csv(agg: SeedAggregate) -> str:
    """Seed-averaged metrics in the same layout as :func:`metrics_csv`."""
    first = agg.per_seed[0]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["class", "P", "R", "F1", "support"])
    for name in agg.per_type_f1:
        w.writerow([name, f"{agg.per_type_precision[name]:.4f}", f"{agg.per_type_recall[name]:.4f}",
                    f"{agg.per_type_f1[name]:.4f}", first.per_type[name].support])
    w.writerow(["micro", f"{agg.precision:.4f}", f"{agg.recall:.4f}", f"{agg.f1:.4f}", first.gold_positives])
    return buf.getvalue()


@dataclass
class TransferMatrix:
    """``scores[(s, t)]`` is the F1 of a source-``s`` model on target ``t``."""

    languages: list[str]
    scores: dict[tuple[str, str], float] = field(default_factory=dict)

    def f(self, source: str, target: str) -> float:
        return self.scores[(source, target)]

    @property
    def sources(self) -> list[str]:
        return [s for s in self.languages if any((s, t) in self.scores for t in self.languages)]


def compute_transfer_matrix(models: dict, tests: dict, encoders: dict | InstanceEncoder,
                            schema: RelationSchema) -> TransferMatrix:
    """Score every source model on every target test set.

    ``models`` maps a source language to one model or a list of per-seed
    models; a cell is the mean of the per-seed micro-F1 values.
    ``encoders`` is one :class:`InstanceEncoder` or a mapping per source.
    """
    languages = list(dict.fromkeys([*models, *tests]))
    matrix = TransferMatrix(languages)
    for s, ms in models.items():
        ms = ms if isinstance(ms, (list, tuple)) else [ms]
        enc = encoders[s] if isinstance(encoders, dict) else encoders
        for t, instances in tests.items():
            f1s = [compute_metrics(predict_corpus(m, instances, enc), instances, schema).f1 for m in ms]
            matrix.scores[(s, t)] = mean(f1s)
    return matrix


def compute_rho(matrix: TransferMatrix, source: str, languages: Sequence[str] | None = None) -> float:
    """Average over targets ``t != source`` of ``f(source, t) / f(t, t)``."""
    langs = list(languages) if languages is not None else list(matrix.languages)
    if source not in langs:
        langs.append(source)
    if len(langs) < 2:
        raise TooFewLanguages("transfer efficiency needs at least two languages")
    total = 0.0
    for t in langs:
        if t == source:
            continue
        if (t, t) not in matrix.scores:
            raise MissingDiagonal(t)
        sup = matrix.scores[(t, t)]
        if sup == 0:
            raise DegenerateSupervised(t)
        total += matrix.scores[(source, t)] / sup
    return total / (len(langs) - 1)


def transfer_csv(matrix: TransferMatrix, with_rho: bool = True) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    targets = matrix.languages
    w.writerow(["source", *targets] + (["rho"] if with_rho else []))
    for s in matrix.sources:
        row = [s] + [f"{matrix.scores[(s, t)]:.4f}" if (s, t) in matrix.scores else "" for t in targets]
        if with_rho:
            # rho is taken over the languages that have a supervised diagonal
            langs = [t for t in targets if (t, t) in matrix.scores]
            try:
                row.append(f"{compute_rho(matrix, s, langs):.4f}")
            except (MissingDiagonal, DegenerateSupervised, TooFewLanguages, KeyError):
                row.append("")
        w.writerow(row)
    return buf.getvalue()
