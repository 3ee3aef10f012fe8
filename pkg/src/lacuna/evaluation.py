"""Scoring, baselines and frequency tables."""

from __future__ import annotations

import csv
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

from lacuna.corpus import Document, corpus_stats
from lacuna.decode import PredictionRecord
from lacuna.ensemble import RankedPrediction
from lacuna.masking import MaskedVariant
from lacuna.prompts import Method

Key = tuple[str, int, int]

METHOD_LABELS = {Method.ALL: "All", Method.ONE_BY_ONE: "One by one", Method.RESTORE: "Restore"}


class EvaluationError(ValueError):
    pass


@dataclass(frozen=True)
class FrequencyTable:
    rows: tuple[tuple[str, float], ...]
    unique: int
    total: int
    counts: tuple[int, ...] = ()

    def to_json(self) -> dict[str, Any]:
        return {"unique": self.unique, "total": self.total, "top": [[w, f] for w, f in self.rows]}


def frequency_report(words: Iterable[str], top_n: int = 20) -> FrequencyTable:
    """Top ``top_n`` words by relative frequency; ties broken alphabetically."""
    counts = Counter(words)
    total = sum(counts.values())
    top = sorted(counts.items(), key=lambda wc: (-wc[1], wc[0]))[:top_n]
    return FrequencyTable(
        rows=tuple((w, c / total) for w, c in top),
        unique=len(counts),
        total=total,
        counts=tuple(c for _, c in top),
    )


@dataclass
class EvalReport:
    n_positions: int
    n_correct: int
    unique_predicted: int
    unique_reference: int
    top_predicted: FrequencyTable
    top_reference: FrequencyTable
    topk: int | None = None
    topk_correct: int | None = None
    macro_accuracy: float | None = None
    per_language: dict[str, "EvalReport"] = field(default_factory=dict)
    label: str = ""

    @property
    def accuracy(self) -> float:
        return self.n_correct / self.n_positions if self.n_positions else 0.0

    @property
    def topk_accuracy(self) -> float | None:
        if self.topk_correct is None:
            return None
        return self.topk_correct / self.n_positions if self.n_positions else 0.0

    def to_json(self) -> dict[str, Any]:
        out: dict[str, Any] = {
            "label": self.label,
            "accuracy": self.accuracy,
            "n_positions": self.n_positions,
            "n_correct": self.n_correct,
            "unique_predicted": self.unique_predicted,
            "unique_reference": self.unique_reference,
            "top_predicted": self.top_predicted.to_json(),
            "top_reference": self.top_reference.to_json(),
        }
        if self.topk is not None:
            out["topk"] = self.topk
            out["topk_accuracy"] = self.topk_accuracy
        if self.macro_accuracy is not None:
            out["macro_accuracy"] = self.macro_accuracy
        if self.per_language:
            out["per_language"] = {lang: r.to_json() for lang, r in sorted(self.per_language.items())}
        return out


def gold_index(variants: Iterable[MaskedVariant]) -> dict[Key, tuple[str, str]]:
    """Map (doc_id, variant_id, position) to (gold word, language)."""
    out = {}
    for v in variants:
        for pos, g in zip(v.positions, v.gold):
            out[(v.doc_id, v.variant_id, pos)] = (g, v.language)
    return out


def _score(
    gold: Mapping[Key, tuple[str, str]],
    candidates: Mapping[Key, list[str]],
    top_n: int,
    topk: int | None,
    macro: bool,
    label: str,
    nested: bool = True,
) -> EvalReport:
    n_correct = 0
    topk_correct = 0
    per_doc: dict[tuple[str, int], list[int]] = {}
    for key, (g, _) in gold.items():
        cands = candidates.get(key, [])
        hit = bool(cands) and cands[0] == g
        n_correct += hit
        if topk is not None:
            topk_correct += g in cands[:topk]
        per_doc.setdefault(key[:2], []).append(hit)
    predicted = [c[0] for c in candidates.values() if c and c[0]]
    reference = [g for g, _ in gold.values()]
    report = EvalReport(
        n_positions=len(gold),
        n_correct=n_correct,
        unique_predicted=len(set(predicted)),
        unique_reference=len(set(reference)),
        top_predicted=frequency_report(predicted, top_n),
        top_reference=frequency_report(reference, top_n),
        topk=topk,
        topk_correct=topk_correct if topk is not None else None,
        label=label,
    )
    if macro:
        # each (document, variant) weighs the same regardless of mask count
        report.macro_accuracy = sum(sum(h) / len(h) for h in per_doc.values()) / len(per_doc) if per_doc else 0.0
    if nested:
        for lang in sorted({lang for _, lang in gold.values()}):
            sub = {k: v for k, v in gold.items() if v[1] == lang}
            report.per_language[lang] = _score(
                sub, {k: candidates[k] for k in sub if k in candidates}, top_n, topk, macro, lang, nested=False
            )
    return report


def _check_keys(keys: Iterable[Key], gold: Mapping[Key, Any]) -> None:
    for key in keys:
        if key not in gold:
            raise EvaluationError(f"prediction for unknown key {key}")


def accuracy(
    predictions: Sequence[PredictionRecord],
    variants: Iterable[MaskedVariant],
    top_n: int = 20,
    macro: bool = False,
    label: str = "",
) -> EvalReport:
    """Exact-match accuracy pooled over all masked positions.  Positions
    without a prediction count as wrong."""
    gold = gold_index(variants)
    cands: dict[Key, list[str]] = {}
    for rec in predictions:
        if rec.key in cands:
            raise EvaluationError(f"two predictions for {rec.key}")
        cands[rec.key] = [rec.predicted]
    _check_keys(cands, gold)
    return _score(gold, cands, top_n, None, macro, label or _label(predictions))


def _label(predictions: Sequence[PredictionRecord]) -> str:
    systems = {r.system_id for r in predictions}
    return systems.pop() if len(systems) == 1 else ""


def ranked_report(
    ranked: Sequence[RankedPrediction],
    variants: Iterable[MaskedVariant],
    k: int = 3,
    top_n: int = 20,
    macro: bool = False,
    label: str = "majority",
) -> EvalReport:
    """Top-1 accuracy of the vote winners plus top-``k`` accuracy."""
    gold = gold_index(variants)
    cands = {r.key: r.words() for r in ranked}
    _check_keys(cands, gold)
    return _score(gold, cands, top_n, k, macro, label)


def topk_accuracy(ranked: Sequence[RankedPrediction], variants: Iterable[MaskedVariant], k: int) -> float:
    if k < 1:
        raise ValueError("k must be >= 1")
    report = ranked_report(ranked, variants, k=k)
    return report.topk_accuracy or 0.0


def baseline_words(train_corpus: Iterable[Document]) -> dict[str, str]:
    stats = corpus_stats(train_corpus)
    return {lang: stats.most_common_word(lang) for lang in sorted(stats.frequencies)}


def most_common_word_baseline(
    train_corpus: Iterable[Document], variants: Sequence[MaskedVariant], top_n: int = 20
) -> EvalReport:
    """Predict each language's most frequent training word at every mask."""
    words = baseline_words(train_corpus)
    missing = sorted({v.language for v in variants} - words.keys())
    if missing:
        raise EvaluationError(f"languages absent from the training corpus: {', '.join(missing)}")
    preds = [
        PredictionRecord("most-common-word", Method.ALL, v.doc_id, v.variant_id, p, words[v.language])
        for v in variants
        for p in v.positions
    ]
    return accuracy(preds, variants, top_n=top_n, label="most-common-word")


# -- output tables ---------------------------------------------------------


def write_frequency_csv(path: str | Path, tables: Mapping[str, FrequencyTable]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["table", "rank", "word", "count", "relative_frequency"])
        for name, table in tables.items():
            for rank, ((word, freq), count) in enumerate(zip(table.rows, table.counts), start=1):
                w.writerow([name, rank, word, count, repr(freq)])


def _num(x: float) -> str:
    s = f"{x:.3f}".rstrip("0")
    return s + "0" * max(0, 2 - len(s.split(".")[1]))


def _grid(header: Sequence[str], rows: Sequence[Sequence[str]], label_width: int = 0) -> str:
    widths = [max(len(r[i]) for r in [header, *rows] if i < len(r)) for i in range(len(header))]
    widths[0] = max(widths[0], label_width)
    lines = []
    for r in [header, *rows]:
        cells = [r[0].ljust(widths[0])] + [c.rjust(widths[i + 1]) for i, c in enumerate(r[1:])]
        lines.append("  ".join(cells).rstrip())
    return "\n".join(lines)


def format_accuracy_table(
    accuracies: Mapping[tuple[Method, str], float],
    systems: Sequence[str],
    majority: tuple[float, float] | None = None,
    baseline: float | None = None,
) -> str:
    """Method-by-system accuracy grid with the majority-vote (top-k in
    parentheses) and most-common-word rows spanning all system columns."""
    rows = []
    for m in Method:
        if any((m, s) in accuracies for s in systems):
            rows.append([METHOD_LABELS[m]] + [_num(accuracies[(m, s)]) if (m, s) in accuracies else "-" for s in systems])
    spans = []
    if majority is not None:
        spans.append(("Majority voting", f"{_num(majority[0])} ({_num(majority[1])})"))
    if baseline is not None:
        spans.append(("Most common word", _num(baseline)))
    label_w = max([len(r[0]) for r in rows] + [len(label) for label, _ in spans], default=0)
    body = _grid([""] + list(systems), rows, label_w)
    if not spans:
        return body
    width = max(len(line) for line in body.splitlines())
    # spanning rows centre their value across all system columns
    lines = [body, "-" * width]
    for label, value in spans:
        lines.append((label.ljust(label_w + 2) + value.center(max(0, width - label_w - 2))).rstrip())
    return "\n".join(lines)


def format_updates_table(
    updates: Mapping[tuple[Method, str], tuple[int, float]], systems: Sequence[str]
) -> str:
    """Update count (epoch fraction) of each best checkpoint, methods by systems."""
    rows = []
    for m in Method:
        if any((m, s) in updates for s in systems):
            rows.append(
                [METHOD_LABELS[m]]
                + [f"{updates[(m, s)][0]} ({updates[(m, s)][1]:.2f})" if (m, s) in updates else "-" for s in systems]
            )
    return _grid([""] + list(systems), rows)
