"""Token-row ingestion, document reconstruction and dev splitting.

The task data arrive as one row per token.  Rows are grouped by ``doc_id``
and ordered by ``(line_no, word_index)``; line structure is kept only so the
rows can be written back out unchanged.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import IO, Any, Iterable, Iterator, Mapping, Sequence

import numpy as np

from lacuna.io import read_jsonl, write_jsonl

MASK = "[MASK]"
UNK = "[UNK]"
RESERVED_SURFACES = frozenset({MASK, UNK})

TSV_HEADER = ("doc_id", "line_no", "word_index", "surface", "language", "extras_json")


class IngestError(ValueError):
    """Raised for malformed, duplicate or inconsistent token rows."""


class SplitConfigError(ValueError):
    pass


@dataclass(frozen=True)
class TokenRecord:
    doc_id: str
    line_no: int
    word_index: int
    surface: str
    language: str
    extras: Mapping[str, str] = field(default_factory=dict, compare=True)

    @property
    def key(self) -> tuple[str, int, int]:
        return (self.doc_id, self.line_no, self.word_index)


def check_surface(surface: str) -> None:
    if not surface:
        raise IngestError("empty surface")
    if any(ch.isspace() for ch in surface):
        raise IngestError(f"surface {surface!r} contains whitespace")
    if surface in RESERVED_SURFACES:
        raise IngestError(f"surface {surface!r} is a reserved placeholder")


@dataclass(frozen=True)
class Document:
    """One reconstructed document.

    ``keys`` and ``extras`` run parallel to ``words`` and exist so that the
    original token rows can be regenerated; nothing downstream reads them.
    """

    doc_id: str
    language: str
    words: tuple[str, ...]
    line_starts: tuple[int, ...] = ()
    keys: tuple[tuple[int, int], ...] = ()
    extras: tuple[Mapping[str, str], ...] = ()

    def __post_init__(self) -> None:
        if not self.words:
            raise IngestError(f"document {self.doc_id!r} has no words")
        for w in self.words:
            check_surface(w)
        if self.keys and len(self.keys) != len(self.words):
            raise IngestError(f"document {self.doc_id!r}: keys/words length mismatch")

    def __len__(self) -> int:
        return len(self.words)

    @property
    def text(self) -> str:
        return " ".join(self.words)

    @classmethod
    def from_words(cls, doc_id: str, language: str, words: Sequence[str]) -> "Document":
        """Single-line document with consecutive word indices."""
        words = tuple(words)
        return cls(
            doc_id=doc_id,
            language=language,
            words=words,
            line_starts=(0,),
            keys=tuple((0, i) for i in range(len(words))),
            extras=tuple({} for _ in words),
        )

    def to_json(self) -> dict[str, Any]:
        return {
            "doc_id": self.doc_id,
            "language": self.language,
            "words": list(self.words),
            "line_starts": list(self.line_starts),
            "keys": [list(k) for k in self.keys],
            "extras": [dict(e) for e in self.extras],
        }

    @classmethod
    def from_json(cls, obj: Mapping[str, Any]) -> "Document":
        words = tuple(obj["words"])
        keys = tuple(tuple(k) for k in obj.get("keys") or ())
        extras = tuple(obj.get("extras") or ())
        if not keys:
            return cls.from_words(obj["doc_id"], obj["language"], words)
        return cls(
            doc_id=obj["doc_id"],
            language=obj["language"],
            words=words,
            line_starts=tuple(obj.get("line_starts") or ()),
            keys=keys,  # type: ignore[arg-type]
            extras=extras or tuple({} for _ in words),
        )

    def token_records(self) -> list[TokenRecord]:
        keys = self.keys or tuple((0, i) for i in range(len(self.words)))
        extras = self.extras or tuple({} for _ in self.words)
        return [
            TokenRecord(self.doc_id, ln, wi, w, self.language, dict(ex))
            for (ln, wi), w, ex in zip(keys, self.words, extras)
        ]


# -- TSV -------------------------------------------------------------------


def _parse_row(fields: list[str], lineno: int) -> TokenRecord:
    if len(fields) != len(TSV_HEADER):
        raise IngestError(f"line {lineno}: expected {len(TSV_HEADER)} fields, got {len(fields)}")
    doc_id, line_no, word_index, surface, language, extras_json = fields
    try:
        ln, wi = int(line_no), int(word_index)
    except ValueError:
        raise IngestError(f"line {lineno}: line_no/word_index must be integers") from None
    if ln < 0 or wi < 0:
        raise IngestError(f"line {lineno}: line_no/word_index must be non-negative")
    if not doc_id:
        raise IngestError(f"line {lineno}: empty doc_id")
    try:
        check_surface(surface)
    except IngestError as exc:
        raise IngestError(f"line {lineno}: {exc}") from None
    extras: dict[str, str] = {}
    if extras_json:
        try:
            parsed = json.loads(extras_json)
        except json.JSONDecodeError:
            raise IngestError(f"line {lineno}: extras_json is not valid JSON") from None
        if not isinstance(parsed, dict) or not all(
            isinstance(k, str) and isinstance(v, str) for k, v in parsed.items()
        ):
            raise IngestError(f"line {lineno}: extras_json must be an object of strings")
        extras = parsed
    return TokenRecord(doc_id, ln, wi, surface, language, extras)


def iter_token_rows(fh: IO[str]) -> Iterator[TokenRecord]:
    """Parse token TSV from an open text stream (header required)."""
    header = fh.readline()
    if not header:
        return
    if tuple(header.rstrip("\r\n").split("\t")) != TSV_HEADER:
        raise IngestError(f"line 1: bad header, expected {' '.join(TSV_HEADER)}")
    for lineno, line in enumerate(fh, start=2):
        line = line.rstrip("\r\n")
        if not line:
            continue
        yield _parse_row(line.split("\t"), lineno)


def read_token_tsv(path: str | Path) -> Iterator[TokenRecord]:
    with open(path, encoding="utf-8") as fh:
        yield from iter_token_rows(fh)


def format_token_row(rec: TokenRecord) -> str:
    extras = json.dumps(dict(rec.extras), ensure_ascii=False, sort_keys=True) if rec.extras else ""
    return "\t".join(
        [rec.doc_id, str(rec.line_no), str(rec.word_index), rec.surface, rec.language, extras]
    )


def write_token_tsv(path: str | Path, records: Iterable[TokenRecord]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\t".join(TSV_HEADER) + "\n")
        for rec in records:
            fh.write(format_token_row(rec) + "\n")


# -- ingestion -------------------------------------------------------------


def ingest_tokens(rows: Iterable[TokenRecord]) -> list[Document]:
    """Group token rows into documents.

    Documents come out in first-appearance order of their ``doc_id``; words
    inside a document are sorted by ``(line_no, word_index)``.
    """
    grouped: dict[str, list[TokenRecord]] = {}
    languages: dict[str, str] = {}
    seen: set[tuple[str, int, int]] = set()
    for rec in rows:
        if rec.key in seen:
            raise IngestError(f"duplicate token key {rec.key}")
        seen.add(rec.key)
        lang = languages.setdefault(rec.doc_id, rec.language)
        if lang != rec.language:
            raise IngestError(
                f"document {rec.doc_id!r}: language {rec.language!r} conflicts with {lang!r}"
            )
        grouped.setdefault(rec.doc_id, []).append(rec)

    docs = []
    for doc_id, recs in grouped.items():
        recs.sort(key=lambda r: (r.line_no, r.word_index))
        line_starts = [i for i, r in enumerate(recs) if i == 0 or r.line_no != recs[i - 1].line_no]
        docs.append(
            Document(
                doc_id=doc_id,
                language=languages[doc_id],
                words=tuple(r.surface for r in recs),
                line_starts=tuple(line_starts),
                keys=tuple((r.line_no, r.word_index) for r in recs),
                extras=tuple(dict(r.extras) for r in recs),
            )
        )
    return docs


def read_corpus(path: str | Path) -> list[Document]:
    return [Document.from_json(obj) for obj in read_jsonl(path)]


def write_corpus(path: str | Path, corpus: Iterable[Document]) -> int:
    return write_jsonl(path, (d.to_json() for d in corpus))


# -- splitting -------------------------------------------------------------


@dataclass(frozen=True)
class SplitConfig:
    dev_fraction: float = 0.01
    seed: int = 0
    min_doc_words_dev: int = 2

    def __post_init__(self) -> None:
        if not 0 < self.dev_fraction < 1:
            raise SplitConfigError(f"dev_fraction must lie in (0, 1), got {self.dev_fraction}")
        if self.min_doc_words_dev < 2:
            raise SplitConfigError("min_doc_words_dev must be >= 2")


def dev_cut(n_docs: int, dev_fraction: float) -> int:
    # str() keeps 0.01 * 22777 from drifting across an integer boundary
    return math.floor(Fraction(str(dev_fraction)) * n_docs)


def split_dev(corpus: Sequence[Document], cfg: SplitConfig) -> tuple[list[Document], list[Document]]:
    """Seeded shuffle, take the first ``floor(dev_fraction * N)`` documents as
    dev candidates and drop candidates shorter than ``min_doc_words_dev``
    back into train.  Both outputs keep corpus order."""
    if not corpus:
        raise SplitConfigError("cannot split an empty corpus")
    cut = dev_cut(len(corpus), cfg.dev_fraction)
    if cut < 1:
        raise SplitConfigError(
            f"dev_fraction {cfg.dev_fraction} of {len(corpus)} documents selects no dev documents"
        )
    perm = np.random.default_rng(cfg.seed).permutation(len(corpus))
    dev_idx = {int(i) for i in perm[:cut] if len(corpus[int(i)]) >= cfg.min_doc_words_dev}
    train = [d for i, d in enumerate(corpus) if i not in dev_idx]
    dev = [d for i, d in enumerate(corpus) if i in dev_idx]
    return train, dev


# -- statistics ------------------------------------------------------------


@dataclass
class CorpusStats:
    documents: int = 0
    tokens: int = 0
    language_tokens: Counter = field(default_factory=Counter)
    frequencies: dict[str, Counter] = field(default_factory=dict)

    def most_common_word(self, language: str) -> str:
        """Most frequent surface for a language; ties go to the smaller string."""
        freq = self.frequencies.get(language)
        if not freq:
            raise KeyError(language)
        return min(freq.items(), key=lambda kv: (-kv[1], kv[0]))[0]


def corpus_stats(corpus: Iterable[Document]) -> CorpusStats:
    stats = CorpusStats()
    for doc in corpus:
        stats.documents += 1
        stats.tokens += len(doc.words)
        stats.language_tokens[doc.language] += len(doc.words)
        stats.frequencies.setdefault(doc.language, Counter()).update(doc.words)
    return stats
