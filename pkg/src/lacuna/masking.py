"""Masked-variant generation.

Each document gets up to ``max_variants`` distinct sets of masked positions,
each of size ``mask_count(len(doc))``.
"""

from __future__ import annotations

import hashlib
import itertools
import math
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from pathlib import Path
from typing import Any, Iterable, Iterator, Mapping, Sequence

import numpy as np

from lacuna.corpus import MASK, UNK, Document
from lacuna.io import read_jsonl, write_jsonl

# Beyond this many combinations the rejection fallback would be too costly
# to enumerate; the retry bound is never exhausted that far out in practice.
_ENUMERATION_LIMIT = 1_000_000


@dataclass(frozen=True)
class MaskingConfig:
    mask_rate: float = 0.15
    max_variants: int = 15
    seed: int = 0
    mask_placeholder: str = MASK
    unk_placeholder: str = UNK

    def __post_init__(self) -> None:
        if not 0 < self.mask_rate <= 1:
            raise ValueError(f"mask_rate must lie in (0, 1], got {self.mask_rate}")
        if self.max_variants < 1:
            raise ValueError("max_variants must be >= 1")
        if self.mask_placeholder == self.unk_placeholder:
            raise ValueError("mask and unk placeholders must differ")


@dataclass(frozen=True)
class MaskedVariant:
    doc_id: str
    variant_id: int
    language: str
    positions: tuple[int, ...]
    gold: tuple[str, ...]
    masked_words: tuple[str, ...]

    def __post_init__(self) -> None:
        if len(self.positions) != len(self.gold):
            raise ValueError("positions and gold must align")
        if any(b <= a for a, b in zip(self.positions, self.positions[1:])):
            raise ValueError("positions must be strictly increasing")
        if self.positions and not 0 <= self.positions[0] <= self.positions[-1] < len(self.masked_words):
            raise ValueError("position out of range")

    @property
    def k(self) -> int:
        return len(self.positions)

    @property
    def text(self) -> str:
        return " ".join(self.masked_words)

    def restored_words(self) -> tuple[str, ...]:
        words = list(self.masked_words)
        for pos, g in zip(self.positions, self.gold):
            words[pos] = g
        return tuple(words)

    def to_json(self) -> dict[str, Any]:
        return {
            "doc_id": self.doc_id,
            "variant_id": self.variant_id,
            "language": self.language,
            "positions": list(self.positions),
            "gold": list(self.gold),
            "masked_words": list(self.masked_words),
            "text": self.text,
        }

    @classmethod
    def from_json(cls, obj: Mapping[str, Any]) -> "MaskedVariant":
        return cls(
            doc_id=obj["doc_id"],
            variant_id=int(obj["variant_id"]),
            language=obj["language"],
            positions=tuple(int(p) for p in obj["positions"]),
            gold=tuple(obj["gold"]),
            masked_words=tuple(obj["masked_words"]),
        )


def mask_count(n_words: int, mask_rate: float = 0.15) -> int:
    """Number of masks for a document: ``max(1, round_half_up(rate * n))``."""
    if n_words < 1:
        raise ValueError("n_words must be positive")
    k = int((Decimal(str(mask_rate)) * n_words).to_integral_value(rounding=ROUND_HALF_UP))
    return min(n_words, max(1, k))


def render_masked(words: Sequence[str], positions: Iterable[int], placeholder: str = MASK) -> str:
    out = list(words)
    for pos in positions:
        if not 0 <= pos < len(out):
            raise IndexError(f"position {pos} out of range for {len(out)} words")
        out[pos] = placeholder
    return " ".join(out)


def _doc_rng(seed: int, doc_id: str) -> np.random.Generator:
    # per-document stream so results do not depend on corpus order
    h = int.from_bytes(hashlib.sha256(doc_id.encode("utf-8")).digest()[:8], "little")
    return np.random.default_rng([seed & 0xFFFFFFFFFFFFFFFF, h])


def _sample_position_sets(n: int, k: int, want: int, rng: np.random.Generator) -> list[tuple[int, ...]]:
    total = math.comb(n, k)
    if total <= want:
        return list(itertools.combinations(range(n), k))
    picked: list[tuple[int, ...]] = []
    seen: set[tuple[int, ...]] = set()
    for _ in range(100 * want):
        pos = tuple(sorted(int(p) for p in rng.choice(n, size=k, replace=False)))
        if pos not in seen:
            seen.add(pos)
            picked.append(pos)
            if len(picked) == want:
                return picked
    if total > _ENUMERATION_LIMIT:
        raise RuntimeError(f"could not draw {want} distinct masks from C({n},{k}) combinations")
    rest = [c for c in itertools.combinations(range(n), k) if c not in seen]
    order = rng.permutation(len(rest))
    picked.extend(rest[int(i)] for i in order[: want - len(picked)])
    return picked


def generate_variants(doc: Document, cfg: MaskingConfig = MaskingConfig()) -> list[MaskedVariant]:
    if cfg.mask_placeholder in doc.words or cfg.unk_placeholder in doc.words:
        raise ValueError(f"document {doc.doc_id!r} contains a placeholder string as a word")
    n = len(doc.words)
    k = mask_count(n, cfg.mask_rate)
    sets = _sample_position_sets(n, k, cfg.max_variants, _doc_rng(cfg.seed, doc.doc_id))
    variants = []
    for vid, positions in enumerate(sets):
        masked = list(doc.words)
        for p in positions:
            masked[p] = cfg.mask_placeholder
        variants.append(
            MaskedVariant(
                doc_id=doc.doc_id,
                variant_id=vid,
                language=doc.language,
                positions=positions,
                gold=tuple(doc.words[p] for p in positions),
                masked_words=tuple(masked),
            )
        )
    return variants


def mask_corpus(corpus: Iterable[Document], cfg: MaskingConfig = MaskingConfig()) -> Iterator[MaskedVariant]:
    for doc in corpus:
        yield from generate_variants(doc, cfg)


def read_variants(path: str | Path) -> list[MaskedVariant]:
    return [MaskedVariant.from_json(obj) for obj in read_jsonl(path)]


def write_variants(path: str | Path, variants: Iterable[MaskedVariant]) -> int:
    return write_jsonl(path, (v.to_json() for v in variants))
