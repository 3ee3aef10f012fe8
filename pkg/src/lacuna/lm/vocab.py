"""Toy subword vocabulary.

Words are cut into chunks of at most three characters.  The first chunk of a
word carries the ``▁`` word-start marker, so ``szarru`` becomes
``▁sza`` + ``rru``.  Placeholders are single word-start entries.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

from lacuna.corpus import MASK, UNK

WORD_START = "▁"
EOT = "</s>"
OOV = "<unk>"
CHUNK = 3

# order fixes the reserved ids 0..3
RESERVED: tuple[tuple[str, bool], ...] = ((EOT, False), (OOV, True), (MASK, True), (UNK, True))


def split_word(word: str, chunk: int = CHUNK) -> list[str]:
    pieces = [word[i : i + chunk] for i in range(0, len(word), chunk)]
    pieces[0] = WORD_START + pieces[0]
    return pieces


@dataclass
class SubwordVocab:
    entries: list[tuple[str, bool]]
    chunk: int = CHUNK
    _index: dict[str, int] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        self._index = {}
        for i, (s, _) in enumerate(self.entries):
            if s in self._index:
                raise ValueError(f"duplicate vocabulary entry {s!r}")
            self._index[s] = i
        for s, bw in RESERVED:
            if s not in self._index or self.entries[self._index[s]][1] != bw:
                raise ValueError(f"reserved entry {s!r} missing or misflagged")
        if not any(bw for _, bw in self.entries):
            raise ValueError("vocabulary has no word-start entries")

    @classmethod
    def build(cls, words: Iterable[str], chunk: int = CHUNK) -> "SubwordVocab":
        pieces: set[str] = set()
        for w in words:
            pieces.update(split_word(w, chunk))
        reserved = {s for s, _ in RESERVED}
        body = sorted(p for p in pieces if p not in reserved)
        return cls(list(RESERVED) + [(p, p.startswith(WORD_START)) for p in body], chunk)

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, piece: str) -> bool:
        return piece in self._index

    def id(self, piece: str) -> int:
        return self._index[piece]

    def piece(self, idx: int) -> str:
        return self.entries[idx][0]

    def begins_word(self, idx: int) -> bool:
        return self.entries[idx][1]

    @property
    def eot_id(self) -> int:
        return self._index[EOT]

    @property
    def oov_id(self) -> int:
        return self._index[OOV]

    @property
    def mask_id(self) -> int:
        return self._index[MASK]

    @property
    def unk_id(self) -> int:
        return self._index[UNK]

    def begins_word_ids(self) -> list[int]:
        return [i for i, (_, bw) in enumerate(self.entries) if bw]

    def encode_word(self, word: str) -> list[int]:
        if word in self._index and self.entries[self._index[word]][1]:
            return [self._index[word]]  # placeholders
        pieces = split_word(word, self.chunk)
        if all(p in self._index for p in pieces):
            return [self._index[p] for p in pieces]
        return [self.oov_id]

    def encode(self, text: str) -> list[int]:
        ids: list[int] = []
        for w in text.split():
            ids.extend(self.encode_word(w))
        return ids

    def decode(self, ids: Sequence[int]) -> str:
        """Inverse of :meth:`encode` for in-vocabulary text; stops at EOT."""
        words: list[str] = []
        for i in ids:
            if i == self.eot_id:
                break
            s, bw = self.entries[i]
            if bw or not words:
                words.append(s[len(WORD_START):] if s.startswith(WORD_START) else s)
            else:
                words[-1] += s
        return " ".join(words)

    def to_json(self) -> dict:
        return {"chunk": self.chunk, "entries": [[s, bw] for s, bw in self.entries]}

    @classmethod
    def from_json(cls, obj: dict) -> "SubwordVocab":
        return cls([(s, bool(bw)) for s, bw in obj["entries"]], int(obj["chunk"]))
