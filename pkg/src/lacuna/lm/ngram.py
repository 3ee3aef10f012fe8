"""Count-based subword n-gram model.

Seen contexts get an add-kappa estimate over the whole vocabulary.  A context
never observed at order ``m`` falls back to the ``m - 1`` suffix, scaled by
the backoff factor and renormalised.
"""

from __future__ import annotations

import json
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from lacuna.corpus import Document
from lacuna.io import sha256_bytes
from lacuna.lm.base import SamplingParams, truncate_at_stop
from lacuna.lm.vocab import CHUNK, SubwordVocab

MAGIC = "LACUNA-NGRAM-1"


class ModelFormatError(ValueError):
    pass


@dataclass
class _Table:
    ids: np.ndarray
    counts: np.ndarray
    total: int


class NgramModel:
    def __init__(
        self,
        order: int,
        vocab: SubwordVocab,
        counts: Sequence[dict[tuple[int, ...], dict[int, int]]],
        kappa: float = 0.01,
        backoff: float = 0.4,
    ):
        if order < 1:
            raise ValueError("order must be >= 1")
        if len(counts) != order:
            raise ValueError("need one count table per order")
        if kappa <= 0:
            raise ValueError("kappa must be positive")
        if not 0 < backoff <= 1:
            raise ValueError("backoff must lie in (0, 1]")
        self.order = order
        self.vocab = vocab
        self.kappa = float(kappa)
        self.backoff = float(backoff)
        # counts[m-1] maps a length m-1 context to next-id counts
        self.counts = [
            {ctx: dict(sorted(nxt.items())) for ctx, nxt in sorted(table.items())} for table in counts
        ]
        self._tables: list[dict[tuple[int, ...], _Table]] = []
        for table in self.counts:
            packed = {}
            for ctx, nxt in table.items():
                ids = np.fromiter(nxt.keys(), dtype=np.int64, count=len(nxt))
                cnt = np.fromiter(nxt.values(), dtype=np.float64, count=len(nxt))
                packed[ctx] = _Table(ids, cnt, int(cnt.sum()))
            self._tables.append(packed)
        if () not in self._tables[0]:
            raise ValueError("unigram table is empty")

    def __repr__(self) -> str:
        return f"NgramModel(order={self.order}, vocab={len(self.vocab)}, kappa={self.kappa}, backoff={self.backoff})"

    # -- scoring -----------------------------------------------------------

    def _estimate(self, table: _Table) -> np.ndarray:
        V = len(self.vocab)
        p = np.full(V, self.kappa)
        p[table.ids] += table.counts
        return p / (table.total + self.kappa * V)

    def _distribution(self, context: tuple[int, ...]) -> np.ndarray:
        table = self._tables[len(context)].get(context)
        if table is not None:
            return self._estimate(table)
        scaled = self.backoff * self._distribution(context[1:])
        return scaled / scaled.sum()

    def next_distribution(self, context: Sequence[int]) -> np.ndarray:
        """Probability vector over the vocabulary for the next subword."""
        ctx = tuple(int(i) for i in context)
        if self.order > 1:
            ctx = ctx[len(ctx) - min(len(ctx), self.order - 1) :]
        else:
            ctx = ()
        return self._distribution(ctx)

    def count(self, context: Sequence[int], nxt: int) -> int:
        return self.counts[len(context)].get(tuple(context), {}).get(nxt, 0)

    # -- free-form generation ------------------------------------------------

    def encode(self, text: str) -> list[int]:
        return self.vocab.encode(text)

    def generate(self, prompt: str, params: SamplingParams = SamplingParams()) -> str:
        """Ancestral sampling from the prompt; temperature 0 is argmax."""
        rng = np.random.default_rng(params.seed)
        context = self.encode(prompt)
        out: list[int] = []
        text = ""
        for _ in range(params.max_new_tokens):
            p = self.next_distribution(context)
            if params.temperature == 0:
                nxt = int(np.argmax(p))
            else:
                logits = np.log(p) / params.temperature
                w = np.exp(logits - logits.max())
                nxt = int(rng.choice(len(p), p=w / w.sum()))
            if nxt == self.vocab.eot_id:
                break
            out.append(nxt)
            context.append(nxt)
            text, stopped = truncate_at_stop(self.vocab.decode(out), params.stop_sequences)
            if stopped:
                return text
        return self.vocab.decode(out)

    # -- persistence ---------------------------------------------------------

    def _payload(self) -> dict:
        return {
            "order": self.order,
            "kappa": self.kappa,
            "backoff": self.backoff,
            "vocab": self.vocab.to_json(),
            "counts": [
                [[list(ctx), [[i, c] for i, c in nxt.items()]] for ctx, nxt in table.items()]
                for table in self.counts
            ],
        }

    def to_bytes(self) -> bytes:
        body = json.dumps(self._payload(), ensure_ascii=False, separators=(",", ":")).encode("utf-8")
        return b"%s\nsha256:%s\n%s\n" % (MAGIC.encode(), sha256_bytes(body).encode(), body)

    def save(self, path: str | Path) -> None:
        Path(path).write_bytes(self.to_bytes())

    @classmethod
    def from_bytes(cls, data: bytes) -> "NgramModel":
        parts = data.split(b"\n", 2)
        if len(parts) < 3 or parts[0].decode("utf-8", "replace") != MAGIC:
            raise ModelFormatError(f"not a {MAGIC} model file")
        checksum = parts[1].decode("ascii", "replace")
        body = parts[2].rstrip(b"\n")
        if checksum != "sha256:" + sha256_bytes(body):
            raise ModelFormatError("model checksum mismatch")
        obj = json.loads(body)
        counts = [
            {tuple(ctx): {int(i): int(c) for i, c in nxt} for ctx, nxt in table} for table in obj["counts"]
        ]
        return cls(obj["order"], SubwordVocab.from_json(obj["vocab"]), counts, obj["kappa"], obj["backoff"])

    @classmethod
    def load(cls, path: str | Path) -> "NgramModel":
        return cls.from_bytes(Path(path).read_bytes())


def document_stream(doc: Document, vocab: SubwordVocab) -> list[int]:
    """``</s> w1 ... wn </s>`` as subword ids; the leading EOT is context only."""
    ids = [vocab.eot_id]
    for w in doc.words:
        ids.extend(vocab.encode_word(w))
    ids.append(vocab.eot_id)
    return ids


def train_ngram(
    corpus: Iterable[Document],
    order: int = 4,
    kappa: float = 0.01,
    backoff: float = 0.4,
    chunk: int = CHUNK,
) -> NgramModel:
    corpus = list(corpus)
    if not corpus:
        raise ValueError("cannot train on an empty corpus")
    if order < 1:
        raise ValueError("order must be >= 1")
    vocab = SubwordVocab.build((w for d in corpus for w in d.words), chunk)
    counts: list[dict[tuple[int, ...], dict[int, int]]] = [defaultdict(lambda: defaultdict(int)) for _ in range(order)]
    for doc in corpus:
        seq = document_stream(doc, vocab)
        for j in range(1, len(seq)):
            for m in range(1, min(order, j + 1) + 1):
                counts[m - 1][tuple(seq[j - m + 1 : j])][seq[j]] += 1
    plain = [{ctx: dict(nxt) for ctx, nxt in table.items()} for table in counts]
    return NgramModel(order, vocab, plain, kappa, backoff)
