"""The three prediction methods.

*All* asks for every masked word in one reply, *one-by-one* asks for each
masked word separately with the other holes shown as ``[UNK]``, and
*restore* rebuilds the whole document with a scored backend: known words are
fed in verbatim and only the holes are decoded, one whole word each.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from lacuna.io import read_jsonl, write_jsonl
from lacuna.lm.base import BackendError, SamplingParams, ScoredBackend, TextBackend
from lacuna.masking import MaskedVariant
from lacuna.prompts import Method, build_prompt_all, build_prompt_restore, build_prompts_one_by_one

logger = logging.getLogger(__name__)

MAX_WORD_SUBWORDS = 64
_WRAPPERS = ".,;:!?\"'`*“”‘’«»"


class DecodingError(RuntimeError):
    pass


@dataclass(frozen=True)
class PredictionRecord:
    system_id: str
    method: Method
    doc_id: str
    variant_id: int
    position: int
    predicted: str

    @property
    def key(self) -> tuple[str, int, int]:
        return (self.doc_id, self.variant_id, self.position)

    def to_json(self) -> dict[str, Any]:
        return {
            "system_id": self.system_id,
            "method": self.method.value,
            "doc_id": self.doc_id,
            "variant_id": self.variant_id,
            "position": self.position,
            "predicted": self.predicted,
        }

    @classmethod
    def from_json(cls, obj: Mapping[str, Any]) -> "PredictionRecord":
        return cls(
            system_id=obj["system_id"],
            method=Method(obj["method"]),
            doc_id=obj["doc_id"],
            variant_id=int(obj["variant_id"]),
            position=int(obj["position"]),
            predicted=obj["predicted"],
        )


def read_predictions(path: str | Path) -> list[PredictionRecord]:
    return [PredictionRecord.from_json(o) for o in read_jsonl(path)]


def write_predictions(path: str | Path, records: Iterable[PredictionRecord]) -> int:
    return write_jsonl(path, (r.to_json() for r in sorted(records, key=lambda r: r.key)))


# -- output parsing ------------------------------------------------------------


def parse_all_output(text: str, expected_k: int) -> list[str]:
    """Words after the last ``WORDS:`` marker, exactly ``expected_k`` of them.

    Each comma-separated item contributes its first whitespace token; missing
    items become empty strings and surplus items are dropped.
    """
    at = text.lower().rfind("words:")
    rest = text[at + len("words:") :] if at >= 0 else text
    words = []
    for item in rest.split(","):
        toks = item.split()
        words.append(toks[0] if toks else "")
    words = words[:expected_k]
    return words + [""] * (expected_k - len(words))


def normalize_reply(text: str) -> str:
    toks = text.split()
    return toks[0].strip(_WRAPPERS) if toks else ""


# -- free-form methods ------------------------------------------------------------


def _records(system_id, method, variant, words) -> list[PredictionRecord]:
    return [
        PredictionRecord(system_id, method, variant.doc_id, variant.variant_id, pos, w)
        for pos, w in zip(variant.positions, words)
    ]


def predict_all(
    backend: TextBackend,
    variant: MaskedVariant,
    language: str | None = None,
    params: SamplingParams = SamplingParams(),
    system_id: str = "",
    failures: list[str] | None = None,
) -> list[PredictionRecord]:
    prompt = build_prompt_all(variant, language)
    try:
        reply = backend.generate(prompt.text, params)
    except BackendError as exc:
        logger.warning("all: %s/%s failed: %s", variant.doc_id, variant.variant_id, exc)
        if failures is not None:
            failures.append(f"{variant.doc_id}/{variant.variant_id}: {exc}")
        reply = ""
    return _records(system_id, Method.ALL, variant, parse_all_output(reply, variant.k))


def predict_one_by_one(
    backend: TextBackend,
    variant: MaskedVariant,
    language: str | None = None,
    params: SamplingParams = SamplingParams(),
    system_id: str = "",
    failures: list[str] | None = None,
) -> list[PredictionRecord]:
    words = []
    for prompt in build_prompts_one_by_one(variant, language):
        try:
            words.append(normalize_reply(backend.generate(prompt.text, params)))
        except BackendError as exc:
            logger.warning(
                "one-by-one: %s/%s@%s failed: %s", variant.doc_id, variant.variant_id, prompt.target_position, exc
            )
            if failures is not None:
                failures.append(f"{variant.doc_id}/{variant.variant_id}@{prompt.target_position}: {exc}")
            words.append("")
    return _records(system_id, Method.ONE_BY_ONE, variant, words)


# -- restore: force decoding ----------------------------------------------------


def force_decode_ids(
    backend: ScoredBackend,
    context_ids: Sequence[int],
    banned: Iterable[int] = (),
    max_subwords: int = MAX_WORD_SUBWORDS,
) -> list[int]:
    """Subword ids of one greedily decoded word.

    The first subword is the most probable word-start subword outside
    ``banned``.  Further subwords are plain argmax picks until a word-start
    subword or end-of-text comes up; that boundary subword is not kept.
    """
    vocab = backend.vocab
    starts = np.zeros(len(vocab), dtype=bool)
    starts[vocab.begins_word_ids()] = True
    allowed = starts.copy()
    allowed[list(banned)] = False
    if not allowed.any():
        raise DecodingError("every word-start subword is banned")
    context = list(context_ids)
    p = backend.next_distribution(context)
    first = int(np.argmax(np.where(allowed, p, -np.inf)))
    word = [first]
    context.append(first)
    while len(word) < max_subwords:
        nxt = int(np.argmax(backend.next_distribution(context)))
        if starts[nxt] or nxt == vocab.eot_id:
            break
        word.append(nxt)
        context.append(nxt)
    return word


def force_decode_word(
    backend: ScoredBackend,
    context_ids: Sequence[int],
    banned: Iterable[int] = (),
    max_subwords: int = MAX_WORD_SUBWORDS,
) -> str:
    return backend.vocab.decode(force_decode_ids(backend, context_ids, banned, max_subwords))


def restore_banned_ids(backend: ScoredBackend, ban_mask_token: bool = True) -> set[int]:
    vocab = backend.vocab
    banned = {vocab.oov_id, vocab.unk_id}
    if ban_mask_token:
        banned.add(vocab.mask_id)
    return banned


def restore_document(
    backend: ScoredBackend,
    variant: MaskedVariant,
    language: str | None = None,
    ban_mask_token: bool = True,
    banned: Iterable[int] = (),
) -> list[str]:
    """Full restored word sequence for a variant (same length as the original)."""
    vocab = backend.vocab
    prompt = build_prompt_restore(variant, language)
    banned_ids = restore_banned_ids(backend, ban_mask_token) | set(banned)
    context = vocab.encode(prompt.text) + [vocab.eot_id]
    masked = set(variant.positions)
    restored = []
    for i, word in enumerate(variant.masked_words):
        if i in masked:
            ids = force_decode_ids(backend, context, banned_ids)
            restored.append(vocab.decode(ids))
        else:
            ids = vocab.encode_word(word)
            restored.append(word)
        context.extend(ids)
    return restored


def predict_restore(
    backend: ScoredBackend,
    variant: MaskedVariant,
    language: str | None = None,
    params: SamplingParams = SamplingParams(),
    system_id: str = "",
    ban_mask_token: bool = True,
    banned: Iterable[int] = (),
) -> list[PredictionRecord]:
    # greedy inside force decoding; params.temperature does not apply
    restored = restore_document(backend, variant, language, ban_mask_token, banned)
    return _records(system_id, Method.RESTORE, variant, [restored[p] for p in variant.positions])


# -- batch runner -------------------------------------------------------------------


@dataclass
class PredictionRun:
    system_id: str
    method: Method
    records: list[PredictionRecord]
    failures: list[str] = field(default_factory=list)


def predict_variants(
    method: Method | str,
    backend: Any,
    variants: Sequence[MaskedVariant],
    params: SamplingParams = SamplingParams(),
    system_id: str = "",
    ban_mask_token: bool = True,
    workers: int | None = None,
) -> PredictionRun:
    """Run one method over many variants; output sorted by key."""
    method = Method(method)
    failures: list[str] = []

    def one(v: MaskedVariant) -> list[PredictionRecord]:
        if method is Method.ALL:
            return predict_all(backend, v, params=params, system_id=system_id, failures=failures)
        if method is Method.ONE_BY_ONE:
            return predict_one_by_one(backend, v, params=params, system_id=system_id, failures=failures)
        if not isinstance(backend, ScoredBackend):
            raise DecodingError("restore needs a backend exposing next_distribution")
        return predict_restore(backend, v, params=params, system_id=system_id, ban_mask_token=ban_mask_token)

    workers = workers or getattr(backend, "max_concurrent", 1)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(one, variants))
    else:
        chunks = [one(v) for v in variants]
    records = sorted((r for chunk in chunks for r in chunk), key=lambda r: r.key)
    return PredictionRun(system_id, method, records, sorted(failures))
