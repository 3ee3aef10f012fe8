"""Majority voting across prediction runs."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

from lacuna.decode import PredictionRecord
from lacuna.io import read_jsonl, write_jsonl

Key = tuple[str, int, int]


class KeySpaceError(ValueError):
    pass


@dataclass(frozen=True)
class VoteConfig:
    top_k: int = 3
    min_systems: int = 1

    def __post_init__(self) -> None:
        if self.top_k < 1 or self.min_systems < 1:
            raise ValueError("top_k and min_systems must be >= 1")


@dataclass(frozen=True)
class RankedPrediction:
    doc_id: str
    variant_id: int
    position: int
    ranked: tuple[tuple[str, int], ...]

    @property
    def key(self) -> Key:
        return (self.doc_id, self.variant_id, self.position)

    @property
    def top(self) -> str:
        return self.ranked[0][0] if self.ranked else ""

    def words(self, k: int | None = None) -> list[str]:
        return [w for w, _ in self.ranked[:k]]

    def to_json(self) -> dict[str, Any]:
        return {
            "doc_id": self.doc_id,
            "variant_id": self.variant_id,
            "position": self.position,
            "ranked": [[w, c] for w, c in self.ranked],
        }

    @classmethod
    def from_json(cls, obj: Mapping[str, Any]) -> "RankedPrediction":
        return cls(
            obj["doc_id"], int(obj["variant_id"]), int(obj["position"]), tuple((w, int(c)) for w, c in obj["ranked"])
        )


def _index(run: Sequence[PredictionRecord], n: int) -> dict[Key, str]:
    out: dict[Key, str] = {}
    for rec in run:
        if rec.key in out:
            raise KeySpaceError(f"run {n} has two predictions for {rec.key}")
        out[rec.key] = rec.predicted
    return out


def majority_vote(runs: Sequence[Sequence[PredictionRecord]], cfg: VoteConfig = VoteConfig()) -> list[RankedPrediction]:
    """Count identical words per key across runs.

    Ranking is by vote count, then by the word itself so that ties are
    independent of run order.  Empty predictions never receive votes.
    """
    if len(runs) < cfg.min_systems:
        raise ValueError(f"need at least {cfg.min_systems} runs, got {len(runs)}")
    if not runs:
        return []
    indexed = [_index(run, i) for i, run in enumerate(runs)]
    keys = sorted(indexed[0])
    reference = set(keys)
    for i, idx in enumerate(indexed[1:], start=1):
        if idx.keys() != reference:
            diff = sorted(reference.symmetric_difference(idx.keys()))[0]
            raise KeySpaceError(f"run {i} key space differs from run 0 at {diff}")
    out = []
    for key in keys:
        votes = Counter(idx[key] for idx in indexed if idx[key])
        ranked = sorted(votes.items(), key=lambda wc: (-wc[1], wc[0]))[: cfg.top_k]
        out.append(RankedPrediction(*key, ranked=tuple(ranked)))
    return out


def select_top_runs(scores: Mapping[str, float], n: int = 60) -> list[str]:
    """Names of the ``n`` best-scoring runs (ties by name)."""
    return [name for name, _ in sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))[:n]]


def read_ranked(path: str | Path) -> list[RankedPrediction]:
    return [RankedPrediction.from_json(o) for o in read_jsonl(path)]


def write_ranked(path: str | Path, ranked: Iterable[RankedPrediction]) -> int:
    return write_jsonl(path, (r.to_json() for r in ranked))
