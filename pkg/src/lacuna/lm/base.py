from __future__ import annotations

from dataclasses import dataclass, field
from typing import Protocol, Sequence, runtime_checkable

import numpy as np

from lacuna.lm.vocab import SubwordVocab


class BackendError(RuntimeError):
    """A backend could not produce a completion."""

    def __init__(self, message: str, status: int | None = None):
        super().__init__(message)
        self.status = status


class ProtocolError(BackendError):
    """The backend answered, but not in the expected shape. Never retried."""


@dataclass(frozen=True)
class SamplingParams:
    temperature: float = 0.2
    max_new_tokens: int = 64
    stop_sequences: tuple[str, ...] = field(default_factory=tuple)
    seed: int = 0

    def __post_init__(self) -> None:
        if self.temperature < 0:
            raise ValueError("temperature must be non-negative")
        if self.max_new_tokens < 1:
            raise ValueError("max_new_tokens must be positive")


@runtime_checkable
class TextBackend(Protocol):
    """Free-form completion: prompt in, text out."""

    def generate(self, prompt: str, params: SamplingParams) -> str: ...


@runtime_checkable
class ScoredBackend(Protocol):
    """Exposes the next-subword distribution over a known vocabulary."""

    vocab: SubwordVocab

    def next_distribution(self, context: Sequence[int]) -> np.ndarray: ...


def generate(backend: TextBackend, prompt: str, params: SamplingParams = SamplingParams()) -> str:
    if not prompt:
        raise ValueError("prompt must be non-empty")
    return backend.generate(prompt, params)


def truncate_at_stop(text: str, stops: Sequence[str]) -> tuple[str, bool]:
    cut = min((i for i in (text.find(s) for s in stops if s) if i >= 0), default=-1)
    if cut < 0:
        return text, False
    return text[:cut], True
