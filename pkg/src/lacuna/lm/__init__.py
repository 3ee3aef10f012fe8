"""Language-model backends: a local subword n-gram model and a remote chat client."""

from lacuna.lm.base import (
    BackendError,
    ProtocolError,
    SamplingParams,
    ScoredBackend,
    TextBackend,
    generate,
)
from lacuna.lm.ngram import NgramModel, train_ngram
from lacuna.lm.remote import RemoteBackend, RemoteBackendConfig, remote_complete
from lacuna.lm.vocab import SubwordVocab, split_word

__all__ = [
    "BackendError",
    "NgramModel",
    "ProtocolError",
    "RemoteBackend",
    "RemoteBackendConfig",
    "SamplingParams",
    "ScoredBackend",
    "SubwordVocab",
    "TextBackend",
    "generate",
    "remote_complete",
    "split_word",
    "train_ngram",
]
