"""Synthetic corpora for desk-scale runs and tests.

``bigram_corpus`` draws documents from a first-order Markov chain in which
every word has one strongly preferred successor, so a left-context model has
something to exploit.  ``planted_corpus`` fixes the share of one word.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from lacuna.corpus import Document, TokenRecord

AKKADIAN = (
    "ina", "a-na", "sza", "u3", "szarru", "bitu", "ilu", "mar", "szum-ma", "ul",
    "ana", "kima", "eqlu", "kaspu", "awilum", "ippusz", "iddin", "ilqe", "qibi-ma", "umma",
    "lu", "isz-pur", "dingir", "mu-sza", "e2-gal", "szamnu", "bel", "tuppu",
)
SUMERIAN = (
    "lugal", "e2", "dumu", "mu", "ki", "an", "ga2", "sze", "nin", "gal",
    "kur", "dub", "ensi2", "szu", "igi", "ba-an-dab5", "mu-na-du3", "nam", "en", "u4",
)


def _chain(vocab: Sequence[str], rng: np.random.Generator, strength: float) -> np.ndarray:
    n = len(vocab)
    trans = np.full((n, n), (1 - strength) / n)
    succ = rng.permutation(n)
    trans[np.arange(n), succ] += strength
    return trans / trans.sum(axis=1, keepdims=True)


def bigram_corpus(
    n_docs: int = 30,
    seed: int = 0,
    min_len: int = 15,
    max_len: int = 45,
    strength: float = 0.85,
    sumerian_share: float = 0.3,
) -> list[Document]:
    rng = np.random.default_rng(seed)
    chains = {
        "Akkadian": (AKKADIAN, _chain(AKKADIAN, rng, strength)),
        "Sumerian": (SUMERIAN, _chain(SUMERIAN, rng, strength)),
    }
    docs = []
    for i in range(n_docs):
        lang = "Sumerian" if rng.random() < sumerian_share else "Akkadian"
        vocab, trans = chains[lang]
        n = int(rng.integers(min_len, max_len + 1))
        state = int(rng.integers(len(vocab)))
        words = [vocab[state]]
        for _ in range(n - 1):
            state = int(rng.choice(len(vocab), p=trans[state]))
            words.append(vocab[state])
        docs.append(Document.from_words(f"syn{i:03d}", lang, words))
    return docs


def planted_corpus(
    n_docs: int = 200,
    word: str = "ina",
    share: float = 0.4,
    seed: int = 0,
    min_len: int = 5,
    max_len: int = 40,
    language: str = "Akkadian",
) -> list[Document]:
    """Documents where each token is ``word`` with probability ``share``."""
    rng = np.random.default_rng(seed)
    others = [w for w in AKKADIAN if w != word]
    docs = []
    for i in range(n_docs):
        n = int(rng.integers(min_len, max_len + 1))
        words = [word if rng.random() < share else others[int(rng.integers(len(others)))] for _ in range(n)]
        docs.append(Document.from_words(f"pl{i:04d}", language, words))
    return docs


def to_token_rows(docs: Sequence[Document], words_per_line: int = 8) -> list[TokenRecord]:
    """Token rows with a line break every ``words_per_line`` words."""
    rows = []
    for d in docs:
        for i, w in enumerate(d.words):
            line, idx = divmod(i, words_per_line)
            rows.append(TokenRecord(d.doc_id, line + 1, idx, w, d.language, {"source": "synthetic"}))
    return rows
