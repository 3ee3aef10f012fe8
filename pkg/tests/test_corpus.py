import io
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lacuna.corpus import (
    Document,
    IngestError,
    SplitConfig,
    SplitConfigError,
    TokenRecord,
    corpus_stats,
    dev_cut,
    ingest_tokens,
    iter_token_rows,
    read_corpus,
    split_dev,
    write_corpus,
    write_token_tsv,
    read_token_tsv,
)

HEADER = "doc_id\tline_no\tword_index\tsurface\tlanguage\textras_json\n"


def test_empty_stream_gives_empty_corpus():
    assert ingest_tokens([]) == []


def test_shuffled_rows_are_reordered_by_line_and_index():
    rows = [
        TokenRecord("B", 1, 0, "lugal", "Sumerian"),
        TokenRecord("A", 2, 0, "bitim", "Akkadian"),
        TokenRecord("A", 1, 1, "szarru", "Akkadian"),
        TokenRecord("B", 0, 3, "e2", "Sumerian"),
        TokenRecord("A", 1, 0, "ina", "Akkadian"),
    ]
    docs = ingest_tokens(rows)
    # hand-sorted expectation
    assert [d.doc_id for d in docs] == ["B", "A"]
    assert docs[0].words == ("e2", "lugal")
    assert docs[1].words == ("ina", "szarru", "bitim")
    assert docs[1].line_starts == (0, 2)
    assert sum(len(d) for d in docs) == len(rows)


def test_duplicate_key_is_named():
    rows = [TokenRecord("A", 0, 0, "a", "Akkadian"), TokenRecord("A", 0, 0, "b", "Akkadian")]
    with pytest.raises(IngestError, match=r"\('A', 0, 0\)"):
        ingest_tokens(rows)


def test_language_conflict():
    rows = [TokenRecord("A", 0, 0, "a", "Akkadian"), TokenRecord("A", 0, 1, "b", "Sumerian")]
    with pytest.raises(IngestError, match="conflicts"):
        ingest_tokens(rows)


@pytest.mark.parametrize(
    "line, msg",
    [
        ("A\t0\t0\tina\tAkkadian\n", "expected 6 fields"),
        ("A\tx\t0\tina\tAkkadian\t\n", "integers"),
        ("A\t0\t-1\tina\tAkkadian\t\n", "non-negative"),
        ("A\t0\t0\t[MASK]\tAkkadian\t\n", "reserved"),
        ("A\t0\t0\tina\tAkkadian\t[1]\n", "object"),
        ("A\t0\t0\t\tAkkadian\t\n", "empty surface"),
    ],
)
def test_malformed_rows_report_line_number(line, msg):
    good = "A\t0\t0\tina\tAkkadian\t\n"
    fh = io.StringIO(HEADER + good + line)
    with pytest.raises(IngestError, match=f"line 3: .*{msg}"):
        list(iter_token_rows(fh))


def test_bad_header():
    with pytest.raises(IngestError, match="header"):
        list(iter_token_rows(io.StringIO("a\tb\n")))


def test_extras_are_carried(tmp_path):
    fh = io.StringIO(HEADER + 'A\t0\t0\tina\tAkkadian\t{"genre": "letter"}\n')
    (doc,) = ingest_tokens(iter_token_rows(fh))
    assert doc.extras[0] == {"genre": "letter"}
    write_corpus(tmp_path / "c.jsonl", [doc])
    assert read_corpus(tmp_path / "c.jsonl") == [doc]


surfaces = st.text(alphabet="abcdeghiklmnpqrstuwz0123456789-", min_size=1, max_size=8)


@st.composite
def token_rows(draw):
    n_docs = draw(st.integers(1, 5))
    rows = []
    for d in range(n_docs):
        lang = draw(st.sampled_from(["Akkadian", "Sumerian"]))
        keys = draw(st.sets(st.tuples(st.integers(0, 6), st.integers(0, 9)), min_size=1, max_size=12))
        for ln, wi in keys:
            extras = draw(st.dictionaries(st.sampled_from(["genre", "site"]), st.text(max_size=4), max_size=2))
            rows.append(TokenRecord(f"d{d}", ln, wi, draw(surfaces), lang, extras))
    random.Random(draw(st.integers(0, 1000))).shuffle(rows)
    return rows


@settings(max_examples=60, deadline=None)
@given(token_rows())
def test_round_trip_rows(rows):
    docs = ingest_tokens(rows)
    back = [r for d in docs for r in d.token_records()]
    assert sorted(back, key=lambda r: r.key) == sorted(rows, key=lambda r: r.key)
    assert sum(len(d) for d in docs) == len(rows)


@settings(max_examples=20, deadline=None)
@given(token_rows())
def test_round_trip_through_tsv(tmp_path_factory, rows):
    path = tmp_path_factory.mktemp("tsv") / "rows.tsv"
    write_token_tsv(path, rows)
    assert ingest_tokens(read_token_tsv(path)) == ingest_tokens(rows)


def _docs(lengths):
    return [Document.from_words(f"d{i}", "Akkadian", ["w"] * n) for i, n in enumerate(lengths)]


def test_dev_cut_matches_reported_split_size():
    assert dev_cut(22777, 0.01) == 227


def test_split_filters_single_word_docs():
    train, dev = split_dev(_docs([1] * 10), SplitConfig(0.2, seed=3))
    assert dev == [] and len(train) == 10


def test_split_is_deterministic():
    corpus = _docs(random.Random(0).choices(range(1, 30), k=100))
    a = split_dev(corpus, SplitConfig(0.1, seed=7))
    b = split_dev(corpus, SplitConfig(0.1, seed=7))
    assert a == b
    assert len(a[1]) <= 10


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(1, 6), min_size=1, max_size=60), st.integers(0, 2**32), st.floats(0.05, 0.95))
def test_split_partitions(lengths, seed, frac):
    corpus = _docs(lengths)
    if dev_cut(len(corpus), frac) < 1:
        with pytest.raises(SplitConfigError):
            split_dev(corpus, SplitConfig(frac, seed))
        return
    train, dev = split_dev(corpus, SplitConfig(frac, seed))
    ids = [d.doc_id for d in train] + [d.doc_id for d in dev]
    assert sorted(ids) == sorted(d.doc_id for d in corpus)
    assert all(len(d) >= 2 for d in dev)
    assert len(dev) <= dev_cut(len(corpus), frac)


@pytest.mark.parametrize("frac", [0.0, 1.0, -0.5, 2])
def test_split_rejects_bad_fraction(frac):
    with pytest.raises(SplitConfigError):
        SplitConfig(frac)


def test_stats():
    stats = corpus_stats([Document.from_words("x", "Akkadian", "a b a".split())])
    assert stats.documents == 1 and stats.tokens == 3
    assert dict(stats.frequencies["Akkadian"]) == {"a": 2, "b": 1}
    empty = corpus_stats([])
    assert (empty.documents, empty.tokens, dict(empty.language_tokens)) == (0, 0, {})


def test_most_common_word_tie_is_lexicographic():
    stats = corpus_stats([Document.from_words("x", "Akkadian", "u3 ina u3 ina".split())])
    assert stats.most_common_word("Akkadian") == "ina"


def test_bundled_corpus_ingests():
    from lacuna.pipeline import bundled_corpus_path

    docs = ingest_tokens(read_token_tsv(bundled_corpus_path()))
    assert len(docs) == 30
    assert {d.language for d in docs} == {"Akkadian", "Sumerian"}
