"""Corpus ingestion, the dev split and masked variants.

Run with ``python demos/01_corpus_and_masking.py``.
"""

# %%
import io

from lacuna.corpus import SplitConfig, corpus_stats, ingest_tokens, iter_token_rows, split_dev
from lacuna.masking import MaskingConfig, generate_variants, mask_count
from lacuna.pipeline import bundled_corpus_path

# The bundled corpus is a token TSV: one row per word, keyed by (doc, line, word).
with open(bundled_corpus_path(), encoding="utf-8") as fh:
    corpus = ingest_tokens(iter_token_rows(fh))

stats = corpus_stats(corpus)
print(f"{stats.documents} documents, {stats.tokens} tokens")
print("per language:", dict(stats.language_tokens))
print("most common Akkadian word:", stats.most_common_word("Akkadian"))

# %%
# A seeded split keeps both halves in corpus order.
train, dev = split_dev(corpus, SplitConfig(dev_fraction=0.2, seed=13))
print(f"train {len(train)} / dev {len(dev)} documents")

# %%
# 15% of the words are masked, at least one, rounding halves up.
for n in (1, 3, 10, 20, 100):
    print(f"{n:>3} words -> {mask_count(n, 0.15)} masks")

# %%
# Up to 15 distinct variants per document, fewer when the combinations run out.
doc = dev[0]
variants = generate_variants(doc, MaskingConfig(seed=7))
print(f"{doc.doc_id}: {len(doc)} words, {len(variants)} variants")
for v in variants[:3]:
    print(f"  #{v.variant_id} positions={v.positions} gold={v.gold}")
    print("   ", v.text[:100])

# The gold words put back the original text.
assert all(v.restored_words() == doc.words for v in variants)

# %%
# Three tiny documents can only give as many variants as there are subsets.
from lacuna.corpus import Document

tiny = Document.from_words("tiny", "Akkadian", ["ina", "bitim", "wasib"])
print([v.positions for v in generate_variants(tiny, MaskingConfig())])

# TSV rows can also come from any text stream.
rows = "doc_id\tline_no\tword_index\tsurface\tlanguage\textras_json\nx\t0\t0\tlugal\tSumerian\t{}\n"
print(ingest_tokens(iter_token_rows(io.StringIO(rows))))
