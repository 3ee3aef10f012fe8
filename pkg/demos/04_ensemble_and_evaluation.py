"""Majority voting, accuracy, the most-common-word baseline and the report tables."""

# %%
import random

from lacuna.decode import PredictionRecord
from lacuna.ensemble import VoteConfig, majority_vote
from lacuna.evaluation import (
    accuracy,
    format_accuracy_table,
    frequency_report,
    most_common_word_baseline,
    ranked_report,
)
from lacuna.masking import MaskingConfig, mask_corpus
from lacuna.prompts import Method
from lacuna.synthetic import planted_corpus

docs = planted_corpus(n_docs=120, share=0.4, seed=2)
train, dev = docs[:100], docs[100:]
variants = list(mask_corpus(dev, MaskingConfig(seed=5)))

# %%
# Twelve noisy "systems", each right about a third of the time.
rng = random.Random(0)
vocab = sorted({w for d in train for w in d.words})
runs = []
for s in range(12):
    runs.append(
        [
            PredictionRecord(f"sys{s}", Method.ALL, v.doc_id, v.variant_id, p, g if rng.random() < 0.35 else rng.choice(vocab))
            for v in variants
            for p, g in zip(v.positions, v.gold)
        ]
    )
single = [accuracy(r, variants).accuracy for r in runs]
print("single systems:", " ".join(f"{a:.3f}" for a in single))

# %%
ranked = majority_vote(runs, VoteConfig(top_k=3))
vote = ranked_report(ranked, variants, k=3)
base = most_common_word_baseline(train, variants)
print(f"vote top-1 {vote.accuracy:.3f}, top-3 {vote.topk_accuracy:.3f}, baseline {base.accuracy:.3f}")
print("first key:", ranked[0].key, ranked[0].ranked)

# %%
table = format_accuracy_table(
    {(Method.ALL, f"sys{i}"): single[i] for i in range(3)},
    ["sys0", "sys1", "sys2"],
    majority=(vote.accuracy, vote.topk_accuracy),
    baseline=base.accuracy,
)
print(table)

# %%
freq = frequency_report((g for v in variants for g in v.gold), top_n=5)
print(f"{freq.unique} unique gold words")
for word, f in freq.rows:
    print(f"  {word:<10}{f:.3f}")
