"""The local subword n-gram model and word-level force decoding."""

# %%
import numpy as np

from lacuna.corpus import Document
from lacuna.decode import force_decode_word, predict_all, predict_restore, restore_banned_ids
from lacuna.lm import SamplingParams, generate, train_ngram
from lacuna.masking import MaskingConfig, generate_variants
from lacuna.synthetic import bigram_corpus

corpus = bigram_corpus(n_docs=40, seed=3)
model = train_ngram(corpus, order=3)
print(model)

# Words become at most 3-character subwords; "▁" marks a word start.
print(model.vocab.encode("szarru ina bitim"))
print([model.vocab.piece(i) for i in model.vocab.encode("szarru ina bitim")])

# %%
# next_distribution is a full probability vector over the subword vocabulary.
ctx = model.vocab.encode("ina")
p = model.next_distribution(ctx)
top = np.argsort(p)[::-1][:5]
print("sum", p.sum())
for i in top:
    print(f"  {model.vocab.piece(int(i)):>6}  {p[i]:.3f}")

# %%
# Free-form generation: greedy at temperature 0, seeded sampling otherwise.
print(generate(model, "ina", SamplingParams(temperature=0, max_new_tokens=8)))
print(generate(model, "ina", SamplingParams(temperature=0.8, max_new_tokens=8, seed=1)))

# %%
# Force decoding: best word-start subword, then continuations until the next
# word start.  [MASK], [UNK] and the unknown-word piece are never chosen.
banned = restore_banned_ids(model)
print(force_decode_word(model, ctx, banned))

# %%
doc = corpus[0]
variant = generate_variants(doc, MaskingConfig(seed=0, max_variants=1))[0]
print("gold     ", variant.gold)
print("restore  ", [r.predicted for r in predict_restore(model, variant)])
print("all      ", [r.predicted for r in predict_all(model, variant, params=SamplingParams(temperature=0))])

# A one-word document also works.
tiny = Document.from_words("t", "Akkadian", ["ina"])
print(predict_restore(model, generate_variants(tiny, MaskingConfig())[0])[0].predicted)
