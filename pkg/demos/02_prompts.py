"""The three prompt formats: All, One by one and Restore."""

# %%
from lacuna.corpus import Document
from lacuna.masking import MaskingConfig, generate_variants
from lacuna.prompts import Method, build_prompts

doc = Document.from_words("demo", "Akkadian", "a-na be-li2-ia qi2-bi2-ma um-ma ib-ni-{d}marduk ARAD-ka-a-ma".split())
variant = generate_variants(doc, MaskingConfig(mask_rate=0.3, seed=1, max_variants=1))[0]
print("gold:", variant.gold)

# %%
# All: one prompt, the model lists every missing word.
(p,) = build_prompts(Method.ALL, variant)
print(p.text, end="\n\n")

# %%
# One by one: one prompt per mask; the other masks are hidden as [UNK] so
# earlier guesses never leak into later ones.
for p in build_prompts(Method.ONE_BY_ONE, variant):
    print(f"target {p.target_position}:")
    print(p.text, end="\n\n")

# %%
# Restore: the model rewrites the document; decoding is constrained to one
# word per mask (see 03_ngram_and_restore.py).
(p,) = build_prompts(Method.RESTORE, variant)
print(p.text)
