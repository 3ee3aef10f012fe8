"""Prompt templates for the three restoration methods."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Any, Optional

from lacuna.corpus import MASK, UNK
from lacuna.masking import MaskedVariant


class Method(str, enum.Enum):
    ALL = "all"
    ONE_BY_ONE = "one-by-one"
    RESTORE = "restore"


TEMPLATE_ALL = (
    'Fill in the missing {language} words, masked by the [MASK] token. '
    'Output "WORDS:" and a comma-separated list of the missing words in original '
    '{language}: {masked_document}'
)
TEMPLATE_ONE_BY_ONE = "Fill in the missing {language} word masked by the [MASK] token: {masked_document_with_unks}"
TEMPLATE_RESTORE = (
    "Complete the missing {language} words masked by the [MASK] tokens and print out "
    "the restored document: {masked_document}"
)


@dataclass(frozen=True)
class PromptInstance:
    method: Method
    doc_id: str
    variant_id: int
    text: str
    target_position: Optional[int] = None

    def to_json(self) -> dict[str, Any]:
        return {
            "method": self.method.value,
            "doc_id": self.doc_id,
            "variant_id": self.variant_id,
            "target_position": self.target_position,
            "text": self.text,
        }


def _require_masks(variant: MaskedVariant) -> None:
    if variant.k < 1:
        raise ValueError(f"variant {variant.doc_id}/{variant.variant_id} has no masked positions")


def build_prompt_all(variant: MaskedVariant, language: str | None = None) -> PromptInstance:
    _require_masks(variant)
    text = TEMPLATE_ALL.format(language=language or variant.language, masked_document=variant.text)
    return PromptInstance(Method.ALL, variant.doc_id, variant.variant_id, text)


def build_prompts_one_by_one(
    variant: MaskedVariant, language: str | None = None, unk: str = UNK, mask: str = MASK
) -> list[PromptInstance]:
    """One prompt per masked position; every other masked slot shows ``[UNK]``."""
    _require_masks(variant)
    language = language or variant.language
    out = []
    for target in variant.positions:
        words = list(variant.masked_words)
        for p in variant.positions:
            words[p] = mask if p == target else unk
        text = TEMPLATE_ONE_BY_ONE.format(language=language, masked_document_with_unks=" ".join(words))
        out.append(PromptInstance(Method.ONE_BY_ONE, variant.doc_id, variant.variant_id, text, target))
    return out


def build_prompt_restore(variant: MaskedVariant, language: str | None = None) -> PromptInstance:
    _require_masks(variant)
    text = TEMPLATE_RESTORE.format(language=language or variant.language, masked_document=variant.text)
    return PromptInstance(Method.RESTORE, variant.doc_id, variant.variant_id, text)


def build_prompts(method: Method | str, variant: MaskedVariant, language: str | None = None) -> list[PromptInstance]:
    method = Method(method)
    if method is Method.ALL:
        return [build_prompt_all(variant, language)]
    if method is Method.ONE_BY_ONE:
        return build_prompts_one_by_one(variant, language)
    return [build_prompt_restore(variant, language)]
