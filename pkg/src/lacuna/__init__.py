"""Masked-token restoration for transliterated cuneiform corpora."""

__version__ = "0.1.0"
