"""Edit-based (Levenshtein-style) refinement decoding and its diagnostics."""

__version__ = "0.1.0"
