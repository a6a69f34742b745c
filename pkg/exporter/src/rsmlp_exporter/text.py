"""Tokenization mirroring the core pipeline.

The exporter must produce exactly one vector per token of the joint
sequence the core builds for the same corpus line: context utterances
joined with a single [SEP] between consecutive utterances, then the
incomplete utterance with no separator.
"""

from __future__ import annotations

SEP = "[SEP]"


def tokenize(text: str, mode: str = "char") -> list[str]:
    """One Unicode character per token in char mode (whitespace dropped),
    whitespace-delimited words in word mode."""
    if mode not in ("char", "word"):
        raise ValueError(f"unknown tokenization mode: {mode!r}")
    stripped = text.strip()
    if not stripped:
        raise ValueError("text is empty after trimming")
    if mode == "char":
        return [ch for ch in stripped if not ch.isspace()]
    return stripped.split()


def parse_line(obj: dict, mode: str) -> list[str]:
    """Validate one corpus record and return its joint token sequence."""
    context = obj.get("context")
    incomplete = obj.get("incomplete")
    if not isinstance(context, list) or not context:
        raise ValueError('"context" must be a non-empty array of strings')
    if not all(isinstance(u, str) for u in context):
        raise ValueError('"context" entries must be strings')
    if not isinstance(incomplete, str):
        raise ValueError('"incomplete" must be a string')
    tokens: list[str] = []
    for i, utterance in enumerate(context):
        if i > 0:
            tokens.append(SEP)
        tokens.extend(tokenize(utterance, mode))
    tokens.extend(tokenize(incomplete, mode))
    return tokens
