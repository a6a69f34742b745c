"""Tokenization, vocabulary, dialogue joining, and corpus file I/O.

Dialogues are (context utterances, incomplete utterance, optional rewrite)
triples.  Context utterances are concatenated into a single token sequence
with a [SEP] token between consecutive utterances; the incomplete utterance
is appended after the context with no separator, and the boundary index
carries the split.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import NamedTuple

from .errors import CorpusError, EmptyInput

SEP = "[SEP]"
PAD = "[PAD]"
UNK = "[UNK]"

SEP_ID = 0
PAD_ID = 1
UNK_ID = 2

RESERVED = ((SEP_ID, SEP), (PAD_ID, PAD), (UNK_ID, UNK))


class Token(NamedTuple):
    surface: str
    id: int


@dataclass(frozen=True)
class DialogueExample:
    """One training or evaluation instance (token surfaces, not ids)."""

    context_utterances: tuple[tuple[str, ...], ...]
    incomplete: tuple[str, ...]
    rewrite: tuple[str, ...] | None = None

    def __post_init__(self):
        if not self.context_utterances:
            raise ValueError("example needs at least one context utterance")
        if not self.incomplete:
            raise ValueError("incomplete utterance must be non-empty")


@dataclass(frozen=True)
class JointSequence:
    """[SEP]-joined context followed by the incomplete utterance."""

    tokens: tuple[str, ...]
    boundary: int  # index where context ends and the incomplete utterance begins

    @property
    def context(self) -> tuple[str, ...]:
        return self.tokens[: self.boundary]

    @property
    def incomplete(self) -> tuple[str, ...]:
        return self.tokens[self.boundary :]

    def __len__(self) -> int:
        return len(self.tokens)


def tokenize(text: str, mode: str = "char") -> list[str]:
    """Split text into tokens: one Unicode character each in char mode
    (whitespace dropped), whitespace-delimited words in word mode."""
    if mode not in ("char", "word"):
        raise ValueError(f"unknown tokenization mode: {mode!r}")
    stripped = text.strip()
    if not stripped:
        raise EmptyInput("text is empty after trimming")
    if mode == "char":
        return [ch for ch in stripped if not ch.isspace()]
    return stripped.split()


def build_joint(example: DialogueExample) -> JointSequence:
    """Join context utterances with single [SEP]s (no leading/trailing [SEP])
    and append the incomplete utterance."""
    context: list[str] = []
    for i, utt in enumerate(example.context_utterances):
        if i > 0:
            context.append(SEP)
        context.extend(utt)
    tokens = tuple(context) + tuple(example.incomplete)
    return JointSequence(tokens=tokens, boundary=len(context))


@dataclass
class ParseFailure:
    line_no: int  # 1-based
    reason: str


def parse_example(obj: dict, mode: str) -> DialogueExample:
    context = obj.get("context")
    incomplete = obj.get("incomplete")
    if not isinstance(context, list) or not context:
        raise ValueError('"context" must be a non-empty array of strings')
    if not all(isinstance(u, str) for u in context):
        raise ValueError('"context" entries must be strings')
    if not isinstance(incomplete, str):
        raise ValueError('"incomplete" must be a string')
    rewrite = obj.get("rewrite")
    if rewrite is not None and not isinstance(rewrite, str):
        raise ValueError('"rewrite" must be a string when present')
    return DialogueExample(
        context_utterances=tuple(tuple(tokenize(u, mode)) for u in context),
        incomplete=tuple(tokenize(incomplete, mode)),
        rewrite=tuple(tokenize(rewrite, mode)) if rewrite is not None else None,
    )


def load_corpus(
    path, mode: str = "char", errors: list[ParseFailure] | None = None
) -> list[DialogueExample]:
    """Read a JSONL corpus.  Malformed lines are collected into `errors`
    (with 1-based line numbers) and skipped; the load only fails outright
    when the file is unreadable or every line is bad."""
    collected: list[ParseFailure] = [] if errors is None else errors
    examples: list[DialogueExample] = []
    n_lines = 0
    try:
        with open(path, encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                n_lines += 1
                try:
                    examples.append(parse_example(json.loads(line), mode))
                except (json.JSONDecodeError, ValueError, EmptyInput) as exc:
                    collected.append(ParseFailure(line_no, str(exc)))
    except OSError as exc:
        raise CorpusError(f"cannot read corpus {path}: {exc}") from exc
    if n_lines and not examples:
        raise CorpusError(f"all {n_lines} lines of {path} failed to parse")
    return examples


@dataclass
class Vocabulary:
    """Bijective surface <-> id mapping with fixed reserved ids."""

    mode: str = "char"
    _surface_to_id: dict[str, int] = field(default_factory=dict)
    _id_to_surface: list[str] = field(default_factory=list)

    def __post_init__(self):
        if not self._id_to_surface:
            for rid, surface in RESERVED:
                assert rid == len(self._id_to_surface)
                self._id_to_surface.append(surface)
                self._surface_to_id[surface] = rid

    def __len__(self) -> int:
        return len(self._id_to_surface)

    def add(self, surface: str) -> int:
        existing = self._surface_to_id.get(surface)
        if existing is not None:
            return existing
        new_id = len(self._id_to_surface)
        self._surface_to_id[surface] = new_id
        self._id_to_surface.append(surface)
        return new_id

    def id_of(self, surface: str) -> int:
        return self._surface_to_id.get(surface, UNK_ID)

    def surface_of(self, token_id: int) -> str:
        return self._id_to_surface[token_id]

    def encode(self, surfaces) -> list[int]:
        return [self.id_of(s) for s in surfaces]

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(f"#mode={self.mode}\n")
            for token_id, surface in enumerate(self._id_to_surface):
                fh.write(f"{token_id}\t{surface}\n")

    @classmethod
    def load(cls, path) -> "Vocabulary":
        vocab = None
        mode = "char"
        entries: list[tuple[int, str]] = []
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                line = line.rstrip("\n")
                if not line:
                    continue
                if line.startswith("#mode="):
                    mode = line[len("#mode=") :]
                    continue
                id_str, surface = line.split("\t", 1)
                entries.append((int(id_str), surface))
        vocab = cls(mode=mode)
        for token_id, surface in entries:
            if token_id < len(RESERVED):
                if vocab._id_to_surface[token_id] != surface:
                    raise CorpusError(f"reserved id {token_id} remapped in {path}")
                continue
            if token_id != len(vocab._id_to_surface):
                raise CorpusError(f"non-contiguous vocabulary ids in {path}")
            vocab._id_to_surface.append(surface)
            vocab._surface_to_id[surface] = token_id
        return vocab


def build_vocab(corpus: list[DialogueExample], mode: str = "char") -> Vocabulary:
    """Map every surface form in the corpus, in first-occurrence order,
    after the reserved ids."""
    if not corpus:
        raise CorpusError("cannot build a vocabulary from an empty corpus")
    vocab = Vocabulary(mode=mode)
    for example in corpus:
        for utt in example.context_utterances:
            for surface in utt:
                vocab.add(surface)
        for surface in example.incomplete:
            vocab.add(surface)
        if example.rewrite is not None:
            for surface in example.rewrite:
                vocab.add(surface)
    return vocab
