"""Edit supervision and edit application.

Gold rewrites are turned into token-level edit matrices by aligning the
incomplete utterance with the rewrite through their longest common
subsequence: rewrite-only tokens become [ADD] spans, incomplete-only tokens
become [DEL] spans, and an [ADD] co-located with a [DEL] is a substitution
while a lone [ADD] is an insertion.  Added tokens are sourced from the
dialogue context by contiguous-subsequence search (most recent occurrence
preferred); tokens with no contiguous context occurrence are dropped from
supervision and the example is flagged lossy.

The matrix is M x (N+1): one row per context token, one column per
incomplete-utterance token plus an end-sentinel column for appends.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

from .errors import MalformedProgram, MissingGold
from .text import SEP, DialogueExample, JointSequence


class EditLabel(IntEnum):
    NONE = 0
    SUBSTITUTE = 1
    INSERT = 2


@dataclass(frozen=True)
class EditMatrix:
    labels: np.ndarray  # int8 [M, N+1]
    lossy: bool
    dropped_tokens: int

    @property
    def shape(self) -> tuple[int, int]:
        return self.labels.shape


@dataclass(frozen=True)
class DiffSpan:
    side: str  # "incomplete" | "rewrite"
    tag: str  # "[DEL]" | "[ADD]"
    start: int  # token index range, end exclusive
    end: int
    slot: int  # number of LCS anchors strictly before the span


@dataclass
class ColumnEdits:
    inserts: list[tuple[int, int]] = field(default_factory=list)
    substitutes: list[tuple[int, int]] = field(default_factory=list)


@dataclass
class EditProgram:
    """Span-level operations per anchor column; the executable form of an
    edit matrix.  Column N (the sentinel) may only carry inserts."""

    columns: dict[int, ColumnEdits] = field(default_factory=dict)

    def column(self, n: int) -> ColumnEdits:
        return self.columns.setdefault(n, ColumnEdits())

    def is_empty(self) -> bool:
        return all(not c.inserts and not c.substitutes for c in self.columns.values())


def lcs(a, b) -> list[tuple[int, int]]:
    """Aligned index pairs of one longest common subsequence, strictly
    increasing in both coordinates.  Ties broken by the standard backtrace
    preferring match, then skipping an a-token, for determinism."""
    m, n = len(a), len(b)
    table = np.zeros((m + 1, n + 1), dtype=np.int32)
    for i in range(1, m + 1):
        ai = a[i - 1]
        row = table[i]
        prev = table[i - 1]
        for j in range(1, n + 1):
            if ai == b[j - 1]:
                row[j] = prev[j - 1] + 1
            else:
                row[j] = max(prev[j], row[j - 1])
    pairs: list[tuple[int, int]] = []
    i, j = m, n
    while i > 0 and j > 0:
        if a[i - 1] == b[j - 1]:
            pairs.append((i - 1, j - 1))
            i -= 1
            j -= 1
        elif table[i - 1][j] >= table[i][j - 1]:
            i -= 1
        else:
            j -= 1
    pairs.reverse()
    return pairs


def _spans_of_side(length: int, anchors: list[int], side: str, tag: str) -> list[DiffSpan]:
    anchor_set = set(anchors)
    spans: list[DiffSpan] = []
    pos = 0
    while pos < length:
        if pos in anchor_set:
            pos += 1
            continue
        start = pos
        while pos < length and pos not in anchor_set:
            pos += 1
        slot = sum(1 for a in anchors if a < start)
        spans.append(DiffSpan(side=side, tag=tag, start=start, end=pos, slot=slot))
    return spans


def diff_spans(x, y) -> list[DiffSpan]:
    """Merge non-LCS tokens into [DEL] spans (on x) and [ADD] spans (on y),
    each carrying its slot so spans in the same slot are pairable."""
    pairs = lcs(x, y)
    x_anchors = [i for i, _ in pairs]
    y_anchors = [j for _, j in pairs]
    spans = _spans_of_side(len(x), x_anchors, "incomplete", "[DEL]")
    spans += _spans_of_side(len(y), y_anchors, "rewrite", "[ADD]")
    return spans


def _find_rightmost(needle, context, max_end: int | None = None) -> int | None:
    """Start index of the rightmost contiguous occurrence of needle, or None."""
    k = len(needle)
    limit = len(context) if max_end is None else max_end
    for start in range(limit - k, -1, -1):
        if list(context[start : start + k]) == list(needle):
            return start
    return None


def source_spans(tokens, context) -> tuple[list[tuple[int, int]], int]:
    """Decompose tokens into contiguous context occurrences: greedily take
    the longest sourceable prefix (rightmost occurrence), drop tokens with
    no occurrence at all.  Returns (ranges, dropped count)."""
    ranges: list[tuple[int, int]] = []
    dropped = 0
    pos = 0
    while pos < len(tokens):
        found = None
        for length in range(min(len(tokens) - pos, len(context)), 0, -1):
            start = _find_rightmost(tokens[pos : pos + length], context)
            if start is not None:
                found = (start, start + length)
                break
        if found is None:
            dropped += 1
            pos += 1
        else:
            ranges.append(found)
            pos += found[1] - found[0]
    return ranges, dropped


def derive_edit_matrix(example: DialogueExample, joint: JointSequence) -> EditMatrix:
    """Label the M x (N+1) grid from the gold rewrite (see module docstring)."""
    if example.rewrite is None:
        raise MissingGold("example has no gold rewrite")
    x = joint.incomplete
    context = joint.context
    boundary = joint.boundary
    n = len(x)
    y = example.rewrite
    grid = np.zeros((boundary, n + 1), dtype=np.int8)

    pairs = lcs(x, y)
    x_anchors = [i for i, _ in pairs]
    spans = diff_spans(x, y)
    del_by_slot = {s.slot: s for s in spans if s.tag == "[DEL]"}
    add_by_slot = {s.slot: s for s in spans if s.tag == "[ADD]"}

    dropped = 0
    for slot, add in sorted(add_by_slot.items()):
        tokens = y[add.start : add.end]
        ranges, miss = source_spans(tokens, context)
        dropped += miss
        paired = del_by_slot.get(slot)
        if paired is not None:
            for cs, ce in ranges:
                grid[cs:ce, paired.start : paired.end] = EditLabel.SUBSTITUTE
        else:
            col = x_anchors[slot] if slot < len(x_anchors) else n
            for cs, ce in ranges:
                grid[cs:ce, col] = EditLabel.INSERT
    # Pure deletions have no label in the {None, Substitute, Insert} space;
    # count the inexpressible tokens so the example is flagged lossy.
    for slot, dele in del_by_slot.items():
        if slot not in add_by_slot:
            dropped += dele.end - dele.start

    return EditMatrix(labels=grid, lossy=dropped > 0, dropped_tokens=dropped)


def extract_program(labels: np.ndarray) -> EditProgram:
    """Read maximal contiguous same-label row runs out of each column."""
    labels = np.asarray(labels)
    m, cols = labels.shape
    program = EditProgram()
    for n in range(cols):
        column = labels[:, n]
        row = 0
        while row < m:
            label = column[row]
            if label == EditLabel.NONE:
                row += 1
                continue
            start = row
            while row < m and column[row] == label:
                row += 1
            if label == EditLabel.SUBSTITUTE:
                if n == cols - 1:
                    continue  # sentinel column carries inserts only
                program.column(n).substitutes.append((start, row))
            else:
                program.column(n).inserts.append((start, row))
    return program


def encode_program(program: EditProgram, m: int, n: int) -> np.ndarray:
    """Paint program spans back into an M x (N+1) label grid."""
    grid = np.zeros((m, n + 1), dtype=np.int8)
    for col, edits in program.columns.items():
        for cs, ce in edits.inserts:
            grid[cs:ce, col] = EditLabel.INSERT
        for cs, ce in edits.substitutes:
            grid[cs:ce, col] = EditLabel.SUBSTITUTE
    return grid


def apply_edits(x, program: EditProgram, context) -> list[str]:
    """Execute an edit program against the incomplete utterance, copying
    source tokens from the context.  [SEP] tokens are never emitted."""
    n = len(x)
    m = len(context)
    sub_cols = set()
    for col, edits in program.columns.items():
        if col < 0 or col > n:
            raise MalformedProgram(f"column {col} outside [0, {n}]")
        for cs, ce in edits.inserts + edits.substitutes:
            if cs < 0 or ce > m or cs >= ce:
                raise MalformedProgram(f"source span [{cs}, {ce}) outside context")
        if edits.substitutes:
            if col == n:
                raise MalformedProgram("sentinel column cannot carry substitutions")
            sub_cols.add(col)

    def emit(out: list[str], cs: int, ce: int) -> None:
        out.extend(t for t in context[cs:ce] if t != SEP)

    out: list[str] = []
    for col in range(n):
        edits = program.columns.get(col)
        if edits is not None:
            for cs, ce in edits.inserts:
                emit(out, cs, ce)
        if col in sub_cols:
            if col - 1 not in sub_cols:  # first column of a substituted run
                for cs, ce in program.columns[col].substitutes:
                    emit(out, cs, ce)
            continue  # the run's own x tokens are replaced
        out.append(x[col])
    tail = program.columns.get(n)
    if tail is not None:
        for cs, ce in tail.inserts:
            emit(out, cs, ce)
    return out


def cells_json(matrix: EditMatrix) -> dict:
    """JSON-ready record for the derive-labels CLI: non-None cells only."""
    short = {EditLabel.SUBSTITUTE: "S", EditLabel.INSERT: "I"}
    cells = [
        [int(mm), int(nn), short[EditLabel(matrix.labels[mm, nn])]]
        for mm, nn in zip(*np.nonzero(matrix.labels))
    ]
    return {"cells": cells, "lossy": matrix.lossy, "dropped": matrix.dropped_tokens}
