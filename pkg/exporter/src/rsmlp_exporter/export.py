"""Corpus-to-RSME export job."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .encoders import AlignmentError
from .rsme import write_rsme
from .text import parse_line

SIDECAR_SUFFIX = ".errors.jsonl"


@dataclass
class ExportSummary:
    exported: int = 0  # records with real vectors
    zeroed: int = 0  # records written as zeros after alignment failure
    failed: int = 0  # sidecar entries (parse or alignment failures)
    dim: int = 0


def export(corpus_path, output_path, encoder, mode: str = "char") -> ExportSummary:
    """Run the encoder over every corpus line and write one RSME record per
    parseable example, in corpus order.

    Alignment failures keep their record (zeros, correct L) so downstream
    ordinals stay aligned; lines that do not parse cannot yield an L and
    get a sidecar entry only.  The sidecar ({ordinal, reason} JSONL at
    output_path + ".errors.jsonl") is always written, empty on success.
    """
    summary = ExportSummary(dim=encoder.dim)
    records: list[tuple[int, np.ndarray]] = []
    errors: list[dict] = []
    ordinal = 0
    with open(corpus_path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            try:
                tokens = parse_line(json.loads(line), mode)
            except (json.JSONDecodeError, ValueError) as exc:
                errors.append({"ordinal": ordinal, "reason": str(exc)})
                summary.failed += 1
                ordinal += 1
                continue
            try:
                array = encoder.encode(tokens)
                if array.shape != (len(tokens), encoder.dim):
                    raise AlignmentError(
                        f"encoder returned shape {array.shape}, "
                        f"expected ({len(tokens)}, {encoder.dim})"
                    )
                records.append((ordinal, array.astype(np.float32)))
                summary.exported += 1
            except AlignmentError as exc:
                records.append((ordinal, np.zeros((len(tokens), encoder.dim), np.float32)))
                errors.append({"ordinal": ordinal, "reason": str(exc)})
                summary.zeroed += 1
                summary.failed += 1
            ordinal += 1

    write_rsme(output_path, records)
    with open(f"{output_path}{SIDECAR_SUFFIX}", "w", encoding="utf-8") as fh:
        for entry in errors:
            fh.write(json.dumps(entry, ensure_ascii=False) + "\n")
    return summary
