"""Offline embedding exporter for the rsmlp "precomputed" encoder kind."""

from .encoders import AlignmentError, HashEncoder, SubwordMeanPoolEncoder
from .export import SIDECAR_SUFFIX, ExportSummary, export
from .rsme import write_rsme
from .text import SEP, parse_line, tokenize

__all__ = [
    "AlignmentError",
    "HashEncoder",
    "SubwordMeanPoolEncoder",
    "ExportSummary",
    "SIDECAR_SUFFIX",
    "export",
    "write_rsme",
    "SEP",
    "parse_line",
    "tokenize",
]
