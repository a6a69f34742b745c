"""Token encoders.

Production use plugs a real contextual encoder in behind the same
interface (`dim` attribute plus `encode(tokens) -> [L, dim] float32`).
Two deterministic encoders ship with the package: a per-surface hash
encoder, and a mock subword encoder that exercises the character-offset
mean-pooling alignment a real subword model needs.
"""

from __future__ import annotations

import hashlib

import numpy as np

from .text import SEP


class AlignmentError(Exception):
    """A token could not be matched to any subword piece."""


def _surface_vector(surface: str, dim: int, seed: int) -> np.ndarray:
    digest = hashlib.blake2b(f"{seed}:{surface}".encode("utf-8"), digest_size=8).digest()
    rng = np.random.default_rng(int.from_bytes(digest, "little"))
    return rng.standard_normal(dim).astype(np.float32)


class HashEncoder:
    """Context-free stand-in encoder: one fixed pseudo-random vector per
    surface form, stable across runs and machines."""

    def __init__(self, dim: int = 16, seed: int = 0):
        if dim < 1:
            raise ValueError("dim must be >= 1")
        self.dim = dim
        self.seed = seed
        self._cache: dict[str, np.ndarray] = {}

    def _vector(self, surface: str) -> np.ndarray:
        vec = self._cache.get(surface)
        if vec is None:
            vec = _surface_vector(surface, self.dim, self.seed)
            self._cache[surface] = vec
        return vec

    def encode(self, tokens: list[str]) -> np.ndarray:
        return np.stack([self._vector(t) for t in tokens])


class SubwordMeanPoolEncoder:
    """Mock subword encoder: splits token surfaces into single-character
    pieces with global character offsets, embeds each piece, and mean-pools
    the pieces back onto their owning token by offset range.  Characters
    outside `charset` (when given) are dropped by the piece tokenizer, so a
    token made entirely of unknown characters has no pieces and raises
    AlignmentError.  [SEP] gets a dedicated separator vector."""

    def __init__(self, dim: int = 16, seed: int = 0, charset: str | None = None):
        if dim < 1:
            raise ValueError("dim must be >= 1")
        self.dim = dim
        self.seed = seed
        self.charset = set(charset) if charset is not None else None
        self._sep = _surface_vector(SEP, dim, seed)

    def encode(self, tokens: list[str]) -> np.ndarray:
        # lay the non-separator surfaces out in one string and remember
        # each token's character range
        text_parts: list[str] = []
        ranges: list[tuple[int, int] | None] = []
        pos = 0
        for token in tokens:
            if token == SEP:
                ranges.append(None)
                continue
            text_parts.append(token)
            ranges.append((pos, pos + len(token)))
            pos += len(token)
        text = "".join(text_parts)

        piece_offsets = [
            i for i, ch in enumerate(text) if self.charset is None or ch in self.charset
        ]
        piece_vectors = np.stack(
            [_surface_vector(text[i], self.dim, self.seed) for i in piece_offsets]
        ) if piece_offsets else np.zeros((0, self.dim), dtype=np.float32)

        rows = np.empty((len(tokens), self.dim), dtype=np.float32)
        for idx, span in enumerate(ranges):
            if span is None:
                rows[idx] = self._sep
                continue
            start, end = span
            members = [k for k, off in enumerate(piece_offsets) if start <= off < end]
            if not members:
                raise AlignmentError(
                    f"token {idx} ({tokens[idx]!r}) has no subword pieces"
                )
            rows[idx] = piece_vectors[members].mean(axis=0)
        return rows
