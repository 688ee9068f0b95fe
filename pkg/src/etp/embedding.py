"""Deterministic text embeddings for dataset generation.

Generation needs similarity rankings that are reproducible across machines
and runs, so the bundled provider is a seeded hashed bag-of-words: tokens are
hashed with blake2b (keyed by the seed) into a fixed number of signed buckets
and the result is L2-normalized. Any provider with the same interface can be
substituted.
"""

from __future__ import annotations

import hashlib
import re
from typing import Protocol, Sequence

import numpy as np

__all__ = [
    "EmbeddingError",
    "ZeroVector",
    "DimensionMismatch",
    "EmbeddingProvider",
    "HashedBagOfWords",
    "cosine_similarity",
]


class EmbeddingError(Exception):
    """Base class for embedding errors."""


class ZeroVector(EmbeddingError):
    """Cosine similarity is undefined for a zero-length vector."""


class DimensionMismatch(EmbeddingError):
    """The two vectors do not share a dimension."""


class EmbeddingProvider(Protocol):
    dim: int

    def embed(self, text: str) -> np.ndarray: ...


_TOKEN = re.compile(r"[a-z0-9]+")


class HashedBagOfWords:
    """64-dimensional seeded hashed bag-of-words with L2 normalization."""

    def __init__(self, dim: int = 64, seed: int = 0):
        if dim <= 0:
            raise EmbeddingError("dim must be positive")
        self.dim = dim
        self.seed = seed
        self._key = seed.to_bytes(8, "big", signed=True)

    def _bucket(self, token: str) -> tuple[int, int]:
        digest = hashlib.blake2b(token.encode("utf-8"), key=self._key, digest_size=8).digest()
        value = int.from_bytes(digest, "big")
        return value % self.dim, 1 if (value >> 63) & 1 == 0 else -1

    def embed(self, text: str) -> np.ndarray:
        vec = np.zeros(self.dim, dtype=np.float64)
        for token in _TOKEN.findall(text.lower()):
            index, sign = self._bucket(token)
            vec[index] += sign
        norm = float(np.linalg.norm(vec))
        if norm > 0.0:
            vec /= norm
        return vec


def cosine_similarity(a: Sequence[float] | np.ndarray, b: Sequence[float] | np.ndarray) -> float:
    """Cosine of the angle between two vectors.

    Raises DimensionMismatch for shape disagreement and ZeroVector when either
    vector has zero norm.
    """
    va = np.asarray(a, dtype=np.float64)
    vb = np.asarray(b, dtype=np.float64)
    if va.shape != vb.shape or va.ndim != 1:
        raise DimensionMismatch(f"shapes {va.shape} and {vb.shape} are incompatible")
    na = float(np.linalg.norm(va))
    nb = float(np.linalg.norm(vb))
    if na == 0.0 or nb == 0.0:
        raise ZeroVector("cosine similarity is undefined for zero vectors")
    return float(np.dot(va, vb) / (na * nb))
