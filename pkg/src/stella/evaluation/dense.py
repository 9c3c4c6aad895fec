"""Exact dense retrieval by cosine similarity (no approximate index)."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from ..errors import DimensionMismatch
from ..gateway import EmbeddingVector, Gateway


def dense_retrieve(
    embedder: Gateway,
    corpus_vectors: Sequence[tuple[str, EmbeddingVector]],
    query: str,
    cutoff: int = 10,
) -> list[tuple[str, float]]:
    """Exact top-`cutoff` by cosine; ties break by passage_id ascending."""
    [query_vector] = embedder.embed([query])
    return rank_by_cosine(query_vector, corpus_vectors, cutoff)


def rank_by_cosine(
    query_vector: EmbeddingVector,
    corpus_vectors: Sequence[tuple[str, EmbeddingVector]],
    cutoff: int = 10,
) -> list[tuple[str, float]]:
    if not corpus_vectors:
        return []
    dims = {v.dim for _, v in corpus_vectors}
    if len(dims) != 1 or query_vector.dim not in dims:
        raise DimensionMismatch(
            f"query dim {query_vector.dim} vs corpus dims {sorted(dims)}"
        )
    ids = [pid for pid, _ in corpus_vectors]
    matrix = np.asarray([v.values for _, v in corpus_vectors], dtype=np.float64)
    matrix = matrix / np.linalg.norm(matrix, axis=1, keepdims=True)
    q = np.asarray(query_vector.values, dtype=np.float64)
    q = q / np.linalg.norm(q)
    sims = matrix @ q
    order = sorted(range(len(ids)), key=lambda i: (-sims[i], ids[i]))
    return [(ids[i], float(sims[i])) for i in order[:cutoff]]
