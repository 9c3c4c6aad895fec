"""Recursive token chunking of document text into overlapping passages.

The splitter works in token space.  Phase 1 recursively splits the token
sequence into pieces no larger than ``chunk_size``, trying each separator of
the hierarchy in order (paragraph break, line break, sentence end, word
boundary) and descending a level only for pieces that are still too large.
Phase 2 assembles chunks: each chunk extends to the rightmost piece boundary
that fits in the current window (a full window when no boundary lands in it),
and the next chunk starts exactly ``overlap`` tokens before the previous end.
The overlap is skipped only when a piece is so short that carrying it back
would stall progress.

Consequences, which the tests pin down:

* every chunk measures at most ``chunk_size`` tokens (the sole exception is a
  single indivisible token heavier than ``chunk_size`` under a weighted
  tokenizer, which is emitted alone and logged);
* consecutive chunks share exactly ``overlap`` tokens, so dropping the first
  ``overlap`` tokens of every chunk after the first reproduces the document
  token sequence;
* chunking is a pure function of (text, config, tokenizer).
"""

from __future__ import annotations

import bisect
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable

from .errors import EmptyDocument
from .ingest import DocumentRecord
from .storage import read_jsonl, write_jsonl
from .tokenization import DEFAULT_TOKENIZER, Token, Tokenizer, normalize_text

log = logging.getLogger(__name__)

DEFAULT_SEPARATORS = ("\n\n", "\n", ". ", " ", "")


@dataclass
class ChunkConfig:
    chunk_size: int = 100
    overlap: int = 20
    separator_hierarchy: tuple[str, ...] = DEFAULT_SEPARATORS

    def __post_init__(self):
        if self.chunk_size < 1:
            raise ValueError("chunk_size must be positive")
        if not 0 <= self.overlap < self.chunk_size:
            raise ValueError("overlap must satisfy 0 <= overlap < chunk_size")


@dataclass(frozen=True)
class Passage:
    passage_id: str
    doc_id: str
    ordinal: int
    text: str
    token_count: int

    def to_dict(self) -> dict[str, Any]:
        return {
            "passage_id": self.passage_id,
            "doc_id": self.doc_id,
            "ordinal": self.ordinal,
            "text": self.text,
            "token_count": self.token_count,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "Passage":
        return cls(
            passage_id=d["passage_id"],
            doc_id=d["doc_id"],
            ordinal=int(d["ordinal"]),
            text=d["text"],
            token_count=int(d["token_count"]),
        )


def _gap_matches(sep: str, prev: Token, gap: str) -> bool:
    if sep == " ":
        return gap != ""
    if not sep.strip():
        return sep in gap
    head = sep.rstrip()
    return gap != "" and (prev.text == head or prev.text.endswith(head))


def _boundary_positions(tokens: list[Token], text: str, sep: str) -> list[int]:
    """Token positions p where separator `sep` occurs between p-1 and p."""
    out = []
    for p in range(1, len(tokens)):
        gap = text[tokens[p - 1].end:tokens[p].start]
        if _gap_matches(sep, tokens[p - 1], gap):
            out.append(p)
    return out


def _split_pieces(
    lo: int,
    hi: int,
    level: int,
    cfg: ChunkConfig,
    weight_at: list[int],
    boundaries_by_level: list[list[int]],
) -> list[tuple[int, int]]:
    """Recursively split [lo, hi) into pieces of weight <= chunk_size."""

    def weight(a: int, b: int) -> int:
        return weight_at[b] - weight_at[a]

    if weight(lo, hi) <= cfg.chunk_size:
        return [(lo, hi)]
    if level >= len(boundaries_by_level):
        # no separator left: hard-cut; a lone over-heavy token stays whole
        if hi - lo == 1:
            log.warning("degenerate token of weight %d exceeds chunk_size", weight(lo, hi))
            return [(lo, hi)]
        pieces = []
        start = lo
        while start < hi:
            limit = weight_at[start] + cfg.chunk_size
            end = bisect.bisect_right(weight_at, limit, start + 1, hi)
            end = max(end, start + 1)
            if weight(start, end) > cfg.chunk_size and end - start > 1:
                end -= 1
            pieces.append((start, end))
            start = end
        return pieces
    cuts = [p for p in boundaries_by_level[level] if lo < p < hi]
    if not cuts:
        return _split_pieces(lo, hi, level + 1, cfg, weight_at, boundaries_by_level)
    out = []
    prev = lo
    for p in cuts + [hi]:
        if weight(prev, p) <= cfg.chunk_size:
            out.append((prev, p))
        else:
            out.extend(_split_pieces(prev, p, level + 1, cfg, weight_at, boundaries_by_level))
        prev = p
    return out


def chunk_spans(
    tokens: list[Token],
    text: str,
    cfg: ChunkConfig,
    tokenizer: Tokenizer | None = None,
) -> list[tuple[int, int]]:
    """Token-index spans [start, end) of each chunk, in document order."""
    tok = tokenizer or DEFAULT_TOKENIZER
    n = len(tokens)
    if n == 0:
        return []
    weight_at = [0]
    for t in tokens:
        weight_at.append(weight_at[-1] + tok.weight(t))

    def weight(a: int, b: int) -> int:
        return weight_at[b] - weight_at[a]

    levels = [sep for sep in cfg.separator_hierarchy if sep != ""]
    boundaries_by_level = [_boundary_positions(tokens, text, sep) for sep in levels]
    pieces = _split_pieces(0, n, 0, cfg, weight_at, boundaries_by_level)
    edges = sorted({hi for _, hi in pieces})

    spans: list[tuple[int, int]] = []
    start = 0
    while weight(start, n) > cfg.chunk_size:
        limit = weight_at[start] + cfg.chunk_size
        window_end = bisect.bisect_right(weight_at, limit, start + 1, n + 1) - 1
        window_end = max(window_end, start + 1)
        i = bisect.bisect_right(edges, window_end) - 1
        end = edges[i] if i >= 0 and edges[i] > start else window_end
        if weight(start, end) > cfg.chunk_size:
            # only possible for a degenerate single token; emit it alone
            end = start + 1
        spans.append((start, end))
        carried = end - _overlap_tokens(weight_at, end, cfg.overlap)
        start = carried if carried > start else end
    spans.append((start, n))
    return spans


def _overlap_tokens(weight_at: list[int], end: int, overlap: int) -> int:
    """Number of trailing tokens whose total weight is <= overlap."""
    count = 0
    total = 0
    while end - count - 1 >= 0:
        w = weight_at[end - count] - weight_at[end - count - 1]
        if total + w > overlap:
            break
        total += w
        count += 1
    return count


def chunk_document(
    doc: DocumentRecord,
    cfg: ChunkConfig | None = None,
    tokenizer: Tokenizer | None = None,
) -> list[Passage]:
    """Split one document's text into passages; raises EmptyDocument."""
    cfg = cfg or ChunkConfig()
    tok = tokenizer or DEFAULT_TOKENIZER
    text = normalize_text(doc.text or "")
    if not text:
        raise EmptyDocument(f"document {doc.doc_id} has no text")
    tokens = tok.tokenize(text)
    if not tokens:
        raise EmptyDocument(f"document {doc.doc_id} has no tokens")
    passages = []
    for ordinal, (lo, hi) in enumerate(chunk_spans(tokens, text, cfg, tok)):
        chunk_text = text[tokens[lo].start:tokens[hi - 1].end]
        weight = sum(tok.weight(t) for t in tokens[lo:hi])
        passages.append(
            Passage(
                passage_id=f"{doc.doc_id}#{ordinal}",
                doc_id=doc.doc_id,
                ordinal=ordinal,
                text=chunk_text,
                token_count=weight,
            )
        )
    return passages


def run_chunk(
    accepted_path: str | Path,
    out_path: str | Path,
    cfg: ChunkConfig | None = None,
) -> dict[str, Any]:
    """CLI entry: chunk every document that carries text."""
    cfg = cfg or ChunkConfig()

    def generate() -> Iterable[dict[str, Any]]:
        for _, raw in read_jsonl(accepted_path):
            if not raw.get("text"):
                stats["skipped_empty"] += 1
                continue
            doc = DocumentRecord(
                doc_id=raw["doc_id"],
                title=raw.get("title", ""),
                authors=raw.get("authors", []),
                category=raw.get("category", ""),
                publication_year=raw.get("publication_year", 0),
                doc_type=raw.get("doc_type", ""),
                copyright_status=raw.get("copyright_status", "unknown"),
                download_url=raw.get("download_url"),
                text=raw.get("text"),
            )
            for p in chunk_document(doc, cfg):
                stats["passages"] += 1
                yield p.to_dict()
            stats["documents"] += 1

    stats = {"documents": 0, "passages": 0, "skipped_empty": 0}
    write_jsonl(out_path, generate())
    return stats
