"""BEIR-compatible persistence: corpus.jsonl + queries.jsonl + qrels/test.tsv.

Each language split is a self-contained directory; the corpus file is
byte-identical across splits since only queries differ between languages.
Field names are exactly `_id`, `title`, `text`, `metadata`; qrels are
tab-separated with a header row; everything is UTF-8 with LF newlines and
deterministically ordered by id.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Sequence

from .chunking import Passage
from .errors import DanglingQrel, DuplicateId, ParseError
from .querygen import QueryRecord
from .storage import write_jsonl, write_text
from .xlingual import TranslationRecord

QRELS_HEADER = "query-id\tcorpus-id\tscore"


@dataclass
class BeirSplit:
    language: str
    corpus: dict[str, dict[str, Any]] = field(default_factory=dict)   # _id -> entry
    queries: dict[str, dict[str, Any]] = field(default_factory=dict)  # _id -> entry
    qrels: dict[str, str] = field(default_factory=dict)               # query-id -> corpus-id


def corpus_entry(passage: Passage, title: str = "") -> dict[str, Any]:
    return {"_id": passage.passage_id, "title": title, "text": passage.text}


def query_entry(record: QueryRecord, text: str, language: str) -> dict[str, Any]:
    return {
        "_id": record.query_id,
        "text": text,
        "metadata": {
            "intent": record.intent.value,
            "qtype": record.qtype,
            "language": language,
            "source_doc_id": record.passage_id.rsplit("#", 1)[0],
        },
    }


def export_beir(
    corpus: Sequence[Passage],
    queries: Sequence[QueryRecord],
    translations: Sequence[TranslationRecord],
    out_dir: str | Path,
    titles: dict[str, str] | None = None,
    corpus_scope: str = "full",
) -> dict[str, Any]:
    """Write one split per language present; returns per-split counts.

    Only constraint-valid queries and term-check-passing translations are
    exported; exclusions are reported, never silent.  ``corpus_scope`` is
    "full" (every passage, the retrieval-difficulty-preserving default) or
    "positives" (only passages some query links to; desk-scale variant).
    """
    out = Path(out_dir)
    titles = titles or {}
    if corpus_scope not in ("full", "positives"):
        raise ValueError(f"unknown corpus_scope {corpus_scope!r}")
    if corpus_scope == "positives":
        positive_ids = {q.passage_id for q in queries if q.valid}
        corpus = [p for p in corpus if p.passage_id in positive_ids]

    corpus_rows = {}
    for p in corpus:
        if p.passage_id in corpus_rows:
            raise DuplicateId(f"duplicate passage id {p.passage_id}")
        corpus_rows[p.passage_id] = corpus_entry(p, titles.get(p.doc_id, ""))

    valid_queries = [q for q in queries if q.valid]
    skipped_invalid = len(queries) - len(valid_queries)
    by_query_id = {}
    for q in valid_queries:
        if q.query_id in by_query_id:
            raise DuplicateId(f"duplicate query id {q.query_id}")
        by_query_id[q.query_id] = q
        if q.passage_id not in corpus_rows:
            raise DanglingQrel(f"query {q.query_id} references missing passage {q.passage_id}")

    splits: dict[str, list[tuple[str, str]]] = {"en": [(q.query_id, q.final_query)
                                                       for q in valid_queries]}
    skipped_translations = 0
    for t in translations:
        if not t.term_check_passed:
            skipped_translations += 1
            continue
        if t.query_id not in by_query_id:
            skipped_translations += 1
            continue
        splits.setdefault(t.language, []).append((t.query_id, t.translated_query))

    counts: dict[str, Any] = {
        "skipped_invalid_queries": skipped_invalid,
        "skipped_translations": skipped_translations,
        "splits": {},
    }
    corpus_lines = [corpus_rows[pid] for pid in sorted(corpus_rows)]
    for language in sorted(splits):
        split_dir = out / language
        rows = sorted(splits[language])
        write_jsonl(split_dir / "corpus.jsonl", corpus_lines)
        write_jsonl(
            split_dir / "queries.jsonl",
            (query_entry(by_query_id[qid], text, language) for qid, text in rows),
        )
        qrels_lines = [QRELS_HEADER]
        qrels_lines += [f"{qid}\t{by_query_id[qid].passage_id}\t1" for qid, _ in rows]
        write_text(split_dir / "qrels" / "test.tsv", "\n".join(qrels_lines) + "\n")
        counts["splits"][language] = {"queries": len(rows), "corpus": len(corpus_lines)}
    return counts


def load_beir(split_dir: str | Path) -> BeirSplit:
    """Load and integrity-check one language split directory."""
    split_dir = Path(split_dir)
    split = BeirSplit(language=split_dir.name)

    for lineno, raw in _read_jsonl_lines(split_dir / "corpus.jsonl"):
        _require(raw, ("_id", "title", "text"), lineno, "corpus.jsonl")
        if raw["_id"] in split.corpus:
            raise DuplicateId(f"corpus.jsonl: duplicate _id {raw['_id']}")
        if not raw["text"]:
            raise ParseError(f"corpus entry {raw['_id']} has empty text", line=lineno)
        split.corpus[raw["_id"]] = raw

    for lineno, raw in _read_jsonl_lines(split_dir / "queries.jsonl"):
        _require(raw, ("_id", "text"), lineno, "queries.jsonl")
        if raw["_id"] in split.queries:
            raise DuplicateId(f"queries.jsonl: duplicate _id {raw['_id']}")
        split.queries[raw["_id"]] = raw

    qrels_path = split_dir / "qrels" / "test.tsv"
    with open(qrels_path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line or (lineno == 1 and line.lower().startswith("query-id")):
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise ParseError(f"expected 3 tab-separated fields, got {len(parts)}", line=lineno)
            qid, pid, score = parts
            if qid not in split.queries:
                raise DanglingQrel(f"qrels references unknown query {qid}")
            if pid not in split.corpus:
                raise DanglingQrel(f"qrels references unknown passage {pid}")
            if qid in split.qrels:
                raise DuplicateId(f"qrels has two rows for query {qid}")
            int(score)
            split.qrels[qid] = pid
    return split


def _require(raw: dict, keys: Iterable[str], lineno: int, name: str) -> None:
    for key in keys:
        if key not in raw:
            raise ParseError(f"{name} missing field {key!r}", line=lineno)


def _read_jsonl_lines(path: Path):
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(str(exc), line=lineno) from exc
            if not isinstance(obj, dict):
                raise ParseError("expected a JSON object", line=lineno)
            yield lineno, obj


def fetch_file(url: str, dest: str | Path, timeout: float = 30.0) -> Path:
    """Plain HTTP download helper for released benchmark artifacts."""
    import requests

    dest = Path(dest)
    dest.parent.mkdir(parents=True, exist_ok=True)
    resp = requests.get(url, timeout=timeout)
    resp.raise_for_status()
    dest.write_bytes(resp.content)
    return dest
