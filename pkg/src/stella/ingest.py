"""Manifest ingestion: selection rules plus exact exclusion accounting.

A manifest is a JSONL stream of document metadata records.  Acceptance
requires, in fixed precedence order: a download URL, a doc_id not seen
earlier in the manifest, a text-centric document type, and public copyright.
Records older than the recency floor are rejected before those four reasons
are evaluated, and counted separately, as are records that fail to parse.
The precedence order is fixed so exclusion counts are deterministic.
"""

from __future__ import annotations

from collections.abc import Iterable, Iterator
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .errors import ManifestParseError
from .storage import write_json, write_jsonl

CATEGORIES = (
    "Aeronautics",
    "Astronautics",
    "Chemistry and Materials",
    "Engineering",
    "Geosciences",
    "Life Sciences",
    "Mathematical and Computer Sciences",
    "Physics",
    "Social and Information Sciences",
    "Space Sciences",
)

EXCLUDED_DOC_TYPES = frozenset({"Video", "Poster", "Presentation", "Abstract"})
COPYRIGHT_STATUSES = ("public", "protected", "unknown")
RECENCY_FLOOR = 2000

REASONS = ("no_download_url", "duplicate", "invalid_type", "invalid_copyright")


@dataclass
class DocumentRecord:
    doc_id: str
    title: str
    authors: list[str]
    category: str
    publication_year: int
    doc_type: str
    copyright_status: str
    download_url: str | None = None
    text: str | None = None
    alternate_categories: list[str] = field(default_factory=list)

    def to_dict(self) -> dict[str, Any]:
        d: dict[str, Any] = {
            "doc_id": self.doc_id,
            "title": self.title,
            "authors": self.authors,
            "category": self.category,
            "publication_year": self.publication_year,
            "doc_type": self.doc_type,
            "copyright_status": self.copyright_status,
            "download_url": self.download_url,
        }
        if self.text is not None:
            d["text"] = self.text
        if self.alternate_categories:
            d["alternate_categories"] = self.alternate_categories
        return d


def parse_record(raw: dict[str, Any]) -> DocumentRecord:
    """Validate one manifest object; raises ManifestParseError on bad shape."""
    try:
        doc_id = raw["doc_id"]
        title = raw.get("title", "")
        authors = raw.get("authors", [])
        category = raw["category"]
        year = raw["publication_year"]
        doc_type = raw["doc_type"]
        copyright_status = raw["copyright_status"]
    except KeyError as exc:
        raise ManifestParseError(f"missing field {exc.args[0]!r}") from exc
    if not isinstance(doc_id, str) or not doc_id:
        raise ManifestParseError("doc_id must be a non-empty string")
    if category not in CATEGORIES:
        raise ManifestParseError(f"unknown category {category!r}")
    if not isinstance(year, int):
        raise ManifestParseError("publication_year must be an integer")
    if copyright_status not in COPYRIGHT_STATUSES:
        raise ManifestParseError(f"unknown copyright_status {copyright_status!r}")
    if not isinstance(authors, list) or any(not isinstance(a, str) for a in authors):
        raise ManifestParseError("authors must be a list of strings")
    url = raw.get("download_url")
    if url is not None and not isinstance(url, str):
        raise ManifestParseError("download_url must be a string when present")
    text = raw.get("text")
    if text is not None and not isinstance(text, str):
        raise ManifestParseError("text must be a string when present")
    return DocumentRecord(
        doc_id=doc_id,
        title=str(title),
        authors=list(authors),
        category=category,
        publication_year=year,
        doc_type=str(doc_type),
        copyright_status=copyright_status,
        download_url=url if url else None,
        text=text,
    )


@dataclass
class ExclusionLedger:
    """Per-(category, reason) exclusion counts plus the out-of-band gates."""

    counts: dict[str, dict[str, int]] = field(
        default_factory=lambda: {c: {r: 0 for r in REASONS} for c in CATEGORIES}
    )
    recency_filtered: dict[str, int] = field(
        default_factory=lambda: {c: 0 for c in CATEGORIES}
    )
    parse_errors: int = 0
    parse_messages: list[str] = field(default_factory=list)

    def record(self, category: str, reason: str) -> None:
        self.counts[category][reason] += 1

    def category_total(self, category: str) -> int:
        return sum(self.counts[category].values())

    def reason_total(self, reason: str) -> int:
        return sum(self.counts[c][reason] for c in CATEGORIES)

    def total_excluded(self) -> int:
        """All non-accepted records: four reasons + recency + parse failures."""
        return (
            sum(self.category_total(c) for c in CATEGORIES)
            + sum(self.recency_filtered.values())
            + self.parse_errors
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "counts": self.counts,
            "reason_totals": {r: self.reason_total(r) for r in REASONS},
            "recency_filtered": self.recency_filtered,
            "parse_errors": self.parse_errors,
            "parse_messages": self.parse_messages,
            "total_excluded": self.total_excluded(),
        }


def ingest(
    manifest: Iterable[dict[str, Any]],
) -> tuple[list[DocumentRecord], ExclusionLedger]:
    """Apply the selection rules to a manifest stream.

    Dedup is order-stable: the first manifest occurrence of a doc_id claims
    it, whether or not that occurrence is itself accepted.  Later duplicates
    of an accepted record contribute their category to the survivor's
    ``alternate_categories``.
    """
    ledger = ExclusionLedger()
    accepted: list[DocumentRecord] = []
    by_id: dict[str, DocumentRecord | None] = {}

    for lineno, raw in enumerate(manifest, start=1):
        try:
            rec = parse_record(raw)
        except ManifestParseError as exc:
            ledger.parse_errors += 1
            ledger.parse_messages.append(f"record {lineno}: {exc}")
            continue
        if rec.publication_year < RECENCY_FLOOR:
            ledger.recency_filtered[rec.category] += 1
            continue
        if rec.download_url is None:
            ledger.record(rec.category, "no_download_url")
            by_id.setdefault(rec.doc_id, None)
            continue
        if rec.doc_id in by_id:
            ledger.record(rec.category, "duplicate")
            survivor = by_id[rec.doc_id]
            if survivor is not None and rec.category != survivor.category:
                if rec.category not in survivor.alternate_categories:
                    survivor.alternate_categories.append(rec.category)
            continue
        if rec.doc_type in EXCLUDED_DOC_TYPES:
            ledger.record(rec.category, "invalid_type")
            by_id[rec.doc_id] = None
            continue
        if rec.copyright_status != "public":
            ledger.record(rec.category, "invalid_copyright")
            by_id[rec.doc_id] = None
            continue
        by_id[rec.doc_id] = rec
        accepted.append(rec)

    return accepted, ledger


def read_manifest(path: str | Path) -> Iterator[dict[str, Any]]:
    """Stream raw manifest objects; malformed JSON lines surface as dicts the
    parser will reject, so they are counted rather than aborting the run."""
    import json

    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError:
                yield {"__malformed__": line}
                continue
            yield obj if isinstance(obj, dict) else {"__malformed__": obj}


def run_ingest(manifest_path: str | Path, out_dir: str | Path) -> dict[str, Any]:
    """CLI entry: read manifest.jsonl, write accepted.jsonl and ledger.json."""
    out = Path(out_dir)
    accepted, ledger = ingest(read_manifest(manifest_path))
    n = write_jsonl(out / "accepted.jsonl", (r.to_dict() for r in accepted))
    write_json(out / "ledger.json", ledger.to_dict())
    return {"accepted": n, "excluded": ledger.total_excluded()}
