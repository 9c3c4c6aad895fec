from __future__ import annotations

import json

from stella.ingest import CATEGORIES, ExclusionLedger, ingest, read_manifest, run_ingest

# Per-category (usable, no_download_url, duplicate, invalid_type, invalid_copyright)
# counts for the published source-corpus statistics this pipeline reproduces.
NTRS_DISTRIBUTION = {
    "Aeronautics": (2860, 235, 211, 830, 236),
    "Astronautics": (1068, 552, 139, 746, 117),
    "Chemistry and Materials": (2935, 623, 162, 857, 129),
    "Engineering": (3564, 715, 259, 1190, 207),
    "Geosciences": (3468, 3253, 274, 1517, 1413),
    "Life Sciences": (2331, 3752, 160, 2726, 216),
    "Mathematical and Computer Sciences": (1350, 456, 127, 493, 128),
    "Physics": (2935, 1706, 189, 897, 181),
    "Social and Information Sciences": (102, 20, 30, 104, 45),
    "Space Sciences": (5864, 7150, 385, 3185, 1821),
}


def record(doc_id, category, *, year=2010, doc_type="Technical Report",
           copyright_status="public", url="https://example.org/doc.pdf"):
    return {
        "doc_id": doc_id,
        "title": f"Title {doc_id}",
        "authors": ["A. Author"],
        "category": category,
        "publication_year": year,
        "doc_type": doc_type,
        "copyright_status": copyright_status,
        "download_url": url,
    }


def synth_manifest():
    """Manifest matching the published category/reason distribution exactly."""
    rows = []
    for cat, (usable, no_url, dup, bad_type, bad_c) in NTRS_DISTRIBUTION.items():
        tag = cat.replace(" ", "")[:6]
        for i in range(usable):
            rows.append(record(f"{tag}-ok-{i}", cat))
        for i in range(no_url):
            rows.append(record(f"{tag}-nu-{i}", cat, url=None))
        for i in range(dup):
            rows.append(record(f"{tag}-ok-0", cat))  # repeats an accepted id
        for i in range(bad_type):
            rows.append(record(f"{tag}-bt-{i}", cat, doc_type="Presentation"))
        for i in range(bad_c):
            rows.append(record(f"{tag}-bc-{i}", cat, copyright_status="protected"))
    return rows


def test_published_distribution_reproduced():
    rows = synth_manifest()
    assert len(rows) == 63_913
    accepted, ledger = ingest(rows)
    assert len(accepted) == 26_477
    for cat, (_, no_url, dup, bad_type, bad_c) in NTRS_DISTRIBUTION.items():
        assert ledger.counts[cat] == {
            "no_download_url": no_url,
            "duplicate": dup,
            "invalid_type": bad_type,
            "invalid_copyright": bad_c,
        }
    assert ledger.reason_total("no_download_url") == 18_462
    assert ledger.reason_total("duplicate") == 1_936
    assert ledger.reason_total("invalid_type") == 12_545
    assert ledger.reason_total("invalid_copyright") == 4_493
    assert ledger.total_excluded() == 37_436
    assert len(accepted) + ledger.total_excluded() == len(rows)


def test_recency_is_a_parse_level_gate():
    accepted, ledger = ingest([record("d1", "Physics", year=1999)])
    assert accepted == []
    assert ledger.recency_filtered["Physics"] == 1
    assert ledger.category_total("Physics") == 0  # not one of the four reasons
    # boundary year is accepted
    accepted, _ = ingest([record("d2", "Physics", year=2000)])
    assert len(accepted) == 1


def test_duplicate_keeps_first_and_records_alternate_category():
    rows = [record("d1", "Physics"), record("d1", "Geosciences")]
    accepted, ledger = ingest(rows)
    assert len(accepted) == 1
    assert accepted[0].category == "Physics"
    assert accepted[0].alternate_categories == ["Geosciences"]
    assert ledger.counts["Geosciences"]["duplicate"] == 1


def test_precedence_no_url_before_type_and_copyright():
    rows = [record("d1", "Physics", url=None, doc_type="Video", copyright_status="unknown")]
    _, ledger = ingest(rows)
    assert ledger.counts["Physics"] == {
        "no_download_url": 1, "duplicate": 0, "invalid_type": 0, "invalid_copyright": 0,
    }


def test_precedence_duplicate_before_type():
    rows = [record("d1", "Physics"), record("d1", "Physics", doc_type="Video")]
    _, ledger = ingest(rows)
    assert ledger.counts["Physics"]["duplicate"] == 1
    assert ledger.counts["Physics"]["invalid_type"] == 0


def test_unknown_copyright_excluded():
    _, ledger = ingest([record("d1", "Physics", copyright_status="unknown")])
    assert ledger.counts["Physics"]["invalid_copyright"] == 1


def test_parse_errors_counted_not_dropped():
    rows = [{"doc_id": "x"}, record("d1", "Physics")]
    accepted, ledger = ingest(rows)
    assert len(accepted) == 1
    assert ledger.parse_errors == 1
    assert ledger.parse_messages
    assert len(accepted) + ledger.total_excluded() == 2


def test_idempotence_on_accepted_set():
    rows = [record(f"d{i}", c) for i, c in enumerate(CATEGORIES)]
    accepted, _ = ingest(rows)
    again, ledger = ingest([r.to_dict() for r in accepted])
    assert [r.doc_id for r in again] == [r.doc_id for r in accepted]
    assert ledger.total_excluded() == 0


def test_reconciliation_property_random_manifests():
    import random

    rng = random.Random(11)
    for _ in range(20):
        rows = []
        for i in range(rng.randint(1, 60)):
            kind = rng.randrange(6)
            cat = rng.choice(CATEGORIES)
            if kind == 0:
                rows.append({"broken": True})
            elif kind == 1:
                rows.append(record(f"r{i}", cat, year=rng.choice([1990, 1999])))
            elif kind == 2:
                rows.append(record(f"r{i}", cat, url=None))
            elif kind == 3:
                rows.append(record(f"r{rng.randrange(i + 1)}", cat))
            elif kind == 4:
                rows.append(record(f"r{i}", cat, doc_type="Poster"))
            else:
                rows.append(record(f"r{i}", cat))
        accepted, ledger = ingest(rows)
        assert len(accepted) + ledger.total_excluded() == len(rows)


def test_run_ingest_writes_artifacts(tmp_path):
    manifest = tmp_path / "manifest.jsonl"
    lines = [json.dumps(record("d1", "Physics")), "{not json", json.dumps(record("d2", "Physics", url=None))]
    manifest.write_text("\n".join(lines), encoding="utf-8")
    stats = run_ingest(manifest, tmp_path / "out")
    assert stats == {"accepted": 1, "excluded": 2}
    ledger = json.loads((tmp_path / "out" / "ledger.json").read_text())
    assert ledger["parse_errors"] == 1
    accepted = (tmp_path / "out" / "accepted.jsonl").read_text().strip().splitlines()
    assert json.loads(accepted[0])["doc_id"] == "d1"
