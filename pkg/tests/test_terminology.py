from __future__ import annotations

import pytest

from stella.chunking import Passage
from stella.errors import FrequencyTableMissing
from stella.gateway.tagger import HeuristicTagger
from stella.terminology import (
    Candidate,
    TermEntry,
    TermFilterConfig,
    TerminologyDictionary,
    ZipfTable,
    build_dictionary,
    classify_pattern,
    extract_candidates,
    find_banned_terms,
    find_terms_in,
    head_component,
    run_terms,
)


def passage(text, pid="p0"):
    return Passage(passage_id=pid, doc_id="d", ordinal=0, text=text, token_count=1)


def dict_from(surfaces):
    entries = {}
    for s in surfaces:
        cls = (classify_pattern(s) or ("symbolic", ""))[0]
        entries[s] = TermEntry(surface=s, pattern_class=cls, doc_frequency=10,
                               pos="NOUN", zipf=None)
    return TerminologyDictionary(entries, TermFilterConfig())


TAGGER = HeuristicTagger().tag


# --- pattern classes ---------------------------------------------------------

def test_pattern_classes():
    assert classify_pattern("CFD") == ("all_caps", "acronym")
    assert classify_pattern("MODIS") == ("all_caps", "acronym")
    assert classify_pattern("Navier-Stokes") == ("hyphenated", "capitalized_compound")
    assert classify_pattern("XMM-Newton") == ("hyphenated", "capitalized_compound")
    assert classify_pattern("3-sigma") == ("symbolic", "digit_hyphen_word")
    assert classify_pattern("H2O")[0] == "symbolic"
    assert classify_pattern("B52")[0] == "symbolic"
    assert classify_pattern("gamma-ray") == ("symbolic", "greek_name_compound")
    assert classify_pattern("α-decay")[0] == "symbolic"  # Greek character
    assert classify_pattern("rocket") is None
    assert classify_pattern("state-of-the-art") is None  # no capitalized part
    assert classify_pattern("A") is None  # too short
    assert classify_pattern("A1")[0] == "symbolic"  # digit-letter designator
    assert classify_pattern("AB") == ("all_caps", "acronym")  # two-letter acronym


def test_extract_candidates_example_sentence():
    cands = extract_candidates([passage("CFD and MODIS use Navier-Stokes solvers at 3-sigma")])
    assert set(cands) == {"CFD", "MODIS", "Navier-Stokes", "3-sigma"}
    assert cands["CFD"].pattern_class == "all_caps"
    assert cands["Navier-Stokes"].pattern_class == "hyphenated"
    assert cands["3-sigma"].pattern_class == "symbolic"


def test_extract_candidates_no_match():
    assert extract_candidates([passage("the quick brown fox")]) == {}


def test_doc_frequency_counts_distinct_passages():
    passages = [passage("RSRM here", f"p{i}") for i in range(12)]
    passages.append(passage("RSRM and RSRM twice more", "p12"))
    passages.extend(passage("no terms", f"q{i}") for i in range(2))
    # oracle: brute-force distinct passages containing the token
    expected = sum(1 for p in passages if "RSRM" in p.text.split())
    cands = extract_candidates(passages)
    assert cands["RSRM"].doc_frequency == expected == 13


# --- filters -------------------------------------------------------------------

def table(**scores):
    return ZipfTable({k.casefold(): v for k, v in scores.items()})


def test_generic_word_removed_by_zipf():
    cands = {"DATA": Candidate("all_caps", 100)}
    d = build_dictionary(cands, TermFilterConfig(), table(data=5.5), TAGGER)
    assert len(d) == 0


def test_specific_term_retained():
    cands = {"propellant": Candidate("symbolic", 40)}
    d = build_dictionary(cands, TermFilterConfig(), table(propellant=3.2), TAGGER)
    assert "propellant" in d
    assert d.entries["propellant"].zipf == 3.2
    assert d.entries["propellant"].pos == "NOUN"


def test_frequency_threshold_boundary():
    cfg = TermFilterConfig()
    cands = {"RSRM": Candidate("all_caps", 9)}
    assert len(build_dictionary(cands, cfg, table(), TAGGER)) == 0
    cands = {"RSRM": Candidate("all_caps", 10)}
    assert len(build_dictionary(cands, cfg, table(), TAGGER)) == 1


def test_zipf_boundary_and_absent_terms():
    cfg = TermFilterConfig()
    cands = {"CFD": Candidate("all_caps", 50), "MODIS": Candidate("all_caps", 50)}
    d = build_dictionary(cands, cfg, table(cfd=3.5), TAGGER)
    assert "CFD" in d            # exactly at the threshold is kept
    assert "MODIS" in d          # absent from the table: treated as rare
    assert d.entries["MODIS"].zipf is None


def test_pos_filter_rejects_non_nominal_head():
    cands = {"Mach-tuned": Candidate("hyphenated", 50)}
    d = build_dictionary(cands, TermFilterConfig(), table(), TAGGER)
    assert len(d) == 0  # head "tuned" is OTHER


def test_head_component():
    assert head_component("Navier-Stokes") == "Stokes"
    assert head_component("3-sigma") == "sigma"
    assert head_component("RSRM") == "RSRM"


def test_monotonicity_of_filters():
    cands = {
        "CFD": Candidate("all_caps", 12),
        "RSRM": Candidate("all_caps", 30),
        "MODIS": Candidate("all_caps", 8),
    }
    freq = table(cfd=3.0, rsrm=4.0)
    sizes = []
    for zt in (2.0, 3.0, 4.0, 5.0):
        d = build_dictionary(cands, TermFilterConfig(zipf_threshold=zt), freq, TAGGER)
        sizes.append(len(d))
    assert sizes == sorted(sizes)
    sizes = []
    for mdf in (1, 10, 20, 40):
        d = build_dictionary(cands, TermFilterConfig(min_doc_frequency=mdf), freq, TAGGER)
        sizes.append(len(d))
    assert sizes == sorted(sizes, reverse=True)


def test_pattern_soundness_of_extracted_entries():
    text = "CFD MODIS Navier-Stokes 3-sigma H2O RSRM gamma-ray"
    passages = [passage(text, f"p{i}") for i in range(10)]
    cands = extract_candidates(passages)
    d = build_dictionary(cands, TermFilterConfig(), table(), TAGGER)
    assert len(d) > 0
    for entry in d.entries.values():
        cls = classify_pattern(entry.surface)
        assert cls is not None and cls[0] == entry.pattern_class


# --- matching ------------------------------------------------------------------

def test_find_terms_token_boundary():
    d = dict_from(["RSRM", "propellant"])
    text = "the RSRM propellant grains"
    found = find_terms_in(text, d)
    assert [(s, text[a:b]) for s, (a, b) in found] == [
        ("RSRM", "RSRM"), ("propellant", "propellant"),
    ]


def test_acronym_case_sensitive():
    d = dict_from(["RSRM"])
    assert find_terms_in("rsrm", d) == []
    assert len(find_terms_in("RSRM", d)) == 1


def test_hyphen_space_variant_folding():
    d = dict_from(["Navier-Stokes"])
    found = find_terms_in("solving Navier Stokes equations", d)
    assert [s for s, _ in found] == ["Navier-Stokes"]
    found = find_terms_in("solving navier-stokes equations", d)
    assert [s for s, _ in found] == ["Navier-Stokes"]


def test_plural_folding():
    d = dict_from(["RSRM", "propellant"])
    found = find_terms_in("RSRMs burn propellants quickly", d)
    assert [s for s, _ in found] == ["RSRM", "propellant"]
    # acronym plural fold stays case-sensitive on the stem
    assert find_terms_in("rsrms", d) == []


def test_longest_match_first_non_overlapping():
    d = dict_from(["Navier-Stokes", "Stokes"])
    text = "Navier Stokes flow"
    found = find_terms_in(text, d)
    assert [s for s, _ in found] == ["Navier-Stokes"]
    # spans never overlap
    spans = [sp for _, sp in found]
    assert all(a2 >= b1 for (_, b1), (a2, _) in zip(spans, spans[1:]))


def test_empty_dictionary_finds_nothing():
    d = TerminologyDictionary({}, TermFilterConfig())
    assert find_terms_in("anything RSRM", d) == []


def test_banned_terms_fold_case_for_acronyms():
    assert find_banned_terms("the rsrm nozzle", ["RSRM"])
    assert find_banned_terms("Propellants burn", ["propellant"])
    assert find_banned_terms("navier stokes", ["Navier-Stokes"])
    assert find_banned_terms("nothing here", ["RSRM"]) == []


def test_refindability_in_source_corpus():
    text = "CFD MODIS Navier-Stokes 3-sigma H2O RSRM"
    passages = [passage(text, f"p{i}") for i in range(10)]
    cands = extract_candidates(passages)
    d = build_dictionary(cands, TermFilterConfig(), table(), TAGGER)
    for surface in d.entries:
        hits = sum(1 for p in passages if any(s == surface for s, _ in find_terms_in(p.text, d)))
        assert hits >= d.filter_config.min_doc_frequency


# --- persistence ---------------------------------------------------------------

def test_zipf_table_load_and_missing(tmp_path):
    tsv = tmp_path / "freq.tsv"
    tsv.write_text("# comment\nsystem\t5.1\nPropellant\t3.2\n", encoding="utf-8")
    t = ZipfTable.load(tsv)
    assert t.lookup("System") == 5.1
    assert t.lookup("propellant") == 3.2
    assert t.lookup("unknown") is None
    with pytest.raises(FrequencyTableMissing):
        ZipfTable.load(tmp_path / "nope.tsv")


def test_run_terms_roundtrip(tmp_path):
    import json

    passages_path = tmp_path / "passages.jsonl"
    rows = [passage("RSRM and CFD with Navier-Stokes", f"p{i}").to_dict() for i in range(10)]
    passages_path.write_text("\n".join(json.dumps(r) for r in rows), encoding="utf-8")
    freq = tmp_path / "freq.tsv"
    freq.write_text("cfd\t4.1\n", encoding="utf-8")
    out = tmp_path / "dict.json"
    stats = run_terms(passages_path, freq, out)
    assert stats["candidates"] == 3
    assert stats["entries"] == 2  # CFD removed by zipf
    from stella.terminology import load_dictionary

    d = load_dictionary(out)
    assert set(d.entries) == {"RSRM", "Navier-Stokes"}
    assert d.corpus_fingerprint
