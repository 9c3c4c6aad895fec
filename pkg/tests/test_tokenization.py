from __future__ import annotations

import random

from stella.tokenization import (
    DEFAULT_TOKENIZER,
    analyzer_terms,
    count_tokens,
    normalize_text,
)


def toks(text):
    return [t.text for t in DEFAULT_TOKENIZER.tokenize(text)]


def test_hyphenated_compound_is_one_token():
    assert count_tokens("Navier-Stokes flow") == 2


def test_empty_text_has_zero_tokens():
    assert count_tokens("") == 0


def test_whitespace_runs_collapse():
    assert count_tokens("a b  c") == 3


def test_edge_punctuation_detaches():
    assert toks("(CFD),") == ["(", "CFD", ")", ","]
    assert toks("burn.") == ["burn", "."]
    assert toks("H2O?") == ["H2O", "?"]


def test_interior_punctuation_kept():
    assert toks("don't 3-sigma") == ["don't", "3-sigma"]


def test_pure_punctuation_run_is_single_token():
    assert toks("a --- b") == ["a", "---", "b"]


def test_offsets_map_back_to_source():
    text = "The (RSRM) nozzle,  tested."
    for t in DEFAULT_TOKENIZER.tokenize(text):
        assert text[t.start:t.end] == t.text


def test_token_span_substring_roundtrip():
    rng = random.Random(7)
    words = ["alpha", "beta-2", "(gam)", "delta.", "e", "ZET4", "th,eta"]
    for _ in range(50):
        text = " ".join(rng.choice(words) for _ in range(rng.randint(1, 30)))
        tokens = DEFAULT_TOKENIZER.tokenize(text)
        # retokenizing any contiguous span's substring yields the same token texts
        if len(tokens) < 2:
            continue
        i = rng.randrange(len(tokens) - 1)
        j = rng.randrange(i + 1, len(tokens))
        sub = text[tokens[i].start:tokens[j].end]
        assert [t.text for t in DEFAULT_TOKENIZER.tokenize(sub)] == [
            t.text for t in tokens[i:j + 1]
        ]


def test_normalize_collapses_whitespace_preserving_paragraphs():
    raw = "a  b\t c\n\n\n\nd \n e\x00f"
    assert normalize_text(raw) == "a b c\n\nd\nef"


def test_analyzer_lowercases_and_drops_punctuation():
    assert analyzer_terms("The Rocket, (nozzle).") == ["the", "rocket", "nozzle"]
