"""Domain terminology: candidate extraction, filtering, and text matching.

Candidates are single tokens matching one of three pattern classes, with
hyphenated compounds checked first, then symbolic forms, then bare acronyms
(so "H2O" classifies as symbolic, not as an acronym):

* all_caps — uppercase letters and digits, length >= 2, at least two letters
  ("CFD", "MODIS", "RSRM");
* hyphenated — two or more alphabetic components joined by hyphens with at
  least one capitalized component ("Navier-Stokes", "XMM-Newton");
* symbolic — a Greek character, a spelled-out Greek-letter compound
  ("gamma-ray"), a digit/letter mix ("H2O", "B52"), or a digit-hyphen-word
  form ("3-sigma").

Dictionary admission applies three filters: document frequency (distinct
passages), part of speech of the head component, and a general-frequency
ceiling.  Terms missing from the frequency table are treated as maximally
rare and kept, since domain acronyms are exactly the tokens general corpora
lack.

Matching back into text is longest-match-first over non-overlapping token
spans; acronyms match case-sensitively, everything else case-insensitively;
hyphen/space variants and trailing "s"/"es" plurals fold onto the entry.
"""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Iterable, NamedTuple

from .chunking import Passage
from .errors import FrequencyTableMissing
from .storage import read_jsonl, write_json
from .tokenization import DEFAULT_TOKENIZER

ALL_CAPS = "all_caps"
HYPHENATED = "hyphenated"
SYMBOLIC = "symbolic"

GREEK_NAMES = (
    "alpha", "beta", "gamma", "delta", "epsilon", "zeta", "eta", "theta",
    "iota", "kappa", "lambda", "mu", "nu", "xi", "omicron", "pi", "rho",
    "sigma", "tau", "upsilon", "phi", "chi", "psi", "omega",
)

_ALL_CAPS_RE = re.compile(r"^(?=(?:[^A-Z]*[A-Z]){2})[A-Z0-9]{2,}$")
_HYPHENATED_RE = re.compile(r"^[A-Za-z]+(?:-[A-Za-z]+)+$")
_GREEK_CHAR_RE = re.compile(r"[Ͱ-Ͽἀ-῿]")
_DIGIT_LETTER_RE = re.compile(r"^[A-Za-z0-9]*(?:[A-Za-z][0-9]|[0-9][A-Za-z])[A-Za-z0-9]*$")
_DIGIT_HYPHEN_WORD_RE = re.compile(r"^\d+(?:\.\d+)?-[A-Za-z]+(?:-[A-Za-z]+)*$")


def classify_pattern(token: str) -> tuple[str, str] | None:
    """(pattern_class, fired_subrule) for a candidate token, or None."""
    if _HYPHENATED_RE.match(token):
        parts = token.split("-")
        if any(p[:1].isupper() for p in parts):
            return HYPHENATED, "capitalized_compound"
        if any(p.lower() in GREEK_NAMES for p in parts):
            return SYMBOLIC, "greek_name_compound"
        return None
    if _GREEK_CHAR_RE.search(token):
        return SYMBOLIC, "greek_char"
    if _DIGIT_HYPHEN_WORD_RE.match(token):
        return SYMBOLIC, "digit_hyphen_word"
    if _DIGIT_LETTER_RE.match(token) and any(c.isalpha() for c in token) and any(c.isdigit() for c in token):
        return SYMBOLIC, "digit_letter"
    if _ALL_CAPS_RE.match(token):
        return ALL_CAPS, "acronym"
    return None


class Candidate(NamedTuple):
    pattern_class: str
    doc_frequency: int


def extract_candidates(passages: Iterable[Passage]) -> dict[str, Candidate]:
    """Scan passages for pattern matches; doc_frequency counts distinct passages."""
    classes: dict[str, str] = {}
    freq: Counter[str] = Counter()
    for passage in passages:
        seen: set[str] = set()
        for token in DEFAULT_TOKENIZER.tokenize(passage.text):
            surface = token.text
            if surface in seen:
                continue
            cls = classes.get(surface)
            if cls is None:
                classified = classify_pattern(surface)
                if classified is None:
                    continue
                cls = classified[0]
                classes[surface] = cls
            seen.add(surface)
        freq.update(seen)
    return {s: Candidate(classes[s], freq[s]) for s in freq}


class ZipfTable:
    """General-frequency scores loaded from a `word<TAB>zipf` TSV artifact."""

    def __init__(self, scores: dict[str, float]):
        self._scores = scores

    @classmethod
    def load(cls, path: str | Path) -> "ZipfTable":
        path = Path(path)
        if not path.exists():
            raise FrequencyTableMissing(f"frequency table not found: {path}")
        scores: dict[str, float] = {}
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                word, _, value = line.partition("\t")
                if not value:
                    continue
                scores[word.casefold()] = float(value)
        return cls(scores)

    def lookup(self, surface: str) -> float | None:
        return self._scores.get(surface.casefold())

    def __len__(self) -> int:
        return len(self._scores)


@dataclass
class TermFilterConfig:
    min_doc_frequency: int = 10
    zipf_threshold: float = 3.5
    allowed_pos: tuple[str, ...] = ("NOUN", "PROPN")

    def __post_init__(self):
        if self.min_doc_frequency < 1:
            raise ValueError("min_doc_frequency must be positive")
        if self.zipf_threshold <= 0:
            raise ValueError("zipf_threshold must be positive")

    def to_dict(self) -> dict[str, Any]:
        return {
            "min_doc_frequency": self.min_doc_frequency,
            "zipf_threshold": self.zipf_threshold,
            "allowed_pos": list(self.allowed_pos),
        }


@dataclass(frozen=True)
class TermEntry:
    surface: str
    pattern_class: str
    doc_frequency: int
    pos: str
    zipf: float | None

    def to_dict(self) -> dict[str, Any]:
        return {
            "surface": self.surface,
            "pattern_class": self.pattern_class,
            "doc_frequency": self.doc_frequency,
            "pos": self.pos,
            "zipf": self.zipf,
        }


def head_component(surface: str) -> str:
    """Last alphabetic component; the token itself when not hyphenated."""
    parts = [p for p in surface.split("-") if any(c.isalpha() for c in p)]
    return parts[-1] if parts else surface


Tagger = Callable[[list[str]], list[str]]


class TerminologyDictionary:
    def __init__(self, entries: dict[str, TermEntry], filter_config: TermFilterConfig,
                 corpus_fingerprint: str = ""):
        self.entries = dict(entries)
        self.filter_config = filter_config
        self.corpus_fingerprint = corpus_fingerprint
        self._index: _MatchIndex | None = None

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, surface: str) -> bool:
        return surface in self.entries

    def surfaces(self) -> list[str]:
        return sorted(self.entries)

    def match_index(self) -> "_MatchIndex":
        if self._index is None:
            self._index = _MatchIndex(
                [(e.surface, e.pattern_class == ALL_CAPS) for e in self.entries.values()]
            )
        return self._index

    def to_dict(self) -> dict[str, Any]:
        return {
            "entries": [self.entries[s].to_dict() for s in sorted(self.entries)],
            "filter_config": self.filter_config.to_dict(),
            "corpus_fingerprint": self.corpus_fingerprint,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "TerminologyDictionary":
        cfg = d.get("filter_config", {})
        filter_config = TermFilterConfig(
            min_doc_frequency=cfg.get("min_doc_frequency", 10),
            zipf_threshold=cfg.get("zipf_threshold", 3.5),
            allowed_pos=tuple(cfg.get("allowed_pos", ("NOUN", "PROPN"))),
        )
        entries = {
            e["surface"]: TermEntry(
                surface=e["surface"],
                pattern_class=e["pattern_class"],
                doc_frequency=int(e["doc_frequency"]),
                pos=e["pos"],
                zipf=e.get("zipf"),
            )
            for e in d.get("entries", [])
        }
        return cls(entries, filter_config, d.get("corpus_fingerprint", ""))


def build_dictionary(
    candidates: dict[str, Candidate],
    cfg: TermFilterConfig,
    freq_table: ZipfTable,
    tagger: Tagger,
) -> TerminologyDictionary:
    """Admit candidates that pass all three filters.

    Heads are tagged in a neutral "the <head>" frame so capitalization
    evidence is read as mid-sentence, matching how the terms occur in text.
    """
    entries: dict[str, TermEntry] = {}
    for surface in sorted(candidates):
        cls, df = candidates[surface]
        if df < cfg.min_doc_frequency:
            continue
        pos = tagger(["the", head_component(surface)])[-1]
        if pos not in cfg.allowed_pos:
            continue
        zipf = freq_table.lookup(surface)
        if zipf is not None and zipf > cfg.zipf_threshold:
            continue
        entries[surface] = TermEntry(
            surface=surface, pattern_class=cls, doc_frequency=df, pos=pos, zipf=zipf,
        )
    return TerminologyDictionary(entries, cfg)


# --- matching ----------------------------------------------------------------

class _MatchIndex:
    """Token-sequence lookup for longest-match-first scanning.

    Each entry contributes its hyphen form (one key token) and, for
    hyphenated surfaces, the space variant (one key token per component).
    """

    def __init__(self, surfaces: list[tuple[str, bool]], force_fold: bool = False):
        # first key token -> list of (key tuple, surface, case_sensitive)
        self.by_first: dict[str, list[tuple[tuple[str, ...], str, bool]]] = {}
        self.max_len = 1
        for surface, is_acronym in surfaces:
            sensitive = is_acronym and not force_fold
            variants = [(surface,)]
            if "-" in surface:
                parts = tuple(p for p in surface.split("-") if p)
                if len(parts) > 1:
                    variants.append(parts)
            for var in variants:
                key = tuple(v if sensitive else v.casefold() for v in var)
                self.by_first.setdefault(key[0], []).append((key, surface, sensitive))
                self.max_len = max(self.max_len, len(key))
        for options in self.by_first.values():
            options.sort(key=lambda kv: (-len(kv[0]), kv[1]))


def _token_matches(token: str, key: str, sensitive: bool, allow_plural: bool) -> bool:
    t = token if sensitive else token.casefold()
    if t == key:
        return True
    if allow_plural:
        if t.endswith("es") and t[:-2] == key:
            return True
        if t.endswith("s") and t[:-1] == key:
            return True
    return False


def _scan(text: str, index: _MatchIndex) -> list[tuple[str, tuple[int, int]]]:
    tokens = DEFAULT_TOKENIZER.tokenize(text)
    matches: list[tuple[str, tuple[int, int]]] = []
    i = 0
    while i < len(tokens):
        tok = tokens[i]
        # candidate keys: the token itself, case-folded, and de-pluralized
        # forms (single-token keys fold plurals on this same token)
        folded = tok.text.casefold()
        probes = {tok.text, folded}
        for p in (tok.text, folded):
            if p.endswith("es"):
                probes.add(p[:-2])
            if p.endswith("s"):
                probes.add(p[:-1])
        candidates = []
        for probe in probes:
            candidates.extend(index.by_first.get(probe, []))
        seen = set()
        best: tuple[tuple[str, ...], str, bool] | None = None
        for key, surface, sensitive in sorted(candidates, key=lambda kv: (-len(kv[0]), kv[1])):
            if (key, surface) in seen:
                continue
            seen.add((key, surface))
            if i + len(key) > len(tokens):
                continue
            ok = True
            for j, piece in enumerate(key):
                allow_plural = j == len(key) - 1
                if not _token_matches(tokens[i + j].text, piece, sensitive, allow_plural):
                    ok = False
                    break
            if ok:
                best = (key, surface, sensitive)
                break
        if best is not None:
            key, surface, _ = best
            span = (tokens[i].start, tokens[i + len(key) - 1].end)
            matches.append((surface, span))
            i += len(key)
        else:
            i += 1
    return matches


def find_terms_in(text: str, dictionary: TerminologyDictionary) -> list[tuple[str, tuple[int, int]]]:
    """Longest-match-first, non-overlapping dictionary hits with char spans."""
    if not dictionary.entries:
        return []
    return _scan(text, dictionary.match_index())


def find_banned_terms(text: str, surfaces: Iterable[str]) -> list[tuple[str, tuple[int, int]]]:
    """Variant-folded matches for the term-ban check: every class is matched
    case-insensitively, with hyphen/space and plural folding."""
    surfaces = [s for s in surfaces if s]
    if not surfaces:
        return []
    index = _MatchIndex([(s, False) for s in surfaces], force_fold=True)
    return _scan(text, index)


# --- CLI plumbing ------------------------------------------------------------

def load_dictionary(path: str | Path) -> TerminologyDictionary:
    import json

    with open(path, encoding="utf-8") as fh:
        return TerminologyDictionary.from_dict(json.load(fh))


def run_terms(
    passages_path: str | Path,
    freq_path: str | Path,
    out_path: str | Path,
    cfg: TermFilterConfig | None = None,
    tagger: Tagger | None = None,
) -> dict[str, Any]:
    from .gateway.tagger import HeuristicTagger
    from .storage import fingerprint

    cfg = cfg or TermFilterConfig()
    tagger = tagger or HeuristicTagger().tag
    freq_table = ZipfTable.load(freq_path)
    passages = (Passage.from_dict(obj) for _, obj in read_jsonl(passages_path))
    candidates = extract_candidates(passages)
    dictionary = build_dictionary(candidates, cfg, freq_table, tagger)
    dictionary.corpus_fingerprint = fingerprint(passages_path)
    write_json(out_path, dictionary.to_dict())
    return {"candidates": len(candidates), "entries": len(dictionary)}
