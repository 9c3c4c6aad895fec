"""Built-in heuristic POS tagger used when no tagging sidecar is configured.

Collapses tagging to the 3-value scheme the pipeline needs (NOUN, PROPN,
OTHER).  Rules, in order:

1. all-caps rule: a token made of uppercase letters and digits with at least
   two letters is PROPN regardless of position (acronyms: "MODIS", "RSRM").
2. capitalization rule: a capitalized token that is not sentence-initial is
   PROPN.
3. word-list rule: a token in ``data/known_nouns.txt`` (Greek letter names
   and short technical heads the suffix rules miss) is NOUN.
4. suffix rule: a token ending in one of the nominal suffixes listed in
   ``data/noun_suffixes.txt`` is NOUN.
5. everything else is OTHER.

Sentence-initial positions are the first token and any token following a
terminal punctuation token.
"""

from __future__ import annotations

import re
from functools import lru_cache
from importlib import resources

NOUN = "NOUN"
PROPN = "PROPN"
OTHER = "OTHER"

_ALL_CAPS = re.compile(r"^(?=(?:[^A-Z]*[A-Z]){2})[A-Z0-9][A-Z0-9-]*$")
_CAPITALIZED = re.compile(r"^[A-Z][a-z]")
_TERMINAL = re.compile(r"[.!?]$")


def _data_lines(name: str) -> list[str]:
    raw = resources.files("stella.gateway").joinpath(f"data/{name}").read_text("utf-8")
    return [ln.strip() for ln in raw.splitlines() if ln.strip() and not ln.startswith("#")]


@lru_cache(maxsize=1)
def noun_suffixes() -> tuple[str, ...]:
    return tuple(sorted(_data_lines("noun_suffixes.txt"), key=len, reverse=True))


@lru_cache(maxsize=1)
def known_nouns() -> frozenset[str]:
    return frozenset(_data_lines("known_nouns.txt"))


def _has_noun_suffix(token: str) -> bool:
    low = token.lower()
    return any(low.endswith(s) and len(low) >= len(s) + 2 for s in noun_suffixes())


class HeuristicTagger:
    """Deterministic fallback tagger; rules frozen alongside the suffix table."""

    def tag(self, tokens: list[str]) -> list[str]:
        if not tokens:
            raise ValueError("tokens must be non-empty")
        tags: list[str] = []
        sentence_initial = True
        for token in tokens:
            if not isinstance(token, str) or not token.strip():
                raise ValueError("tokens must be non-empty strings")
            tags.append(self.tag_one(token, sentence_initial=sentence_initial))
            sentence_initial = bool(_TERMINAL.search(token))
        return tags

    def tag_one(self, token: str, sentence_initial: bool = False) -> str:
        word = token.strip().strip(".,;:!?()[]\"'")
        if not word:
            return OTHER
        if _ALL_CAPS.match(word):
            return PROPN
        if not sentence_initial and _CAPITALIZED.match(word):
            return PROPN
        if word.lower() in known_nouns():
            return NOUN
        if _has_noun_suffix(word):
            return NOUN
        return OTHER
