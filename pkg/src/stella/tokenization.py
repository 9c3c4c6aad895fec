"""Deterministic tokenization shared by the chunker, the term matcher and BM25.

The default tokenizer splits on Unicode whitespace and detaches leading and
trailing punctuation/symbol characters into their own tokens, so "(CFD),"
yields "(", "CFD", ")", ",".  Interior punctuation is preserved, which keeps
hyphenated compounds such as "Navier-Stokes" as single tokens.  Tokens carry
character offsets into the source text so that any contiguous token span maps
back to a contiguous substring.

The tokenizer is pluggable: anything implementing :class:`Tokenizer` can be
passed to the chunker or to ``count_tokens`` (e.g. a subword tokenizer whose
units carry a weight > 1).
"""

from __future__ import annotations

import re
import unicodedata
from dataclasses import dataclass
from typing import Protocol


@dataclass(frozen=True)
class Token:
    text: str
    start: int  # char offset into the source text, inclusive
    end: int    # exclusive

    def __str__(self) -> str:
        return self.text


class Tokenizer(Protocol):
    def tokenize(self, text: str) -> list[Token]: ...

    def weight(self, token: Token) -> int:
        """Token-count contribution of one unit (1 for word-level tokenizers)."""
        ...


_WS_RUN = re.compile(r"\S+")


def _is_punct(ch: str) -> bool:
    return unicodedata.category(ch)[0] in ("P", "S")


class WhitespaceTokenizer:
    """Unicode-whitespace split with edge punctuation detached."""

    def tokenize(self, text: str) -> list[Token]:
        tokens: list[Token] = []
        for m in _WS_RUN.finditer(text):
            run, start = m.group(), m.start()
            core_lo, core_hi = 0, len(run)
            while core_lo < core_hi and _is_punct(run[core_lo]):
                core_lo += 1
            while core_hi > core_lo and _is_punct(run[core_hi - 1]):
                core_hi -= 1
            if core_lo == core_hi:
                # run is pure punctuation/symbols; keep it whole
                tokens.append(Token(run, start, start + len(run)))
                continue
            for i in range(core_lo):
                tokens.append(Token(run[i], start + i, start + i + 1))
            tokens.append(Token(run[core_lo:core_hi], start + core_lo, start + core_hi))
            for i in range(core_hi, len(run)):
                tokens.append(Token(run[i], start + i, start + i + 1))
        return tokens

    def weight(self, token: Token) -> int:
        return 1


DEFAULT_TOKENIZER = WhitespaceTokenizer()

_CONTROL = re.compile(r"[\x00-\x08\x0b\x0c\x0e-\x1f\x7f]")
_HSPACE = re.compile(r"[ \t ]+")
_SPACE_AROUND_NL = re.compile(r" ?\n ?")
_MANY_NL = re.compile(r"\n{3,}")


def normalize_text(text: str) -> str:
    """Collapse whitespace runs while preserving line/paragraph structure.

    Control characters are stripped, horizontal whitespace collapses to a
    single space, and runs of 3+ newlines collapse to a paragraph break.
    """
    text = text.replace("\r\n", "\n").replace("\r", "\n")
    text = _CONTROL.sub("", text)
    text = _HSPACE.sub(" ", text)
    text = _SPACE_AROUND_NL.sub("\n", text)
    text = _MANY_NL.sub("\n\n", text)
    return text.strip()


def count_tokens(text: str, tokenizer: Tokenizer | None = None) -> int:
    """Number of tokens under the given tokenizer (default: whitespace+punct)."""
    tok = tokenizer or DEFAULT_TOKENIZER
    return sum(tok.weight(t) for t in tok.tokenize(text))


def analyzer_terms(text: str) -> list[str]:
    """Lowercased index terms: whitespace tokens with punctuation detached.

    Pure punctuation tokens carry no lexical signal and are dropped.
    """
    out = []
    for t in DEFAULT_TOKENIZER.tokenize(text):
        if all(_is_punct(c) for c in t.text):
            continue
        out.append(t.text.lower())
    return out
