"""Tagging and embedding model wrappers.

The service ships with small deterministic defaults so it runs anywhere: a
rule-based tagger and a hash-seeded unit-vector embedder.  Real models are
configuration: point SIDECAR_SPACY_MODEL at an installed spaCy pipeline or
SIDECAR_ST_MODEL at a sentence-transformers checkpoint and the wrappers load
them lazily, collapsing their native tagsets/vectors onto the wire contract
(3-value tags; unit-normalized vectors of constant dimension).
"""

from __future__ import annotations

import hashlib
import re

import numpy as np

NOUN, PROPN, OTHER = "NOUN", "PROPN", "OTHER"

# Universal POS tagset; anything outside the two nominal classes maps to OTHER,
# so no upstream tag can reach the wire unmapped.
UPOS_TAGS = (
    "ADJ", "ADP", "ADV", "AUX", "CCONJ", "DET", "INTJ", "NOUN", "NUM",
    "PART", "PRON", "PROPN", "PUNCT", "SCONJ", "SYM", "VERB", "X",
)


def map_upos(tag: str) -> str:
    if tag == "NOUN":
        return NOUN
    if tag == "PROPN":
        return PROPN
    return OTHER


_ALL_CAPS = re.compile(r"^(?=(?:[^A-Z]*[A-Z]){2})[A-Z0-9][A-Z0-9-]*$")
_CAPITALIZED = re.compile(r"^[A-Z][a-z]")
_TERMINAL = re.compile(r"[.!?]$")
_NOUN_SUFFIXES = (
    "ability", "ization", "ation", "ology", "ometry", "sphere", "meter",
    "tion", "sion", "ment", "ness", "ance", "ence", "ancy", "ency", "ship",
    "hood", "ity", "ism", "ist", "ure", "age", "ics", "ant", "ent", "ide",
    "ine", "ane", "ene",
)
_KNOWN_NOUNS = frozenset(
    "alpha beta gamma delta epsilon zeta eta theta iota kappa lambda mu nu xi "
    "omicron pi rho sigma tau upsilon phi chi psi omega ray wave field flux "
    "force mass heat flow beam cell core fuel gas ion orbit phase pulse stage "
    "thrust valve vector".split()
)


class RuleTagger:
    """Deterministic fallback tagger mirroring common nominal signals."""

    model_id = "rule-tagger"

    def tag(self, tokens: list[str]) -> list[str]:
        tags = []
        sentence_initial = True
        for token in tokens:
            word = token.strip().strip(".,;:!?()[]\"'")
            if not word:
                tags.append(OTHER)
            elif _ALL_CAPS.match(word):
                tags.append(PROPN)
            elif not sentence_initial and _CAPITALIZED.match(word):
                tags.append(PROPN)
            elif word.lower() in _KNOWN_NOUNS:
                tags.append(NOUN)
            elif any(word.lower().endswith(s) and len(word) >= len(s) + 2
                     for s in _NOUN_SUFFIXES):
                tags.append(NOUN)
            else:
                tags.append(OTHER)
            sentence_initial = bool(_TERMINAL.search(token))
        return tags


class SpacyTagger:
    def __init__(self, model_name: str):
        import spacy

        self.model_id = f"spacy:{model_name}"
        self._nlp = spacy.load(model_name, disable=["parser", "ner", "lemmatizer"])

    def tag(self, tokens: list[str]) -> list[str]:
        from spacy.tokens import Doc

        doc = Doc(self._nlp.vocab, words=tokens)
        for _, component in self._nlp.pipeline:
            doc = component(doc)
        return [map_upos(t.pos_) for t in doc]


class HashEmbedder:
    """Unit vectors seeded by the text digest; stable across processes."""

    def __init__(self, dim: int = 64):
        if dim < 1:
            raise ValueError("dim must be positive")
        self.dim = dim
        self.model_id = f"hash-{dim}"

    def embed(self, texts: list[str]) -> list[list[float]]:
        out = []
        for text in texts:
            seed = int.from_bytes(
                hashlib.sha256(text.encode("utf-8")).digest()[:8], "big"
            )
            v = np.random.default_rng(seed).standard_normal(self.dim)
            v /= np.linalg.norm(v)
            out.append([float(x) for x in v])
        return out


class SentenceTransformerEmbedder:
    def __init__(self, model_name: str):
        from sentence_transformers import SentenceTransformer

        self.model_id = f"st:{model_name}"
        self._model = SentenceTransformer(model_name)
        self.dim = self._model.get_sentence_embedding_dimension()

    def embed(self, texts: list[str]) -> list[list[float]]:
        vectors = self._model.encode(texts, normalize_embeddings=True)
        return [[float(x) for x in v] for v in vectors]
