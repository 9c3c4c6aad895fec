"""Deterministic offline backends for tests and --mock pipeline runs."""

from __future__ import annotations

import hashlib
import threading

import numpy as np

from ..errors import TransportError
from .types import ChatRequest


class ScriptedChatClient:
    """Replays a fixed list of responses in order.

    Entries may be strings (returned verbatim) or exceptions (raised), which
    makes retry behaviour fully scriptable.  The call log records every
    request received, in order.
    """

    def __init__(self, script: list[str | Exception]):
        self._script = list(script)
        self._pos = 0
        self._lock = threading.Lock()
        self.calls: list[ChatRequest] = []

    def complete(self, req: ChatRequest) -> str:
        with self._lock:
            self.calls.append(req)
            if self._pos >= len(self._script):
                raise TransportError("scripted chat client ran out of responses")
            entry = self._script[self._pos]
            self._pos += 1
        if isinstance(entry, Exception):
            raise entry
        return entry


class HashEmbedder:
    """Maps each text to a fixed unit vector seeded by its SHA-256 digest.

    Deterministic across calls and processes; distinct texts get (nearly
    always) distinct directions, identical texts get identical vectors.
    """

    def __init__(self, dim: int = 8, provider_id: str = "mock-hash"):
        if dim < 1:
            raise ValueError("dim must be positive")
        self.dim = dim
        self.provider_id = provider_id

    def _vector(self, text: str) -> list[float]:
        digest = hashlib.sha256(text.encode("utf-8")).digest()
        seed = int.from_bytes(digest[:8], "big")
        rng = np.random.default_rng(seed)
        v = rng.standard_normal(self.dim)
        v /= np.linalg.norm(v)
        return [float(x) for x in v]

    def embed(self, texts: list[str]) -> list[list[float]]:
        return [self._vector(t) for t in texts]


class FixedEmbedder:
    """Returns pre-assigned vectors per text; unknown texts are an error."""

    def __init__(self, mapping: dict[str, list[float]], provider_id: str = "mock-fixed"):
        self._mapping = dict(mapping)
        self.provider_id = provider_id

    def embed(self, texts: list[str]) -> list[list[float]]:
        out = []
        for t in texts:
            if t not in self._mapping:
                raise TransportError(f"no fixed vector for text {t!r}")
            out.append(list(self._mapping[t]))
        return out


class ScriptedTagBackend:
    """Replays fixed tag lists, one per call."""

    def __init__(self, script: list[list[str]]):
        self._script = list(script)
        self._pos = 0
        self.calls: list[list[str]] = []

    def tag(self, tokens: list[str]) -> list[str]:
        self.calls.append(list(tokens))
        if self._pos >= len(self._script):
            raise TransportError("scripted tagger ran out of responses")
        tags = self._script[self._pos]
        self._pos += 1
        return list(tags)
