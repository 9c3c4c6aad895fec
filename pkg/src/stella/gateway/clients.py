"""The Gateway facade: retries, rate limiting, JSON enforcement, call log.

Backends are minimal single-attempt interfaces; the Gateway owns the retry
budget, jittered exponential backoff, and the admission semaphore.  All
operations are safe to call from multiple worker threads; the only shared
mutable state is the append-only call log.
"""

from __future__ import annotations

import json
import random
import threading
import time
from dataclasses import dataclass, field
from typing import Callable, Protocol, TypeVar

T = TypeVar("T")

from ..errors import DimensionMismatch, MalformedResponse, RateLimited, TransportError
from .tagger import HeuristicTagger
from .types import ChatRequest, EmbeddingVector, GatewayConfig


class ChatBackend(Protocol):
    def complete(self, req: ChatRequest) -> str: ...


class EmbedBackend(Protocol):
    provider_id: str

    def embed(self, texts: list[str]) -> list[list[float]]: ...


class TagBackend(Protocol):
    def tag(self, tokens: list[str]) -> list[str]: ...


@dataclass
class CallRecord:
    op: str
    attempt: int
    ok: bool
    detail: str = ""


@dataclass
class CallLog:
    """Append-only, lock-protected log with in-flight instrumentation."""

    records: list[CallRecord] = field(default_factory=list)
    peak_in_flight: int = 0
    _in_flight: int = 0
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def append(self, record: CallRecord) -> None:
        with self._lock:
            self.records.append(record)

    def enter(self) -> None:
        with self._lock:
            self._in_flight += 1
            self.peak_in_flight = max(self.peak_in_flight, self._in_flight)

    def exit(self) -> None:
        with self._lock:
            self._in_flight -= 1

    def attempts(self, op: str) -> int:
        with self._lock:
            return sum(1 for r in self.records if r.op == op)


class Gateway:
    """Uniform access point for chat, embedding and POS tagging."""

    def __init__(
        self,
        chat_backend: ChatBackend | None = None,
        embed_backend: EmbedBackend | None = None,
        tag_backend: TagBackend | None = None,
        config: GatewayConfig | None = None,
        sleep: Callable[[float], None] = time.sleep,
        jitter_seed: int | None = None,
    ):
        self.config = config or GatewayConfig()
        self._chat = chat_backend
        self._embed = embed_backend
        self._tag = tag_backend
        self._fallback_tagger = HeuristicTagger()
        self._semaphore = threading.BoundedSemaphore(self.config.max_concurrent)
        self._sleep = sleep
        self._rng = random.Random(jitter_seed)
        self.log = CallLog()

    # -- helpers -------------------------------------------------------------

    def _backoff(self, attempt: int) -> None:
        base = self.config.backoff_base_ms / 1000.0
        delay = base * (2 ** (attempt - 1)) * (0.5 + self._rng.random())
        self._sleep(delay)

    def _attempt_loop(self, op: str, once: Callable[[], T]) -> T:
        last: Exception | None = None
        for attempt in range(1, self.config.retry_limit + 1):
            self._semaphore.acquire()
            self.log.enter()
            try:
                result = once()
                self.log.append(CallRecord(op=op, attempt=attempt, ok=True))
                return result
            except (TransportError, RateLimited, MalformedResponse) as exc:
                last = exc
                self.log.append(CallRecord(op=op, attempt=attempt, ok=False, detail=str(exc)))
            finally:
                self.log.exit()
                self._semaphore.release()
            if attempt < self.config.retry_limit:
                self._backoff(attempt)
        assert last is not None
        raise last

    # -- operations ----------------------------------------------------------

    def chat(self, req: ChatRequest) -> str:
        if self._chat is None:
            raise TransportError("no chat backend configured")

        def once() -> str:
            text = self._chat.complete(req)
            if req.response_format == "json_object":
                try:
                    parsed = json.loads(text)
                except json.JSONDecodeError as exc:
                    raise MalformedResponse(f"expected a JSON object: {exc}") from exc
                if not isinstance(parsed, dict):
                    raise MalformedResponse("expected a JSON object, got a different JSON type")
            return text

        return self._attempt_loop("chat", once)

    def embed(self, texts: list[str]) -> list[EmbeddingVector]:
        if self._embed is None:
            raise TransportError("no embedding backend configured")
        if not texts:
            raise ValueError("texts must be non-empty")
        if any(not t for t in texts):
            raise ValueError("texts must all be non-empty")
        if len(texts) > self.config.max_batch:
            raise ValueError(f"batch of {len(texts)} exceeds max_batch {self.config.max_batch}")

        def once() -> list[EmbeddingVector]:
            raw = self._embed.embed(list(texts))
            if len(raw) != len(texts):
                raise DimensionMismatch(
                    f"provider returned {len(raw)} vectors for {len(texts)} texts"
                )
            dims = {len(v) for v in raw}
            if len(dims) != 1:
                raise DimensionMismatch(f"inconsistent dimensions {sorted(dims)}")
            return [
                EmbeddingVector(values=tuple(float(x) for x in v), provider_id=self._embed.provider_id)
                for v in raw
            ]

        return self._attempt_loop("embed", once)

    def pos_tag(self, tokens: list[str]) -> list[str]:
        if not tokens:
            raise ValueError("tokens must be non-empty")
        if any(not isinstance(t, str) or not t.strip() for t in tokens):
            raise ValueError("tokens must be non-empty strings")
        if self._tag is None:
            return self._fallback_tagger.tag(list(tokens))

        def once() -> list[str]:
            tags = self._tag.tag(list(tokens))
            if len(tags) != len(tokens):
                raise MalformedResponse(
                    f"tagger returned {len(tags)} tags for {len(tokens)} tokens"
                )
            return tags

        return self._attempt_loop("pos_tag", once)
