"""Request/response value types for the model gateway."""

from __future__ import annotations

import math
from dataclasses import dataclass, field


@dataclass(frozen=True)
class ChatRequest:
    system_prompt: str
    user_prompt: str
    temperature: float = 0.0
    max_output_tokens: int = 2048
    response_format: str = "free_text"  # free_text | json_object

    def __post_init__(self):
        if not self.system_prompt.strip():
            raise ValueError("system_prompt must be non-empty")
        if not self.user_prompt.strip():
            raise ValueError("user_prompt must be non-empty")
        if not 0.0 <= self.temperature <= 2.0:
            raise ValueError(f"temperature {self.temperature} outside [0, 2]")
        if self.max_output_tokens < 1:
            raise ValueError("max_output_tokens must be >= 1")
        if self.response_format not in ("free_text", "json_object"):
            raise ValueError(f"unknown response_format {self.response_format!r}")


@dataclass(frozen=True)
class EmbeddingVector:
    values: tuple[float, ...]
    provider_id: str

    def __post_init__(self):
        if not self.values:
            raise ValueError("embedding must be non-empty")
        if not all(math.isfinite(v) for v in self.values):
            raise ValueError("embedding contains non-finite entries")
        if all(v == 0.0 for v in self.values):
            raise ValueError("embedding is the zero vector")

    @property
    def dim(self) -> int:
        return len(self.values)


@dataclass
class GatewayConfig:
    endpoint_url: str = ""
    api_key: str = ""
    max_concurrent: int = 4
    retry_limit: int = 3
    backoff_base_ms: int = 250
    timeout_ms: int = 60_000
    style: str = "simple"       # request/response mapping of the provider
    model_id: str = ""
    max_batch: int = 64
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.max_concurrent < 1:
            raise ValueError("max_concurrent must be >= 1")
        if not 1 <= self.retry_limit <= 10:
            raise ValueError("retry_limit must be in [1, 10]")
        if self.backoff_base_ms < 1:
            raise ValueError("backoff_base_ms must be positive")
        if self.timeout_ms < 1:
            raise ValueError("timeout_ms must be positive")
