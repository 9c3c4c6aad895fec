"""Build Gateway instances from configuration profiles.

A profile group has up to three sections (chat, embed, tagger), each naming a
backend kind plus its connection settings.  API keys come from the named
environment variable, never from the config file itself.  ``mock=True``
swaps every section for the deterministic offline backends.
"""

from __future__ import annotations

import os
from typing import Any

from ..errors import ConfigError
from .clients import Gateway
from .http import HttpChatBackend, HttpEmbedBackend, HttpTagBackend
from .mock import HashEmbedder
from .simulated import SimulatedModelClient
from .types import GatewayConfig


def _gateway_config(section: dict[str, Any]) -> GatewayConfig:
    api_key = ""
    env_name = section.get("api_key_env")
    if env_name:
        api_key = os.environ.get(env_name, "")
    return GatewayConfig(
        endpoint_url=section.get("endpoint_url", ""),
        api_key=api_key,
        max_concurrent=section.get("max_concurrent", 4),
        retry_limit=section.get("retry_limit", 3),
        backoff_base_ms=section.get("backoff_base_ms", 250),
        timeout_ms=section.get("timeout_ms", 60_000),
        style=section.get("style", "simple"),
        model_id=section.get("model_id", ""),
        max_batch=section.get("max_batch", 64),
    )


def build_gateway(
    profiles: dict[str, Any] | None,
    mock: bool = False,
    seed: int = 0,
) -> Gateway:
    """Assemble chat/embed/tagger backends per the profile group."""
    profiles = profiles or {}
    chat_section = profiles.get("chat", {})
    embed_section = profiles.get("embed", {})
    tagger_section = profiles.get("tagger", {})

    if mock:
        return Gateway(
            chat_backend=SimulatedModelClient(seed=seed),
            embed_backend=HashEmbedder(dim=embed_section.get("dim", 64)),
            tag_backend=None,
            config=_gateway_config(chat_section),
            jitter_seed=seed,
        )

    chat_kind = chat_section.get("kind", "none")
    if chat_kind in ("openai", "simple", "http"):
        cfg = _gateway_config(chat_section)
        if not cfg.endpoint_url:
            raise ConfigError("chat profile needs endpoint_url")
        chat_backend = HttpChatBackend(cfg)
    elif chat_kind == "simulated":
        chat_backend = SimulatedModelClient(seed=seed)
    elif chat_kind == "none":
        chat_backend = None
    else:
        raise ConfigError(f"unknown chat backend kind {chat_kind!r}")

    embed_kind = embed_section.get("kind", "hash")
    if embed_kind in ("openai", "sidecar", "http"):
        cfg = _gateway_config(embed_section)
        if not cfg.endpoint_url:
            raise ConfigError("embed profile needs endpoint_url")
        embed_backend = HttpEmbedBackend(cfg)
    elif embed_kind == "hash":
        embed_backend = HashEmbedder(dim=embed_section.get("dim", 64))
    else:
        raise ConfigError(f"unknown embed backend kind {embed_kind!r}")

    tagger_kind = tagger_section.get("kind", "heuristic")
    if tagger_kind == "sidecar":
        cfg = _gateway_config(tagger_section)
        if not cfg.endpoint_url:
            raise ConfigError("tagger profile needs endpoint_url")
        tag_backend = HttpTagBackend(cfg)
    elif tagger_kind == "heuristic":
        tag_backend = None
    else:
        raise ConfigError(f"unknown tagger backend kind {tagger_kind!r}")

    return Gateway(
        chat_backend=chat_backend,
        embed_backend=embed_backend,
        tag_backend=tag_backend,
        config=_gateway_config(chat_section),
        jitter_seed=seed,
    )
