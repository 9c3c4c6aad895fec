"""HTTP JSON backends for chat, embedding and tagging providers.

Each backend maps one provider profile (request shape, response path, auth
header) onto the single-attempt backend interface; retries and rate limiting
live in the Gateway.  Two chat styles are supported:

* ``openai``: `{model, messages, temperature, max_tokens}` with the text at
  `choices[0].message.content`.
* ``simple``: `{system, user, temperature, max_output_tokens}` with the text
  at `text` (the shape served by lightweight internal endpoints).

Embedding styles: ``openai`` (`{model, input}` -> `data[*].embedding`) and
``sidecar`` (`{texts}` -> `{vectors}`).  Tagging only has the ``sidecar``
style (`{tokens}` -> `{tags}`).
"""

from __future__ import annotations

from typing import Any

import requests

from ..errors import MalformedResponse, RateLimited, TransportError
from .types import ChatRequest, GatewayConfig


def _post_json(url: str, payload: dict, config: GatewayConfig, auth_header: str = "Authorization",
               auth_scheme: str = "Bearer") -> dict[str, Any]:
    headers = {"Content-Type": "application/json"}
    if config.api_key:
        value = f"{auth_scheme} {config.api_key}" if auth_scheme else config.api_key
        headers[auth_header] = value
    try:
        resp = requests.post(url, json=payload, headers=headers,
                             timeout=config.timeout_ms / 1000.0)
    except requests.Timeout as exc:
        raise TransportError(f"timeout calling {url}") from exc
    except requests.RequestException as exc:
        raise TransportError(f"request to {url} failed: {exc}") from exc
    if resp.status_code == 429:
        raise RateLimited(f"{url} returned 429")
    if resp.status_code >= 500:
        raise TransportError(f"{url} returned {resp.status_code}")
    if resp.status_code != 200:
        raise TransportError(f"{url} returned {resp.status_code}: {resp.text[:200]}")
    try:
        return resp.json()
    except ValueError as exc:
        raise MalformedResponse(f"{url} returned non-JSON body") from exc


class HttpChatBackend:
    def __init__(self, config: GatewayConfig):
        self.config = config

    def complete(self, req: ChatRequest) -> str:
        cfg = self.config
        if cfg.style == "openai":
            payload: dict[str, Any] = {
                "model": cfg.model_id,
                "messages": [
                    {"role": "system", "content": req.system_prompt},
                    {"role": "user", "content": req.user_prompt},
                ],
                "temperature": req.temperature,
                "max_tokens": req.max_output_tokens,
            }
            if req.response_format == "json_object":
                payload["response_format"] = {"type": "json_object"}
            body = _post_json(cfg.endpoint_url, payload, cfg)
            try:
                return body["choices"][0]["message"]["content"]
            except (KeyError, IndexError, TypeError) as exc:
                raise MalformedResponse("missing choices[0].message.content") from exc
        payload = {
            "system": req.system_prompt,
            "user": req.user_prompt,
            "temperature": req.temperature,
            "max_output_tokens": req.max_output_tokens,
            "response_format": req.response_format,
        }
        body = _post_json(cfg.endpoint_url, payload, cfg)
        text = body.get("text")
        if not isinstance(text, str):
            raise MalformedResponse("missing 'text' field in response")
        return text


class HttpEmbedBackend:
    def __init__(self, config: GatewayConfig):
        self.config = config
        self.provider_id = config.model_id or config.endpoint_url

    def embed(self, texts: list[str]) -> list[list[float]]:
        cfg = self.config
        if cfg.style == "openai":
            body = _post_json(cfg.endpoint_url, {"model": cfg.model_id, "input": texts}, cfg)
            try:
                return [row["embedding"] for row in body["data"]]
            except (KeyError, TypeError) as exc:
                raise MalformedResponse("missing data[*].embedding") from exc
        body = _post_json(cfg.endpoint_url, {"texts": texts}, cfg)
        vectors = body.get("vectors")
        if not isinstance(vectors, list):
            raise MalformedResponse("missing 'vectors' field in response")
        return vectors


class HttpTagBackend:
    def __init__(self, config: GatewayConfig):
        self.config = config

    def tag(self, tokens: list[str]) -> list[str]:
        body = _post_json(self.config.endpoint_url, {"tokens": tokens}, self.config)
        tags = body.get("tags")
        if not isinstance(tags, list):
            raise MalformedResponse("missing 'tags' field in response")
        return tags
