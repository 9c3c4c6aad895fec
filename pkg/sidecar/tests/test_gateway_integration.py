"""Integration: the pipeline gateway talking to a live sidecar over HTTP."""

from __future__ import annotations

import socket
import threading
import time

import numpy as np
import pytest
import uvicorn

from stella.gateway import Gateway, GatewayConfig
from stella.gateway.http import HttpEmbedBackend, HttpTagBackend

from stella_sidecar.app import Settings, create_app


class LiveServer:
    def __init__(self, settings: Settings):
        sock = socket.socket()
        sock.bind(("127.0.0.1", 0))
        self.port = sock.getsockname()[1]
        sock.close()
        config = uvicorn.Config(create_app(settings), host="127.0.0.1", port=self.port,
                                log_level="warning")
        self.server = uvicorn.Server(config)
        self.thread = threading.Thread(target=self.server.run, daemon=True)

    def __enter__(self):
        self.thread.start()
        deadline = time.monotonic() + 10
        while not self.server.started:
            if time.monotonic() > deadline:
                raise RuntimeError("sidecar did not start")
            time.sleep(0.02)
        return self

    def __exit__(self, *exc):
        self.server.should_exit = True
        self.thread.join(timeout=10)

    def url(self, path: str) -> str:
        return f"http://127.0.0.1:{self.port}{path}"


@pytest.fixture(scope="module")
def live():
    with LiveServer(Settings(embed_dim=32, auth_token="integration-token")) as server:
        yield server


def make_gateway(live):
    tag_cfg = GatewayConfig(endpoint_url=live.url("/tag"), api_key="integration-token",
                            timeout_ms=10_000)
    embed_cfg = GatewayConfig(endpoint_url=live.url("/embed"), api_key="integration-token",
                              style="sidecar", timeout_ms=10_000)
    return Gateway(
        embed_backend=HttpEmbedBackend(embed_cfg),
        tag_backend=HttpTagBackend(tag_cfg),
        config=GatewayConfig(),
        sleep=lambda s: None,
    )


def test_gateway_pos_tag_against_live_sidecar(live):
    gateway = make_gateway(live)
    tags = gateway.pos_tag(["the", "propellant", "ignites", "RSRM"])
    assert len(tags) == 4
    assert tags[1] == "NOUN"
    assert tags[3] == "PROPN"


def test_gateway_embed_against_live_sidecar(live):
    gateway = make_gateway(live)
    vectors = gateway.embed(["first text", "second text", "first text"])
    assert len(vectors) == 3
    assert vectors[0].dim == 32
    assert vectors[0].values == vectors[2].values
    for v in vectors:
        assert abs(np.linalg.norm(v.values) - 1.0) < 1e-6


def test_gateway_auth_rejected_without_token(live):
    tag_cfg = GatewayConfig(endpoint_url=live.url("/tag"), timeout_ms=10_000)
    gateway = Gateway(tag_backend=HttpTagBackend(tag_cfg),
                      config=GatewayConfig(retry_limit=1), sleep=lambda s: None)
    from stella.errors import TransportError

    with pytest.raises(TransportError):
        gateway.pos_tag(["x"])


def test_concurrent_requests(live):
    gateway = make_gateway(live)
    results: list[list[str]] = [None] * 8

    def work(i):
        results[i] = gateway.pos_tag(["token", f"Word{i}"])

    threads = [threading.Thread(target=work, args=(i,)) for i in range(8)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert all(r is not None and len(r) == 2 for r in results)
