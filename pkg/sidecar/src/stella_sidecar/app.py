"""FastAPI application: /tag, /embed, /healthz.

Handlers are stateless; model objects are loaded once at startup and only
read afterwards, so concurrent requests are safe.  Malformed bodies return
400 (not FastAPI's default 422), oversized batches 413, and a missing model
503.  When an auth token is configured, requests must carry
`Authorization: Bearer <token>`.
"""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass, field

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from .models import HashEmbedder, RuleTagger, SentenceTransformerEmbedder, SpacyTagger

log = logging.getLogger(__name__)


@dataclass
class Settings:
    embed_dim: int = 64
    max_batch: int = 64
    auth_token: str = ""
    spacy_model: str = ""
    st_model: str = ""

    @classmethod
    def from_env(cls) -> "Settings":
        return cls(
            embed_dim=int(os.environ.get("SIDECAR_EMBED_DIM", "64")),
            max_batch=int(os.environ.get("SIDECAR_MAX_BATCH", "64")),
            auth_token=os.environ.get("SIDECAR_AUTH_TOKEN", ""),
            spacy_model=os.environ.get("SIDECAR_SPACY_MODEL", ""),
            st_model=os.environ.get("SIDECAR_ST_MODEL", ""),
        )


class TagRequest(BaseModel):
    tokens: list[str] = Field(min_length=1)


class TagResponse(BaseModel):
    tags: list[str]
    model_id: str


class EmbedRequest(BaseModel):
    texts: list[str] = Field(min_length=1)


class EmbedResponse(BaseModel):
    vectors: list[list[float]]
    model_id: str


def _load_models(settings: Settings):
    tagger = None
    embedder = None
    try:
        tagger = SpacyTagger(settings.spacy_model) if settings.spacy_model else RuleTagger()
    except Exception as exc:  # configured model unavailable -> 503 at request time
        log.error("tagger failed to load: %s", exc)
    try:
        embedder = (SentenceTransformerEmbedder(settings.st_model)
                    if settings.st_model else HashEmbedder(settings.embed_dim))
    except Exception as exc:
        log.error("embedder failed to load: %s", exc)
    return tagger, embedder


def create_app(settings: Settings | None = None) -> FastAPI:
    settings = settings or Settings.from_env()
    app = FastAPI(title="stella-sidecar", version="0.1.0")
    tagger, embedder = _load_models(settings)

    @app.exception_handler(RequestValidationError)
    async def validation_to_400(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content={"detail": exc.errors()})

    def auth_error(request: Request) -> JSONResponse | None:
        if not settings.auth_token:
            return None
        header = request.headers.get("Authorization", "")
        if header == f"Bearer {settings.auth_token}":
            return None
        return JSONResponse(status_code=401, content={"detail": "invalid token"})

    @app.get("/healthz")
    async def healthz():
        return {
            "status": "ok",
            "tagger": getattr(tagger, "model_id", None),
            "embedder": getattr(embedder, "model_id", None),
        }

    @app.post("/tag", response_model=TagResponse)
    async def tag(body: TagRequest, request: Request):
        denied = auth_error(request)
        if denied:
            return denied
        if tagger is None:
            return JSONResponse(status_code=503, content={"detail": "tagger not loaded"})
        if any(not t.strip() for t in body.tokens):
            return JSONResponse(status_code=400, content={"detail": "tokens must be non-empty"})
        return TagResponse(tags=tagger.tag(body.tokens), model_id=tagger.model_id)

    @app.post("/embed", response_model=EmbedResponse)
    async def embed(body: EmbedRequest, request: Request):
        denied = auth_error(request)
        if denied:
            return denied
        if embedder is None:
            return JSONResponse(status_code=503, content={"detail": "embedder not loaded"})
        if len(body.texts) > settings.max_batch:
            return JSONResponse(
                status_code=413,
                content={"detail": f"batch of {len(body.texts)} exceeds {settings.max_batch}"},
            )
        if any(not t for t in body.texts):
            return JSONResponse(status_code=400, content={"detail": "texts must be non-empty"})
        return EmbedResponse(vectors=embedder.embed(body.texts), model_id=embedder.model_id)

    return app
