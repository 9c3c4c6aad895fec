"""Uniform client layer for chat, embedding and POS-tagging services."""

from .types import ChatRequest, EmbeddingVector, GatewayConfig
from .clients import Gateway
from .mock import ScriptedChatClient, HashEmbedder
from .tagger import HeuristicTagger

__all__ = [
    "ChatRequest",
    "EmbeddingVector",
    "GatewayConfig",
    "Gateway",
    "ScriptedChatClient",
    "HashEmbedder",
    "HeuristicTagger",
]
