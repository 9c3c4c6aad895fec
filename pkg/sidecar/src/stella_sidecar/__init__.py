"""HTTP sidecar serving POS tags and sentence embeddings."""

__version__ = "0.1.0"
