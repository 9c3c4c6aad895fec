"""Exception hierarchy shared across pipeline stages.

Every error the pipeline can surface maps onto one of these classes so the
CLI can translate failures into stable exit codes.
"""

from __future__ import annotations


class StellaError(Exception):
    """Base class for all pipeline errors."""

    exit_code = 1


# --- gateway ---------------------------------------------------------------

class TransportError(StellaError):
    """Network failure or timeout that survived the retry budget."""

    exit_code = 10


class RateLimited(TransportError):
    """Provider kept rate-limiting after backoff was exhausted."""

    exit_code = 11


class MalformedResponse(StellaError):
    """A JSON object was required but never obtained within the retry budget."""

    exit_code = 12


class DimensionMismatch(StellaError):
    """Embedding provider returned vectors of inconsistent dimension."""

    exit_code = 13


# --- ingest ----------------------------------------------------------------

class ManifestParseError(StellaError):
    """A manifest line could not be parsed into a document record."""

    exit_code = 20


# --- chunking --------------------------------------------------------------

class EmptyDocument(StellaError):
    """Document has no text left after whitespace normalization."""

    exit_code = 30


# --- terminology -----------------------------------------------------------

class FrequencyTableMissing(StellaError):
    """The general-frequency table required for specificity filtering is absent."""

    exit_code = 40


# --- selection -------------------------------------------------------------

class TooFewPoints(StellaError):
    """Fewer points than clusters requested."""

    exit_code = 50


class PoolTooSmall(StellaError):
    """An intent pool is smaller than the requested representative count."""

    exit_code = 51


class UnparseableIntent(StellaError):
    """Classifier response matched none of the intent names, even after retry."""

    exit_code = 52


# --- query generation ------------------------------------------------------

class ConstraintUnsatisfiable(StellaError):
    """Generation kept violating hard constraints past the repair budget."""

    exit_code = 60


class InvalidScore(StellaError):
    """Judge returned a score outside the 1-5 range."""

    exit_code = 61


# --- cross-lingual ---------------------------------------------------------

class TermPreservationFailure(StellaError):
    """Translation dropped a kept term and repairs did not recover it."""

    exit_code = 70


# --- benchmark io ----------------------------------------------------------

class DuplicateId(StellaError):
    """Corpus or query id occurs more than once."""

    exit_code = 80


class DanglingQrel(StellaError):
    """Qrels row references a query or passage id that does not exist."""

    exit_code = 81


class ParseError(StellaError):
    """Malformed line in a benchmark file; carries the 1-based line number."""

    exit_code = 82

    def __init__(self, message: str, line: int | None = None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


# --- evaluation ------------------------------------------------------------

class UnknownPassage(StellaError):
    """Scoring was asked for a passage that is not in the index."""

    exit_code = 90


class MissingQrels(StellaError):
    """A run query has no relevance judgments."""

    exit_code = 91


class KeyMismatch(StellaError):
    """Prediction and reference maps cover different keys."""

    exit_code = 92


# --- pipeline --------------------------------------------------------------

class MissingArtifact(StellaError):
    """A stage's input artifact does not exist."""

    exit_code = 100


class ConfigError(StellaError):
    """Pipeline configuration is invalid or incomplete."""

    exit_code = 101
