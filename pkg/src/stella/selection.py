"""Candidate passage selection: density filter, intent pools, k-medoids.

The clustering is PAM under cosine distance: greedy BUILD seeding followed by
steepest-descent SWAP until no swap lowers the total deviation.  Because a
single BUILD start can land in a 1-swap local optimum, the search also runs
``restarts`` seeded random starts and keeps the best result; on small inputs
this reliably reaches the exhaustive-search optimum.  Given the seed the
whole procedure is deterministic, and all ties break toward the lowest
index, so results are stable across runs and platforms.
"""

from __future__ import annotations

import enum
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Iterable, NamedTuple, Sequence

import numpy as np

from .chunking import Passage
from .errors import PoolTooSmall, TooFewPoints, UnparseableIntent
from .gateway import ChatRequest, EmbeddingVector, Gateway
from .prompts import render
from .terminology import TerminologyDictionary, find_terms_in

log = logging.getLogger(__name__)


class IntentLabel(str, enum.Enum):
    DEF = "Def"
    NUM = "Num"
    PROC = "Proc"
    COMP = "Comp"
    ANOM = "Anom"

    @property
    def display(self) -> str:
        return INTENT_DISPLAY[self]


INTENT_DISPLAY = {
    IntentLabel.DEF: "Definition / Principle",
    IntentLabel.NUM: "Numerical / Specification",
    IntentLabel.PROC: "Procedure / Operation",
    IntentLabel.COMP: "Comparison / Trade-off",
    IntentLabel.ANOM: "Anomaly / Risk",
}
DISPLAY_TO_INTENT = {v.lower(): k for k, v in INTENT_DISPLAY.items()}


@dataclass
class ClusterConfig:
    k: int = 5
    per_medoid: int = 20
    distance: str = "cosine"
    seed: int = 0
    restarts: int = 8

    def __post_init__(self):
        if self.k < 1 or self.per_medoid < 1:
            raise ValueError("k and per_medoid must be positive")
        if self.distance != "cosine":
            raise ValueError("only cosine distance is supported")
        if self.restarts < 0:
            raise ValueError("restarts must be non-negative")

    @property
    def per_intent(self) -> int:
        return self.k * self.per_medoid


@dataclass
class CandidatePassage:
    passage: Passage
    intent: IntentLabel
    distinct_terms: list[str]
    embedding: EmbeddingVector
    medoid_id: int = -1
    rank_to_medoid: int = -1

    def to_dict(self) -> dict[str, Any]:
        return {
            "passage": self.passage.to_dict(),
            "intent": self.intent.value,
            "distinct_terms": self.distinct_terms,
            "embedding": list(self.embedding.values),
            "embedding_provider": self.embedding.provider_id,
            "medoid_id": self.medoid_id,
            "rank_to_medoid": self.rank_to_medoid,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "CandidatePassage":
        return cls(
            passage=Passage.from_dict(d["passage"]),
            intent=IntentLabel(d["intent"]),
            distinct_terms=list(d["distinct_terms"]),
            embedding=EmbeddingVector(
                values=tuple(d["embedding"]), provider_id=d.get("embedding_provider", "")
            ),
            medoid_id=int(d.get("medoid_id", -1)),
            rank_to_medoid=int(d.get("rank_to_medoid", -1)),
        )


# --- density filter -----------------------------------------------------------

def distinct_terms(passage: Passage, dictionary: TerminologyDictionary) -> list[str]:
    """Sorted distinct dictionary surfaces found in the passage."""
    return sorted({surface for surface, _ in find_terms_in(passage.text, dictionary)})


def density_filter(
    passages: Iterable[Passage],
    dictionary: TerminologyDictionary,
    min_distinct: int = 5,
) -> list[Passage]:
    """Keep passages containing at least `min_distinct` distinct terms."""
    return [p for p in passages if len(distinct_terms(p, dictionary)) >= min_distinct]


# --- intent classification ------------------------------------------------------

def parse_intent_response(text: str) -> IntentLabel | None:
    """Exact display-string match first, then unique substring match."""
    cleaned = text.strip().strip('."\'' )
    label = DISPLAY_TO_INTENT.get(cleaned.lower())
    if label is not None:
        return label
    low = text.lower()
    hits = [intent for display, intent in DISPLAY_TO_INTENT.items() if display in low]
    if len(hits) == 1:
        return hits[0]
    return None


def classify_intent(passage: Passage, gateway: Gateway) -> IntentLabel:
    """One classification call plus a single repair re-prompt on parse failure."""
    prompt = render("intent_classification", passage_text=passage.text)
    req = ChatRequest(
        system_prompt="Answer precisely in the requested format.",
        user_prompt=prompt,
        temperature=0.0,
        max_output_tokens=64,
    )
    response = gateway.chat(req)
    label = parse_intent_response(response)
    if label is not None:
        return label
    retry = ChatRequest(
        system_prompt=req.system_prompt,
        user_prompt=(
            f"{prompt}\n\nYour previous answer {response!r} did not match any of the 5 "
            "intent names. Answer with exactly one of the 5 intent names."
        ),
        temperature=0.0,
        max_output_tokens=64,
    )
    response = gateway.chat(retry)
    label = parse_intent_response(response)
    if label is None:
        raise UnparseableIntent(f"unparseable intent for {passage.passage_id}: {response!r}")
    return label


def classify_pool(
    passages: Sequence[Passage],
    gateway: Gateway,
    max_workers: int = 8,
) -> tuple[dict[IntentLabel, list[Passage]], list[str]]:
    """Bounded-concurrency classification into the five intent pools.

    Returns the pools plus passage_ids excluded as unparseable.
    """
    pools: dict[IntentLabel, list[Passage]] = {intent: [] for intent in IntentLabel}
    excluded: list[str] = []
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        results = list(pool.map(lambda p: _classify_safe(p, gateway), passages))
    for passage, label in zip(passages, results):
        if label is None:
            excluded.append(passage.passage_id)
        else:
            pools[label].append(passage)
    return pools, excluded


def _classify_safe(passage: Passage, gateway: Gateway) -> IntentLabel | None:
    try:
        return classify_intent(passage, gateway)
    except UnparseableIntent as exc:
        log.warning("%s", exc)
        return None


# --- k-medoids (PAM) ------------------------------------------------------------

class KMedoidsResult(NamedTuple):
    medoid_indices: list[int]
    assignment: list[int]
    total_deviation: float


def cosine_distance_matrix(vectors: Sequence[EmbeddingVector]) -> np.ndarray:
    x = np.asarray([v.values for v in vectors], dtype=np.float64)
    norms = np.linalg.norm(x, axis=1, keepdims=True)
    x = x / norms
    d = 1.0 - x @ x.T
    np.clip(d, 0.0, 2.0, out=d)
    np.fill_diagonal(d, 0.0)
    return d


def kmedoids(vectors: Sequence[EmbeddingVector], cfg: ClusterConfig) -> KMedoidsResult:
    """PAM with multi-start: greedy BUILD plus seeded random restarts, each
    refined by steepest-descent SWAP; the lowest total deviation wins."""
    import random as _random

    n = len(vectors)
    if n < cfg.k:
        raise TooFewPoints(f"{n} points for k={cfg.k}")
    dims = {v.dim for v in vectors}
    if len(dims) != 1:
        raise ValueError(f"inconsistent embedding dimensions {sorted(dims)}")
    d = cosine_distance_matrix(vectors)
    starts = [_pam_build(d, cfg.k)]
    rng = _random.Random(cfg.seed)
    for _ in range(cfg.restarts if n > cfg.k else 0):
        starts.append(sorted(rng.sample(range(n), cfg.k)))
    best_medoids: list[int] | None = None
    best_total = float("inf")
    for start in starts:
        medoids = _pam_swap(d, list(start))
        total = float(d[:, medoids].min(axis=1).sum())
        if total < best_total - 1e-12:
            best_medoids, best_total = medoids, total
    assert best_medoids is not None
    assignment = np.argmin(d[:, best_medoids], axis=1)
    total = float(d[np.arange(n), np.asarray(best_medoids)[assignment]].sum())
    return KMedoidsResult(list(best_medoids), [int(a) for a in assignment], total)


def _pam_build(d: np.ndarray, k: int) -> list[int]:
    n = d.shape[0]
    # first medoid: lowest total distance, lowest index on ties (argmin is first)
    totals = d.sum(axis=0)
    medoids = [int(np.argmin(totals))]
    nearest = d[:, medoids[0]].copy()
    while len(medoids) < k:
        best_gain, best_c = -1.0, -1
        for c in range(n):
            if c in medoids:
                continue
            gain = float(np.maximum(nearest - d[:, c], 0.0).sum())
            if gain > best_gain + 1e-12:
                best_gain, best_c = gain, c
        medoids.append(best_c)
        nearest = np.minimum(nearest, d[:, best_c])
    return medoids


def _pam_swap(d: np.ndarray, medoids: list[int]) -> list[int]:
    n = d.shape[0]
    medoids = list(medoids)
    while True:
        med = np.asarray(medoids)
        dist_to_meds = d[:, med]                       # n x k
        order = np.argsort(dist_to_meds, axis=1, kind="stable")
        nearest_pos = order[:, 0]
        nearest = dist_to_meds[np.arange(n), nearest_pos]
        if len(medoids) > 1:
            second = dist_to_meds[np.arange(n), order[:, 1]]
        else:
            second = np.full(n, np.inf)
        current = float(nearest.sum())
        best_delta, best_swap = -1e-12, None
        for mi in range(len(medoids)):
            affected = nearest_pos == mi
            base = np.where(affected, second, nearest)
            for h in range(n):
                if h in medoids:
                    continue
                new_total = float(np.minimum(base, d[:, h]).sum())
                delta = current - new_total
                if delta > best_delta + 1e-12:
                    best_delta, best_swap = delta, (mi, h)
        if best_swap is None:
            return medoids
        mi, h = best_swap
        medoids[mi] = h


# --- representative selection ----------------------------------------------------

@dataclass
class SelectionResult:
    candidates: list[CandidatePassage]
    backfilled: int = 0
    flagged: bool = False
    clustering: KMedoidsResult | None = None


def select_representatives(
    pool: Sequence[tuple[Passage, EmbeddingVector]],
    intent: IntentLabel,
    cfg: ClusterConfig,
    terms_by_passage: dict[str, list[str]] | None = None,
) -> SelectionResult:
    """Nearest `per_medoid` pool members per medoid, medoid itself at rank 0.

    Clusters are disjoint, so nothing is selected twice; undersized clusters
    are topped up from the nearest not-yet-selected passages pool-wide and the
    intent pool is flagged.
    """
    if len(pool) < cfg.per_intent:
        raise PoolTooSmall(
            f"intent {intent.value}: pool of {len(pool)} < {cfg.per_intent} required"
        )
    terms_by_passage = terms_by_passage or {}
    vectors = [vec for _, vec in pool]
    result = kmedoids(vectors, cfg)
    d = cosine_distance_matrix(vectors)
    assignment = np.asarray(result.assignment)

    chosen: dict[int, tuple[int, int]] = {}   # pool index -> (medoid_id, rank)
    backfill_total = 0
    for cluster_id, medoid_idx in enumerate(result.medoid_indices):
        members = np.flatnonzero(assignment == cluster_id)
        # nearest-first, lowest index on ties; the medoid has distance 0;
        # members consumed as backfill by an earlier cluster are gone
        ordered = [int(i) for i in sorted(members, key=lambda i: (d[i, medoid_idx], i))
                   if int(i) not in chosen]
        take = ordered[: cfg.per_medoid]
        for rank, i in enumerate(take):
            chosen[int(i)] = (cluster_id, rank)
        shortfall = cfg.per_medoid - len(take)
        if shortfall > 0:
            others = [i for i in np.argsort(d[:, medoid_idx], kind="stable")
                      if int(i) not in chosen]
            for extra_rank, i in enumerate(others[:shortfall]):
                chosen[int(i)] = (cluster_id, len(take) + extra_rank)
            backfill_total += shortfall
            log.warning(
                "intent %s cluster %d: backfilled %d of %d",
                intent.value, cluster_id, shortfall, cfg.per_medoid,
            )

    candidates = []
    for i in sorted(chosen):
        medoid_id, rank = chosen[i]
        passage, vec = pool[i]
        candidates.append(
            CandidatePassage(
                passage=passage,
                intent=intent,
                distinct_terms=terms_by_passage.get(passage.passage_id, []),
                embedding=vec,
                medoid_id=medoid_id,
                rank_to_medoid=rank,
            )
        )
    return SelectionResult(
        candidates=candidates,
        backfilled=backfill_total,
        flagged=backfill_total > 0,
        clustering=result,
    )
