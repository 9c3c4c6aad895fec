"""Ranking and classification metrics: nDCG@k and multiclass F1."""

from __future__ import annotations

import math
from typing import Any, Mapping, Sequence

from ..errors import KeyMismatch, MissingQrels

RunResult = Mapping[str, Sequence[tuple[str, float]]]   # query_id -> ranked (pid, score)


def ndcg_for_ranking(ranked_ids: Sequence[str], relevant: set[str], k: int = 10) -> float:
    """Binary-relevance nDCG@k for one query."""
    dcg = 0.0
    for i, pid in enumerate(ranked_ids[:k], start=1):
        if pid in relevant:
            dcg += 1.0 / math.log2(i + 1)
    ideal_hits = min(len(relevant), k)
    if ideal_hits == 0:
        return 0.0
    idcg = sum(1.0 / math.log2(i + 1) for i in range(1, ideal_hits + 1))
    return dcg / idcg


def ndcg_at_k(
    run: RunResult,
    qrels: Mapping[str, str | set[str]],
    k: int = 10,
) -> tuple[dict[str, float], float]:
    """Per-query nDCG@k and the mean over run queries.

    qrels values may be a single passage_id (this benchmark's one-positive
    convention) or a set of them.
    """
    per_query: dict[str, float] = {}
    for query_id, ranking in run.items():
        if query_id not in qrels:
            raise MissingQrels(f"no judgments for query {query_id}")
        rel = qrels[query_id]
        relevant = {rel} if isinstance(rel, str) else set(rel)
        per_query[query_id] = ndcg_for_ranking([pid for pid, _ in ranking], relevant, k)
    mean = sum(per_query.values()) / len(per_query) if per_query else 0.0
    return per_query, mean


def f1_validate(
    predictions: Mapping[str, Any],
    reference: Mapping[str, Any],
) -> dict[str, Any]:
    """Micro/macro F1 of predicted labels against reference labels."""
    if set(predictions) != set(reference):
        missing = set(reference) ^ set(predictions)
        raise KeyMismatch(f"prediction/reference keys differ on {sorted(missing)[:5]}")
    labels = sorted({str(v) for v in reference.values()} | {str(v) for v in predictions.values()})
    tp: dict[str, int] = {c: 0 for c in labels}
    fp: dict[str, int] = {c: 0 for c in labels}
    fn: dict[str, int] = {c: 0 for c in labels}
    support: dict[str, int] = {c: 0 for c in labels}
    for key, ref in reference.items():
        ref, pred = str(ref), str(predictions[key])
        support[ref] += 1
        if pred == ref:
            tp[ref] += 1
        else:
            fp[pred] += 1
            fn[ref] += 1

    def f1(c: str) -> float:
        denom = 2 * tp[c] + fp[c] + fn[c]
        return (2 * tp[c] / denom) if denom else 0.0

    total_tp = sum(tp.values())
    total_fp = sum(fp.values())
    total_fn = sum(fn.values())
    micro_denom = 2 * total_tp + total_fp + total_fn
    macro_labels = [c for c in labels if support[c] > 0]
    return {
        "micro_f1": (2 * total_tp / micro_denom) if micro_denom else 0.0,
        "macro_f1": sum(f1(c) for c in macro_labels) / len(macro_labels) if macro_labels else 0.0,
        "per_intent": {c: {"support": support[c], "f1": f1(c)} for c in labels},
    }
