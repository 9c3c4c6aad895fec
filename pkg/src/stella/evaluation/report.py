"""Aggregation of per-query nDCG into the benchmark report structure.

The report carries the overall mean, the TCQ/TAQ averages and their gap (a
retriever's lexical dependency), the per-(qtype, intent) breakdown, and a
per-language matrix when several language splits were evaluated.  Runs are
interchanged in TREC format: `query_id Q0 passage_id rank score tag`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

from .metrics import RunResult, ndcg_at_k


@dataclass
class MetricReport:
    overall: float
    tcq_avg: float
    taq_avg: float
    gap: float
    per_intent: dict[str, dict[str, float]] = field(default_factory=dict)
    per_language: dict[str, dict[str, float]] = field(default_factory=dict)
    per_query: dict[str, float] = field(default_factory=dict)
    k: int = 10
    retriever: str = ""

    def to_dict(self) -> dict[str, Any]:
        return {
            "overall": self.overall,
            "tcq_avg": self.tcq_avg,
            "taq_avg": self.taq_avg,
            "gap": self.gap,
            "per_intent": self.per_intent,
            "per_language": self.per_language,
            "k": self.k,
            "retriever": self.retriever,
            "num_queries": len(self.per_query),
        }

    def render_text(self) -> str:
        intents = sorted({i for cells in self.per_intent.values() for i in cells})
        lines = []
        lines.append(f"retriever: {self.retriever or 'n/a'}   nDCG@{self.k}")
        lines.append(
            f"overall {self.overall:.3f}   TCQ {self.tcq_avg:.3f}   "
            f"TAQ {self.taq_avg:.3f}   gap {self.gap:.3f}"
        )
        if intents:
            header = "qtype   " + "  ".join(f"{i:>6}" for i in intents)
            lines.append(header)
            for qtype in sorted(self.per_intent):
                cells = self.per_intent[qtype]
                row = f"{qtype:<7} " + "  ".join(
                    f"{cells[i]:6.3f}" if i in cells else "     -" for i in intents
                )
                lines.append(row)
        if len(self.per_language) > 1:
            lines.append("lang      TCQ     TAQ")
            for lang in sorted(self.per_language):
                cell = self.per_language[lang]
                tcq = cell.get("tcq_avg")
                taq = cell.get("taq_avg")
                lines.append(
                    f"{lang:<7} {tcq if tcq is not None else float('nan'):6.3f}  "
                    f"{taq if taq is not None else float('nan'):6.3f}"
                )
        return "\n".join(lines) + "\n"


def _mean(values: list[float]) -> float:
    return sum(values) / len(values) if values else 0.0


def build_report(
    runs: Mapping[str, RunResult],
    qrels: Mapping[str, str | set[str]],
    metadata: Mapping[str, Mapping[str, str]],
    k: int = 10,
    retriever: str = "",
) -> MetricReport:
    """Aggregate per-language runs; `metadata` maps query_id to qtype/intent."""
    per_query: dict[str, float] = {}
    rows: list[tuple[str, str, str, float]] = []   # (lang, qtype, intent, ndcg)
    for language, run in runs.items():
        scores, _ = ndcg_at_k(run, qrels, k)
        for query_id, value in scores.items():
            meta = metadata.get(query_id, {})
            qtype = str(meta.get("qtype", "?"))
            intent = str(meta.get("intent", "?"))
            rows.append((language, qtype, intent, value))
            per_query[f"{language}:{query_id}"] = value

    by_qtype: dict[str, list[float]] = {}
    by_cell: dict[str, dict[str, list[float]]] = {}
    by_language: dict[str, dict[str, list[float]]] = {}
    for language, qtype, intent, value in rows:
        by_qtype.setdefault(qtype, []).append(value)
        by_cell.setdefault(qtype, {}).setdefault(intent, []).append(value)
        by_language.setdefault(language, {}).setdefault(qtype, []).append(value)

    tcq_avg = _mean(by_qtype.get("TCQ", []))
    taq_avg = _mean(by_qtype.get("TAQ", []))
    return MetricReport(
        overall=_mean([v for *_, v in rows]),
        tcq_avg=tcq_avg,
        taq_avg=taq_avg,
        gap=tcq_avg - taq_avg,
        per_intent={
            qtype: {intent: _mean(vals) for intent, vals in cells.items()}
            for qtype, cells in by_cell.items()
        },
        per_language={
            lang: {
                "tcq_avg": _mean(cells["TCQ"]) if "TCQ" in cells else None,
                "taq_avg": _mean(cells["TAQ"]) if "TAQ" in cells else None,
            }
            for lang, cells in by_language.items()
        },
        per_query=per_query,
        k=k,
        retriever=retriever,
    )


def write_run(run: RunResult, path: str | Path, tag: str = "stella") -> None:
    """TREC run format: query_id Q0 passage_id rank score tag."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for query_id in sorted(run):
            for rank, (passage_id, score) in enumerate(run[query_id], start=1):
                fh.write(f"{query_id} Q0 {passage_id} {rank} {score:.6f} {tag}\n")


def read_run(path: str | Path) -> dict[str, list[tuple[str, float]]]:
    run: dict[str, list[tuple[str, float]]] = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            parts = line.split()
            if len(parts) != 6:
                continue
            query_id, _, passage_id, _, score, _ = parts
            run.setdefault(query_id, []).append((passage_id, float(score)))
    return run
