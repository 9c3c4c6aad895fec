"""Retrieval evaluation: BM25, exact dense retrieval, nDCG, report building."""

from .bm25 import Bm25Index, bm25_score
from .dense import dense_retrieve
from .metrics import f1_validate, ndcg_at_k
from .report import MetricReport, build_report, read_run, write_run

__all__ = [
    "Bm25Index",
    "bm25_score",
    "dense_retrieve",
    "f1_validate",
    "ndcg_at_k",
    "MetricReport",
    "build_report",
    "read_run",
    "write_run",
]
