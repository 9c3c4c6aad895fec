from __future__ import annotations

import math
import random

import numpy as np
import pytest

from stella.errors import DimensionMismatch, KeyMismatch, MissingQrels, UnknownPassage
from stella.evaluation import (
    Bm25Index,
    MetricReport,
    bm25_score,
    build_report,
    dense_retrieve,
    f1_validate,
    ndcg_at_k,
    read_run,
    write_run,
)
from stella.evaluation.dense import rank_by_cosine
from stella.evaluation.figures import render_report_figures
from stella.gateway import EmbeddingVector, Gateway, GatewayConfig
from stella.gateway.mock import FixedEmbedder


def ev(*vals):
    return EmbeddingVector(values=tuple(float(v) for v in vals), provider_id="t")


# --- BM25 ------------------------------------------------------------------------

CORPUS3 = [
    ("d1", "rocket nozzle design"),
    ("d2", "rocket engine test"),
    ("d3", "nozzle nozzle flow cooling"),
]


def hand_bm25(tf, df, dl, avgdl, n_docs, k1=1.2, b=0.75):
    idf = math.log(1 + (n_docs - df + 0.5) / (df + 0.5))
    return idf * tf * (k1 + 1) / (tf + k1 * (1 - b + b * dl / avgdl))


def test_bm25_matches_hand_evaluated_formula():
    index = Bm25Index.build(CORPUS3)
    avgdl = 10 / 3
    q = ["rocket", "nozzle"]
    expected_d1 = hand_bm25(1, 2, 3, avgdl, 3) + hand_bm25(1, 2, 3, avgdl, 3)
    expected_d2 = hand_bm25(1, 2, 3, avgdl, 3)
    expected_d3 = hand_bm25(2, 2, 4, avgdl, 3)
    assert bm25_score(index, q, "d1") == pytest.approx(expected_d1, abs=1e-9)
    assert bm25_score(index, q, "d2") == pytest.approx(expected_d2, abs=1e-9)
    assert bm25_score(index, q, "d3") == pytest.approx(expected_d3, abs=1e-9)


def test_bm25_unmatched_query_scores_zero():
    index = Bm25Index.build(CORPUS3)
    for pid in ("d1", "d2", "d3"):
        assert bm25_score(index, ["antimatter"], pid) == 0.0
    assert index.search("antimatter", 10) == []


def test_bm25_degenerate_single_doc_idf_positive():
    index = Bm25Index.build([("only", "solo document text")])
    assert index.idf("solo") == pytest.approx(math.log(1 + 0.5 / 1.5))
    assert index.idf("solo") > 0
    assert bm25_score(index, ["solo"], "only") > 0


def test_bm25_unknown_passage():
    index = Bm25Index.build(CORPUS3)
    with pytest.raises(UnknownPassage):
        bm25_score(index, ["rocket"], "nope")


def test_bm25_monotone_in_term_frequency():
    docs = [(f"d{tf}", " ".join(["hit"] * tf + ["pad"] * (6 - tf))) for tf in range(1, 6)]
    index = Bm25Index.build(docs)
    scores = [bm25_score(index, ["hit"], f"d{tf}") for tf in range(1, 6)]
    assert scores == sorted(scores)


def test_bm25_search_matches_per_doc_scores():
    index = Bm25Index.build(CORPUS3)
    ranked = index.search("rocket nozzle", 10)
    by_search = dict(ranked)
    for pid in by_search:
        assert by_search[pid] == pytest.approx(bm25_score(index, ["rocket", "nozzle"], pid))
    scores = [s for _, s in ranked]
    assert scores == sorted(scores, reverse=True)


def test_bm25_analyzer_lowercases_and_strips_punct():
    index = Bm25Index.build([("d1", "Rocket, nozzle!")])
    assert bm25_score(index, ["rocket"], "d1") > 0
    assert index.doc_lengths["d1"] == 2


# --- dense retrieval ---------------------------------------------------------------

def test_dense_self_match_rank_one():
    corpus = [("a", ev(1, 0)), ("b", ev(0, 1))]
    embedder = Gateway(embed_backend=FixedEmbedder({"q": [1.0, 0.0]}),
                       config=GatewayConfig(), sleep=lambda s: None)
    ranked = dense_retrieve(embedder, corpus, "q", cutoff=2)
    assert ranked[0] == ("a", pytest.approx(1.0))


def test_dense_tie_breaks_lexicographic():
    corpus = [("zz", ev(1, 0)), ("aa", ev(1, 0))]
    ranked = rank_by_cosine(ev(1, 0), corpus, cutoff=2)
    assert [pid for pid, _ in ranked] == ["aa", "zz"]


def test_dense_matches_brute_force_sort():
    rng = np.random.default_rng(5)
    corpus = [(f"p{i:02d}", ev(*rng.normal(size=6))) for i in range(10)]
    q = ev(*rng.normal(size=6))
    ranked = rank_by_cosine(q, corpus, cutoff=10)

    def cos(a, b):
        a, b = np.asarray(a), np.asarray(b)
        return float(a @ b / (np.linalg.norm(a) * np.linalg.norm(b)))

    brute = sorted(
        ((pid, cos(q.values, v.values)) for pid, v in corpus),
        key=lambda kv: (-kv[1], kv[0]),
    )
    assert [p for p, _ in ranked] == [p for p, _ in brute]
    for (p1, s1), (p2, s2) in zip(ranked, brute):
        assert s1 == pytest.approx(s2, abs=1e-12)


def test_dense_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        rank_by_cosine(ev(1, 0, 0), [("a", ev(1, 0))], cutoff=1)


# --- nDCG ---------------------------------------------------------------------------

def test_ndcg_rank_one_is_perfect():
    run = {"q1": [("p1", 3.0), ("p2", 2.0)]}
    per_query, mean = ndcg_at_k(run, {"q1": "p1"})
    assert per_query["q1"] == pytest.approx(1.0)
    assert mean == pytest.approx(1.0)


def test_ndcg_rank_three_is_half():
    run = {"q1": [("a", 3.0), ("b", 2.0), ("p1", 1.0)]}
    per_query, _ = ndcg_at_k(run, {"q1": "p1"}, k=10)
    assert per_query["q1"] == pytest.approx(1 / math.log2(4), abs=1e-12)
    assert per_query["q1"] == pytest.approx(0.5, abs=1e-12)


def test_ndcg_miss_is_zero():
    run = {"q1": [(f"p{i}", float(-i)) for i in range(10)]}
    per_query, _ = ndcg_at_k(run, {"q1": "relevant-but-absent"})
    assert per_query["q1"] == 0.0


def test_ndcg_single_positive_identity():
    # with one positive, nDCG@10 = 1/log2(rank+1) for rank <= 10 else 0
    for rank in range(1, 13):
        ranking = [(f"filler{i}", float(20 - i)) for i in range(rank - 1)]
        ranking.append(("pos", 1.0))
        per_query, _ = ndcg_at_k({"q": ranking}, {"q": "pos"}, k=10)
        expected = 1 / math.log2(rank + 1) if rank <= 10 else 0.0
        assert per_query["q"] == pytest.approx(expected, abs=1e-12)


def test_ndcg_multiple_relevant_hand_case():
    run = {"q1": [("r1", 5.0), ("x", 4.0), ("y", 3.0), ("r2", 2.0)]}
    per_query, _ = ndcg_at_k(run, {"q1": {"r1", "r2"}}, k=10)
    dcg = 1 / math.log2(2) + 1 / math.log2(5)
    idcg = 1 / math.log2(2) + 1 / math.log2(3)
    assert per_query["q1"] == pytest.approx(dcg / idcg, abs=1e-12)


def test_ndcg_missing_qrels():
    with pytest.raises(MissingQrels):
        ndcg_at_k({"q1": [("p", 1.0)]}, {})


# --- F1 --------------------------------------------------------------------------------

def test_f1_perfect_agreement():
    labels = {f"p{i}": "Def" if i % 2 else "Num" for i in range(300)}
    result = f1_validate(labels, dict(labels))
    assert result["micro_f1"] == pytest.approx(1.0)
    assert result["macro_f1"] == pytest.approx(1.0)


def test_f1_hand_computed_confusion():
    reference = {"a": "x", "b": "x", "c": "y", "d": "y"}
    predictions = {"a": "x", "b": "y", "c": "y", "d": "y"}
    result = f1_validate(predictions, reference)
    assert result["micro_f1"] == pytest.approx(0.75, abs=1e-12)
    f1_x = 2 * 1 / (2 * 1 + 0 + 1)
    f1_y = 2 * 2 / (2 * 2 + 1 + 0)
    assert result["per_intent"]["x"]["f1"] == pytest.approx(f1_x, abs=1e-12)
    assert result["per_intent"]["y"]["f1"] == pytest.approx(f1_y, abs=1e-12)
    assert result["macro_f1"] == pytest.approx((f1_x + f1_y) / 2, abs=1e-12)
    assert result["per_intent"]["x"]["support"] == 2


def test_f1_matches_sklearn_on_random_fixtures():
    from sklearn.metrics import f1_score

    rng = random.Random(13)
    labels = ["Def", "Num", "Proc", "Comp", "Anom"]
    for _ in range(5):
        keys = [f"p{i}" for i in range(60)]
        reference = {k: rng.choice(labels) for k in keys}
        predictions = {k: rng.choice(labels) for k in keys}
        result = f1_validate(predictions, reference)
        y_true = [reference[k] for k in keys]
        y_pred = [predictions[k] for k in keys]
        assert result["micro_f1"] == pytest.approx(
            f1_score(y_true, y_pred, average="micro"), abs=1e-9)
        present = sorted({*y_true})
        assert result["macro_f1"] == pytest.approx(
            f1_score(y_true, y_pred, labels=present, average="macro", zero_division=0), abs=1e-9)


def test_f1_key_mismatch():
    with pytest.raises(KeyMismatch):
        f1_validate({"a": "x"}, {"b": "x"})


# --- report ------------------------------------------------------------------------------

def meta(qtype, intent):
    return {"qtype": qtype, "intent": intent}


def test_report_all_perfect():
    run = {
        "q1": [("p1", 1.0)],
        "q2": [("p2", 1.0)],
    }
    metadata = {"q1": meta("TCQ", "Def"), "q2": meta("TAQ", "Def")}
    report = build_report({"en": run}, {"q1": "p1", "q2": "p2"}, metadata)
    assert report.overall == pytest.approx(1.0)
    assert report.gap == pytest.approx(0.0)
    assert report.per_intent["TCQ"]["Def"] == pytest.approx(1.0)


def test_report_gap_definition():
    run = {
        "t1": [("p1", 1.0)],                      # TCQ hit at rank 1 -> 1.0
        "a1": [("x", 2.0), ("y", 1.5), ("p2", 1.0)],  # TAQ hit at rank 3 -> 0.5
    }
    metadata = {"t1": meta("TCQ", "Num"), "a1": meta("TAQ", "Num")}
    report = build_report({"en": run}, {"t1": "p1", "a1": "p2"}, metadata)
    assert report.tcq_avg == pytest.approx(1.0)
    assert report.taq_avg == pytest.approx(0.5)
    assert report.gap == pytest.approx(0.5, abs=1e-12)
    assert report.gap == pytest.approx(report.tcq_avg - report.taq_avg, abs=1e-12)


def test_report_per_language_matrix():
    runs = {
        "ko": {"t1": [("p1", 1.0)], "a1": [("p2", 1.0)]},
        "fr": {"t1": [("x", 2.0), ("p1", 1.0)], "a1": [("p2", 1.0)]},
    }
    metadata = {"t1": meta("TCQ", "Def"), "a1": meta("TAQ", "Def")}
    report = build_report(runs, {"t1": "p1", "a1": "p2"}, metadata)
    assert report.per_language["ko"]["tcq_avg"] == pytest.approx(1.0)
    assert report.per_language["fr"]["tcq_avg"] == pytest.approx(1 / math.log2(3))
    text = report.render_text()
    assert "ko" in text and "fr" in text


def test_run_file_roundtrip(tmp_path):
    run = {"q2": [("p1", 2.5), ("p2", 1.5)], "q1": [("p3", 9.0)]}
    path = tmp_path / "run.trec"
    write_run(run, path, tag="bm25")
    lines = path.read_text().splitlines()
    assert lines[0].split() == ["q1", "Q0", "p3", "1", "9.000000", "bm25"]
    again = read_run(path)
    assert set(again) == {"q1", "q2"}
    assert again["q2"] == [("p1", 2.5), ("p2", 1.5)]


def test_figures_rendered(tmp_path):
    report = MetricReport(
        overall=0.7, tcq_avg=0.8, taq_avg=0.6, gap=0.2,
        per_intent={"TCQ": {"Def": 0.8, "Num": 0.9}, "TAQ": {"Def": 0.5, "Num": 0.7}},
        per_language={"ko": {"tcq_avg": 0.7, "taq_avg": 0.4},
                      "fr": {"tcq_avg": 0.75, "taq_avg": 0.5}},
        per_query={"q": 0.7},
        retriever="bm25",
    )
    written = render_report_figures(report, tmp_path)
    names = {p.name for p in written}
    assert names == {"ndcg_by_intent.png", "ndcg_by_language.png"}
    for p in written:
        assert p.stat().st_size > 1000
