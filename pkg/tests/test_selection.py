from __future__ import annotations

import itertools
import math
import random

import numpy as np
import pytest

from stella.chunking import Passage
from stella.errors import PoolTooSmall, TooFewPoints, UnparseableIntent
from stella.gateway import EmbeddingVector, Gateway, GatewayConfig, ScriptedChatClient
from stella.selection import (
    CandidatePassage,
    ClusterConfig,
    IntentLabel,
    classify_intent,
    classify_pool,
    cosine_distance_matrix,
    density_filter,
    distinct_terms,
    kmedoids,
    parse_intent_response,
    select_representatives,
)
from stella.terminology import TermEntry, TermFilterConfig, TerminologyDictionary


def ev(*vals):
    return EmbeddingVector(values=tuple(float(v) for v in vals), provider_id="t")


def brute_force_optimum(vectors, k):
    d = cosine_distance_matrix(vectors)
    n = len(vectors)
    return min(
        float(d[:, list(combo)].min(axis=1).sum())
        for combo in itertools.combinations(range(n), k)
    )


def planar(angle_deg, eps=0.0):
    a = math.radians(angle_deg + eps)
    return ev(math.cos(a), math.sin(a))


# --- k-medoids -----------------------------------------------------------------

def test_orthogonal_points_k_equals_n():
    vectors = [ev(*row) for row in np.eye(5)]
    result = kmedoids(vectors, ClusterConfig(k=5, per_medoid=1))
    assert sorted(result.medoid_indices) == [0, 1, 2, 3, 4]
    assert result.total_deviation == pytest.approx(0.0, abs=1e-12)


def test_three_visible_groups_matches_exhaustive_search():
    vectors = []
    for base in (0.0, 120.0, 240.0):
        for eps in (-6.0, -2.0, 2.0, 6.0):
            vectors.append(planar(base, eps))
    result = kmedoids(vectors, ClusterConfig(k=3, per_medoid=4))
    optimum = brute_force_optimum(vectors, 3)
    assert result.total_deviation == pytest.approx(optimum, abs=1e-9)
    # one medoid per visible group
    groups = sorted(m // 4 for m in result.medoid_indices)
    assert groups == [0, 1, 2]


def test_duplicate_points_lowest_index_tiebreak():
    v = ev(1.0, 0.0)
    w = ev(0.0, 1.0)
    result = kmedoids([v, v, w], ClusterConfig(k=2, per_medoid=1))
    assert sorted(result.medoid_indices) == [0, 2]
    assert result.total_deviation == pytest.approx(0.0, abs=1e-12)


def test_random_fixtures_match_exhaustive_optimum():
    rng = random.Random(42)
    for trial in range(10):
        n = rng.randint(4, 12)
        k = rng.randint(1, 3)
        vectors = [
            ev(*(rng.gauss(0, 1) for _ in range(4)))
            for _ in range(n)
        ]
        result = kmedoids(vectors, ClusterConfig(k=k, per_medoid=1))
        optimum = brute_force_optimum(vectors, k)
        assert result.total_deviation == pytest.approx(optimum, abs=1e-9), f"trial {trial}"


def test_swap_never_worse_than_build():
    from stella.selection import _pam_build, _pam_swap

    rng = random.Random(9)
    for _ in range(10):
        vectors = [ev(*(rng.gauss(0, 1) for _ in range(3))) for _ in range(15)]
        d = cosine_distance_matrix(vectors)
        build = _pam_build(d, 3)
        build_dev = float(d[:, build].min(axis=1).sum())
        swapped = _pam_swap(d, list(build))
        swap_dev = float(d[:, swapped].min(axis=1).sum())
        assert swap_dev <= build_dev + 1e-12


def test_too_few_points():
    with pytest.raises(TooFewPoints):
        kmedoids([ev(1, 0)], ClusterConfig(k=2, per_medoid=1))


def test_assignment_nearest_medoid():
    vectors = [planar(0), planar(5), planar(90), planar(95)]
    result = kmedoids(vectors, ClusterConfig(k=2, per_medoid=2))
    a = result.assignment
    assert a[0] == a[1] and a[2] == a[3] and a[0] != a[2]


# --- density filter --------------------------------------------------------------

def make_dict(surfaces):
    entries = {
        s: TermEntry(surface=s, pattern_class="all_caps", doc_frequency=10, pos="PROPN", zipf=None)
        for s in surfaces
    }
    return TerminologyDictionary(entries, TermFilterConfig())


def passage(text, pid):
    return Passage(passage_id=pid, doc_id="d", ordinal=0, text=text, token_count=5)


def test_density_boundary_five_distinct():
    d = make_dict(["RSRM", "CFD", "MODIS", "XMM", "TPS"])
    kept = density_filter([passage("RSRM CFD MODIS XMM TPS", "p1")], d)
    assert len(kept) == 1


def test_density_counts_distinct_not_mentions():
    d = make_dict(["RSRM", "CFD"])
    kept = density_filter([passage("RSRM RSRM RSRM CFD", "p1")], d, min_distinct=3)
    assert kept == []
    assert distinct_terms(passage("RSRM RSRM CFD", "p1"), d) == ["CFD", "RSRM"]


def test_density_planted_fixture():
    d = make_dict(["T1A", "T2B", "T3C", "T4D", "T5E", "T6F"])
    dense = [passage("T1A T2B T3C T4D T5E", f"dense{i}") for i in range(18)]
    sparse = [passage("T1A T2B T3C plain words", f"sparse{i}") for i in range(32)]
    kept = density_filter(dense + sparse, d)
    assert [p.passage_id for p in kept] == [p.passage_id for p in dense]


# --- intent classification --------------------------------------------------------

def gw(script):
    return Gateway(chat_backend=ScriptedChatClient(script),
                   config=GatewayConfig(), sleep=lambda s: None)


def test_parse_exact_and_substring():
    assert parse_intent_response("Definition / Principle") == IntentLabel.DEF
    assert parse_intent_response("  procedure / operation.") == IntentLabel.PROC
    assert parse_intent_response("The best intent is Procedure / Operation.") == IntentLabel.PROC
    assert parse_intent_response("Definition") is None        # bare prefix
    assert parse_intent_response("Definition / Principle or Anomaly / Risk") is None


def test_classify_intent_exact():
    label = classify_intent(passage("some text", "p1"), gw(["Definition / Principle"]))
    assert label == IntentLabel.DEF


def test_classify_intent_retry_then_fail():
    gateway = gw(["Definition", "still Definition"])
    with pytest.raises(UnparseableIntent):
        classify_intent(passage("some text", "p1"), gateway)


def test_classify_intent_retry_appends_error():
    chat = ScriptedChatClient(["??", "Anomaly / Risk"])
    gateway = Gateway(chat_backend=chat, config=GatewayConfig(), sleep=lambda s: None)
    label = classify_intent(passage("some text", "p1"), gateway)
    assert label == IntentLabel.ANOM
    assert "did not match" in chat.calls[1].user_prompt


def test_classify_pool_partitions():
    responses = [
        "Definition / Principle",
        "Anomaly / Risk",
        "nonsense", "more nonsense",   # second passage: two failed parses
        "Procedure / Operation",
    ]
    # note: threads make response->passage mapping order-dependent; use 1 worker
    gateway = gw(responses[:2] + responses[4:] + responses[2:4])
    passages = [passage(f"text {i}", f"p{i}") for i in range(4)]
    pools, excluded = classify_pool(passages, gateway, max_workers=1)
    total = sum(len(v) for v in pools.values())
    assert total + len(excluded) == 4


# --- representative selection -------------------------------------------------------

def clustered_pool(sizes, dim=8, seed=0):
    rng = np.random.default_rng(seed)
    pool = []
    idx = 0
    for c, size in enumerate(sizes):
        base = np.zeros(dim)
        base[c] = 1.0
        for _ in range(size):
            v = base + rng.normal(0, 0.05, dim)
            v /= np.linalg.norm(v)
            pool.append((passage(f"text {idx}", f"p{idx}"), ev(*v)))
            idx += 1
    return pool


def test_balanced_pool_selects_everything_with_ranks():
    pool = clustered_pool([20] * 5)
    cfg = ClusterConfig(k=5, per_medoid=20)
    result = select_representatives(pool, IntentLabel.DEF, cfg)
    assert len(result.candidates) == 100
    assert not result.flagged
    ids = [c.passage.passage_id for c in result.candidates]
    assert len(set(ids)) == 100
    for c in result.candidates:
        assert 0 <= c.rank_to_medoid < 20
        assert 0 <= c.medoid_id < 5
    # each medoid appears at rank 0 of its own cluster
    rank0 = [c for c in result.candidates if c.rank_to_medoid == 0]
    assert len(rank0) == 5


def test_skewed_cluster_backfills_and_flags():
    pool = clustered_pool([12, 28])
    cfg = ClusterConfig(k=2, per_medoid=20)
    result = select_representatives(pool, IntentLabel.NUM, cfg)
    assert len(result.candidates) == 40
    assert result.flagged
    assert result.backfilled == 8
    ids = [c.passage.passage_id for c in result.candidates]
    assert len(set(ids)) == 40


def test_pool_too_small():
    pool = clustered_pool([5, 5])
    with pytest.raises(PoolTooSmall):
        select_representatives(pool, IntentLabel.DEF, ClusterConfig(k=2, per_medoid=20))


def test_candidate_roundtrip():
    pool = clustered_pool([3])
    cfg = ClusterConfig(k=1, per_medoid=3)
    result = select_representatives(
        pool, IntentLabel.COMP, cfg, terms_by_passage={"p0": ["RSRM"]}
    )
    c = result.candidates[0]
    again = CandidatePassage.from_dict(c.to_dict())
    assert again == c
