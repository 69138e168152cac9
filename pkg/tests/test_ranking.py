from __future__ import annotations

import numpy as np
import pytest

from impactrank.callgraph import CallGraph
from impactrank.embedding import EmbeddingMatrix
from impactrank.ranking import RankedImpactList, rank, rank_queries, scope_corpus

from helpers import make_corpus


def two_file_corpus():
    # 0,1,2 in A.java; 3,4 in B.java
    return make_corpus([["x"]] * 5, files=["A.java"] * 3 + ["B.java"] * 2)


def test_scope_examples():
    c = two_file_corpus()
    assert scope_corpus(0, c, "whole") == [1, 2, 3, 4]
    assert scope_corpus(0, c, "inner") == [1, 2]
    assert scope_corpus(0, c, "outer") == [3, 4]
    assert scope_corpus(4, c, "inner") == [3]


def test_scope_partition():
    c = two_file_corpus()
    for q in range(5):
        inner, outer = set(scope_corpus(q, c, "inner")), set(scope_corpus(q, c, "outer"))
        assert not inner & outer
        assert inner | outer == set(scope_corpus(q, c, "whole"))


def test_scope_errors():
    c = two_file_corpus()
    with pytest.raises(ValueError):
        scope_corpus(9, c, "whole")
    with pytest.raises(ValueError):
        scope_corpus(0, c, "near")


def test_rank_simple():
    values = np.zeros((8, 2))
    values[0] = [1, 0]
    values[7] = [2, 0]
    values[3] = [0, 1]
    r = rank(0, EmbeddingMatrix(values), [7, 3])
    assert r.entries == ((7, 1.0), (3, 0.0))


def test_ties_break_by_lower_id():
    values = np.zeros((10, 2))
    values[0] = [1, 0]
    for i in (9, 4, 6):
        values[i] = [1, 1]
    r = rank(0, EmbeddingMatrix(values), [9, 6, 4])
    assert r.ids == [4, 6, 9]


def test_query_excluded_and_empty_scope():
    m = EmbeddingMatrix(np.eye(3))
    assert 0 not in rank(0, m, [0, 1, 2]).ids
    assert rank(0, m, [0]).entries == ()
    with pytest.raises(ValueError):
        rank(0, m, [5])


def test_query_scale_invariance():
    rng = np.random.default_rng(0)
    values = rng.normal(size=(6, 4))
    scaled = values.copy()
    scaled[0] *= 37.5
    a = rank(0, EmbeddingMatrix(values), range(1, 6))
    b = rank(0, EmbeddingMatrix(scaled), range(1, 6))
    assert a.ids == b.ids
    assert np.allclose([s for _, s in a.entries], [s for _, s in b.entries], atol=1e-12)


def test_weighting_promotes_neighbour():
    values = np.array([[1.0, 0.0], [0.6, 0.8], [0.8, 0.6]])
    m = EmbeddingMatrix(values)
    plain = rank(0, m, [1, 2])
    assert plain.ids == [2, 1]
    weighted = rank(0, m, [1, 2], weighting_graph=CallGraph(3, ((0, 1),)))
    assert weighted.ids == [1, 2]
    assert weighted.entries[0][1] == pytest.approx(0.8, abs=1e-15)


def test_rank_queries_and_head():
    c = two_file_corpus()
    m = EmbeddingMatrix(np.random.default_rng(2).normal(size=(5, 3)))
    out = rank_queries([(1, "whole"), (0, "inner"), (1, "whole")], c, m, top_k=1)
    assert [(r.query_id, r.setting, len(r.entries)) for r in out] == [(0, "inner", 1), (1, "whole", 1)]


def test_ranked_list_json():
    r = RankedImpactList(3, "outer", ((1, 0.5), (2, 0.25)))
    assert r.to_json() == {"query": 3, "setting": "outer", "ranked": [[1, 0.5], [2, 0.25]]}
    assert RankedImpactList.from_json(r.to_json()) == r
    assert r.head(1).ids == [1]
    assert r.head(None) is r
