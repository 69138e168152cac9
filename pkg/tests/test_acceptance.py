"""Acceptance checks; ``conftest.py`` prints one PASS/FAIL line per criterion."""

from __future__ import annotations

import math
import time
from collections import Counter
from pathlib import Path

import numpy as np
import pytest
import scipy.sparse as sp

from impactrank.benchmark import ChangeAnnotation, ImpactTask, aggregate, build_tasks, read_annotations, score_task
from impactrank.callgraph import CallGraph, build_call_graph, build_class_graph, labeled_edges
from impactrank.cli import main
from impactrank.corpus import extract_corpus
from impactrank.embedding import EmbeddingMatrix
from impactrank.propagation import PropagationConfig, propagate, similarity_weighting
from impactrank.ranking import RankedImpactList, rank, scope_corpus

from helpers import FIXTURE_REPO, RESOURCES, make_corpus, write_repo
from oracles import brute_force_metrics, dense_propagate


def random_graph(rng, n, density):
    pairs = [(a, b) for a in range(n) for b in range(n) if a != b]
    keep = rng.random(len(pairs)) < density / 2
    return tuple(p for p, k in zip(pairs, keep) if k)


# -- 1 -------------------------------------------------------------------------------

C1 = pytest.mark.criterion(1, "propagation matches dense oracle on 200 random graphs")


@C1
def test_propagation_oracle_equivalence():
    rng = np.random.default_rng(20240601)
    worst = 0.0
    start = time.perf_counter()
    for trial in range(200):
        n = int(rng.integers(1, 51))
        density = float(rng.uniform(0.0, 0.3))
        edges = random_graph(rng, n, density)
        f = int(rng.integers(1, 17))
        m = rng.normal(size=(n, f))
        if trial % 3 == 0:
            m = m * (rng.random((n, f)) < 0.4)
        values = sp.csr_matrix(m) if trial % 2 else m
        w = float(rng.uniform(0, 2))
        order = int(rng.integers(1, 4))
        got = propagate(EmbeddingMatrix(values), CallGraph(n, edges), PropagationConfig(w=w, max_order=order)).dense()
        want = dense_propagate(m, n, edges, w, order)
        worst = max(worst, float(np.abs(got - want).max()))
    elapsed = time.perf_counter() - start
    print(f"max |sparse - dense| = {worst:.3e} over 200 graphs in {elapsed:.2f}s")
    assert worst < 1e-9
    assert elapsed < 30


# -- 2 -------------------------------------------------------------------------------

C2 = pytest.mark.criterion(2, "propagation trivial laws")


def _instances(seed, count=50):
    rng = np.random.default_rng(seed)
    for _ in range(count):
        n = int(rng.integers(2, 30))
        edges = random_graph(rng, n, float(rng.uniform(0, 0.3)))
        yield rng, n, edges, rng.normal(size=(n, int(rng.integers(1, 9))))


@C2
def test_w_zero_is_identity():
    for _, n, edges, m in _instances(1):
        out = propagate(EmbeddingMatrix(m), CallGraph(n, edges), PropagationConfig(w=0.0, max_order=3))
        assert np.array_equal(out.dense(), m)


@C2
def test_isolated_node_fixpoint():
    for _, n, edges, m in _instances(2):
        edges = tuple((a, b) for a, b in edges if n - 1 not in (a, b))
        out = propagate(EmbeddingMatrix(m), CallGraph(n, edges), PropagationConfig(w=0.9, max_order=3))
        assert np.array_equal(out.dense()[n - 1], m[n - 1])


@C2
def test_linearity():
    for rng, n, edges, m in _instances(3):
        m2 = rng.normal(size=m.shape)
        a, b = rng.normal(size=2)
        g, cfg = CallGraph(n, edges), PropagationConfig(w=0.5, max_order=2)
        lhs = propagate(EmbeddingMatrix(a * m + b * m2), g, cfg).dense()
        rhs = a * propagate(EmbeddingMatrix(m), g, cfg).dense() + b * propagate(EmbeddingMatrix(m2), g, cfg).dense()
        assert np.abs(lhs - rhs).max() < 1e-9


@C2
def test_permutation_equivariance():
    for rng, n, edges, m in _instances(4):
        perm = rng.permutation(n)
        permuted_edges = tuple(sorted((int(perm[a]), int(perm[b])) for a, b in edges))
        mp = np.empty_like(m)
        mp[perm] = m
        cfg = PropagationConfig(w=0.5, max_order=3)
        out = propagate(EmbeddingMatrix(m), CallGraph(n, edges), cfg).dense()
        outp = propagate(EmbeddingMatrix(mp), CallGraph(n, permuted_edges), cfg).dense()
        assert np.abs(outp[perm] - out).max() < 1e-9


# -- 3 -------------------------------------------------------------------------------

C3 = pytest.mark.criterion(3, "metrics match brute-force oracle on 1000 instances")


@C3
def test_metric_oracle_equivalence():
    rng = np.random.default_rng(3)
    records, oracle = [], []
    k = 10
    for i in range(1000):
        n = int(rng.integers(2, 31))
        universe = np.arange(1, n + 1)
        ranked = [int(x) for x in rng.permutation(universe)[: int(rng.integers(1, n + 1))]]
        gt = {int(x) for x in rng.choice(universe, size=int(rng.integers(1, min(n, 8) + 1)), replace=False)}
        task = ImpactTask(f"t{i}", "c", 0, frozenset(gt), "whole")
        ranking = RankedImpactList(0, "whole", tuple((x, 1.0 / (p + 1)) for p, x in enumerate(ranked)))
        s = score_task(task, ranking, k)
        rr, ap, hit = brute_force_metrics(ranked, gt, k)
        assert abs(s.reciprocal_rank - rr) <= 1e-12
        assert abs(s.average_precision - ap) <= 1e-12
        assert s.hit_at_k == hit
        records.append(s)
        oracle.append((rr, ap, hit))
    report = aggregate(records, "whole", k)
    assert report.n_tasks == 1000
    assert report.mrr == sum(r.reciprocal_rank for r in records) / 1000
    assert report.map == sum(r.average_precision for r in records) / 1000
    assert report.hit_at_k == sum(1 for r in records if r.hit_at_k) / 1000
    assert abs(report.mrr - sum(o[0] for o in oracle) / 1000) <= 1e-12
    assert abs(report.map - sum(o[1] for o in oracle) / 1000) <= 1e-12
    assert report.hit_at_k == sum(o[2] for o in oracle) / 1000


# -- 4 -------------------------------------------------------------------------------

C4 = pytest.mark.criterion(4, "call graph of the fixture repo equals the hand-derived edges")

EXPECTED = [
    ("Base.compute/2", "Helper.Helper/1"),  # constructor through wildcard import
    ("Base.compute/2", "Helper.norm/1"),  # local variable receiver, wildcard import
    ("Service.run/1", "Base.compute/2"),  # extends fallback
    ("Service.run/1", "Helper.fmt/1"),  # explicit import, overload fan-out
    ("Service.run/1", "Helper.fmt/1"),
    ("Service.log/1", "Service.run/1"),  # nested msg.length() discarded
]


@C4
def test_fixture_edge_set(fixture_corpus):
    files = {p for p in fixture_corpus.file_index}
    assert len(files) >= 3 and len(fixture_corpus) >= 7
    g = build_call_graph(fixture_corpus)
    assert g.edges == ((0, 3), (0, 4), (1, 0), (1, 5), (1, 6), (2, 1))
    assert labeled_edges(fixture_corpus, g.edges) == EXPECTED
    assert g.resolved_sites + sum(g.unresolved.values()) == g.call_sites


@C4
def test_constructor_and_wildcard_edges(fixture_corpus):
    g = build_call_graph(fixture_corpus)
    ctor = next(m.method_id for m in fixture_corpus.methods if m.is_constructor and m.class_name == "Helper")
    base = fixture_corpus.source_files["src/main/java/com/acme/core/Base.java"]
    assert "com.acme.util.*" in base.imports
    assert (0, ctor) in g.edges
    assert (0, 4) in g.edges


@C4
def test_only_outermost_call_is_resolved(tmp_path):
    src = "class A {\n void a() { b(c()); }\n void b(int x) {}\n int c() { return 1; }\n}"
    corpus = extract_corpus(write_repo(tmp_path, {"A.java": src}))
    g = build_call_graph(corpus)
    assert labeled_edges(corpus, g.edges) == [("A.a/0", "A.b/1")]


# -- 5 -------------------------------------------------------------------------------

C5 = pytest.mark.criterion(5, "similarity weighting rule and class-graph ordering")


@C5
def test_weighting_rule_exact():
    rng = np.random.default_rng(5)
    for _ in range(200):
        n = int(rng.integers(2, 30))
        g = CallGraph(n, random_graph(rng, n, 0.3))
        base = rng.uniform(-1, 1, size=n)
        q = int(rng.integers(0, n))
        out = similarity_weighting(q, g, base)
        adj = g.undirected_adjacency()
        nbrs = set(adj.indices[adj.indptr[q] : adj.indptr[q + 1]].tolist())
        for j in range(n):
            if j in nbrs:
                assert out[j] == 1 - 0.5 * (1 - base[j])
            else:
                assert out[j] == base[j]


def _non_neighbour_order(ranking, neighbours):
    return [i for i in ranking.ids if i not in neighbours]


def _check_class_graph_orderings(corpus, embeddings):
    cg = build_class_graph(corpus)
    adj = cg.undirected_adjacency()
    checked = 0
    for q in range(len(corpus)):
        nbrs = set(adj.indices[adj.indptr[q] : adj.indptr[q + 1]].tolist())
        for setting in ("inner", "outer"):
            scope = scope_corpus(q, corpus, setting)
            plain = rank(q, embeddings, scope, setting)
            weighted = rank(q, embeddings, scope, setting, weighting_graph=cg)
            assert _non_neighbour_order(weighted, nbrs) == _non_neighbour_order(plain, nbrs)
            # the weighting is monotone, so neighbours keep their order too
            assert [i for i in weighted.ids if i in nbrs] == [i for i in plain.ids if i in nbrs]
            checked += 1
    return checked


@C5
def test_class_graph_keeps_orderings_on_fixture(fixture_corpus):
    from impactrank.embedding import tfidf_embed

    assert _check_class_graph_orderings(fixture_corpus, tfidf_embed(fixture_corpus)) == 14


@C5
def test_class_graph_keeps_orderings_random():
    rng = np.random.default_rng(55)
    for _ in range(30):
        n = int(rng.integers(3, 25))
        files = [f"F{int(x)}.java" for x in rng.integers(0, 3, size=n)]
        classes = [f"{files[i][:-5]}C{int(rng.integers(0, 2))}" for i in range(n)]
        # several classes per file so inner scopes contain non-neighbours
        corpus = make_corpus([["x"]] * n, files=sorted(files), classes=[c for _, c in sorted(zip(files, classes))])
        _check_class_graph_orderings(corpus, EmbeddingMatrix(rng.normal(size=(n, 6))))


# -- 6 -------------------------------------------------------------------------------

C6 = pytest.mark.criterion(6, "propagation lifts the contextually related ground truth")


@C6
def test_propagation_improves_contextual_match():
    # 0 query, 1 identical to the query, 2 ground truth (orthogonal, called
    # by 1), 3 unrelated distractor with a small positive similarity
    values = np.array([[1.0, 0.0], [1.0, 0.0], [0.0, 1.0], [0.3, 1.0]])
    graph = CallGraph(4, ((1, 2),))
    before = rank(0, EmbeddingMatrix(values), [1, 2, 3])
    after = rank(0, propagate(EmbeddingMatrix(values), graph, PropagationConfig(w=0.5, max_order=1)), [1, 2, 3])

    assert before.ids == [1, 3, 2]
    assert after.ids == [1, 2, 3]
    gt_before = dict(before.entries)[2]
    gt_after = dict(after.entries)[2]
    assert gt_before == 0.0
    # row 2 becomes (0.5, 1); cosine with (1, 0) is 0.5 / sqrt(1.25)
    assert gt_after == pytest.approx(1 / math.sqrt(5), abs=1e-15)
    assert gt_after > gt_before
    assert after.ids.index(2) < before.ids.index(2)


# -- 7 -------------------------------------------------------------------------------

C7 = pytest.mark.criterion(7, "task construction rules")


@C7
def test_n_changed_methods_give_n_whole_tasks():
    rng = np.random.default_rng(7)
    corpus = make_corpus([["x"]] * 20, files=[f"F{i // 5}.java" for i in range(20)])
    for trial in range(50):
        n = int(rng.integers(2, 9))
        members = sorted(int(x) for x in rng.choice(20, size=n, replace=False))
        anns = [ChangeAnnotation("r", f"c{trial}", "p", corpus[i].file_path, corpus[i].start_line + 1, "bugfix") for i in members]
        tasks = [t for t in build_tasks(anns, {"p": corpus}) if t.setting == "whole"]
        assert len(tasks) == n
        assert sorted(t.query_id for t in tasks) == members
        for t in tasks:
            assert t.ground_truth == frozenset(members) - {t.query_id}


@C7
def test_singleton_commits_yield_no_tasks():
    corpus = make_corpus([["x"]] * 3)
    stats = Counter()
    anns = [ChangeAnnotation("r", "c", "p", "F1.java", 12, "bugfix"), ChangeAnnotation("r", "c", "p", "F1.java", 13, "bugfix")]
    assert build_tasks(anns, {"p": corpus}, stats) == []
    assert stats["single_method_commit"] == 1


@C7
def test_three_method_two_file_fixture(fixture_corpus):
    anns = [a for a in read_annotations(RESOURCES / "annotations.csv") if a.commit_id == "c2b"]
    stats = Counter()
    tasks = build_tasks(anns, {"p2": fixture_corpus}, stats)
    # changed: Service.run (1), Service.log (2), Helper ctor (3)
    whole = {t.query_id: t.ground_truth for t in tasks if t.setting == "whole"}
    assert whole == {1: {2, 3}, 2: {1, 3}, 3: {1, 2}}
    assert not [t for t in tasks if t.setting == "inner"]
    outer = [(t.query_id, t.ground_truth) for t in tasks if t.setting == "outer"]
    assert outer == [(3, frozenset({1, 2}))]
    assert stats["inner_too_small"] == 3
    assert stats["outer_too_small"] == 2


# -- 8 -------------------------------------------------------------------------------

C8 = pytest.mark.criterion(8, "pipeline is byte-identical across runs and fast")


def _tree(root: Path) -> dict[str, bytes]:
    return {str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


@C8
def test_pipeline_determinism(tmp_path):
    config = RESOURCES / "pipeline.toml"
    start = time.perf_counter()
    assert main(["pipeline", "--config", str(config), "--out", str(tmp_path / "run1")]) == 0
    first = time.perf_counter() - start
    assert main(["pipeline", "--config", str(config), "--out", str(tmp_path / "run2")]) == 0
    a, b = _tree(tmp_path / "run1"), _tree(tmp_path / "run2")
    print(f"pipeline run: {first:.2f}s, {len(a)} artifacts")
    assert set(a) >= {"corpus.json", "graph.json", "embeddings.jsonl", "tasks.json", "rankings.jsonl", "report.json"}
    assert a == b
    assert first < 10
