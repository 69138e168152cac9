"""
Building tasks and scoring rankings
===================================

Turn bug-fix line annotations into impact-analysis tasks, rank each task's
query and report mRR, mAP and HIT@k.
"""

from collections import Counter
from pathlib import Path

from impactrank import (
    build_call_graph,
    build_tasks,
    evaluate,
    extract_corpus,
    rank_queries,
    read_annotations,
    tfidf_embed,
)

RESOURCES = Path(__file__).resolve().parent.parent / "tests" / "resources"
corpus = extract_corpus(RESOURCES / "minirepo")

###############################################################################
# Each annotated line maps to the innermost method that contains it. A commit
# touching ``n >= 2`` methods yields ``n`` tasks: every changed method in
# turn is the query and the rest are its ground truth. ``stats`` records why
# lines and commits were dropped.

annotations = read_annotations(RESOURCES / "annotations.csv")
stats = Counter()
tasks = build_tasks(annotations, {a.parent_commit_id: corpus for a in annotations}, stats)
for t in tasks:
    print(t.task_id, sorted(t.ground_truth))
print(dict(stats))

###############################################################################
# Rank every whole-setting query and score the lists.

emb = tfidf_embed(corpus)
queries = [(t.query_id, t.setting) for t in tasks if t.setting == "whole"]
for label, graph in (("tf-idf", None), ("tf-idf + call-graph weighting", build_call_graph(corpus))):
    report = evaluate(tasks, rank_queries(queries, corpus, emb, graph), "whole", k=3)
    print(f"{label:<30} mRR {report.mrr:.3f}  mAP {report.map:.3f}  HIT@3 {report.hit_at_k:.3f}")
