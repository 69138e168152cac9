"""
TF-IDF vectors and neighbour weighting
======================================

Rank the methods most similar to a query method, first by plain cosine
similarity and then with the query's call-graph neighbours pulled closer.
"""

from pathlib import Path

import numpy as np

from impactrank import build_call_graph, extract_corpus, rank, scope_corpus, tfidf_embed

REPO = Path(__file__).resolve().parent.parent / "tests" / "resources" / "minirepo"
corpus = extract_corpus(REPO)

###############################################################################
# Each method becomes a sparse row over the corpus vocabulary.
# ``idf_mode="document"`` switches to the usual per-method document frequency.

emb = tfidf_embed(corpus)
print(emb)
row = emb.row(0)
top = np.argsort(-row)[:5]
print([(emb.columns[j], round(float(row[j]), 3)) for j in top])

###############################################################################
# Query ``Service.run``. The whole setting ranks every other method.

query = 1
scope = scope_corpus(query, corpus, "whole")
plain = rank(query, emb, scope)
for mid, score in plain.entries:
    print(f"  {corpus[mid].class_name + '.' + corpus[mid].method_name:<16} {score:.3f}")

###############################################################################
# With a weighting graph, a direct neighbour's similarity ``s`` becomes
# ``1 - 0.5 * (1 - s)``. Here that lifts the callee ``Base.compute`` and the
# caller ``Service.log``.

weighted = rank(query, emb, scope, weighting_graph=build_call_graph(corpus))
for mid, score in weighted.entries:
    print(f"  {corpus[mid].class_name + '.' + corpus[mid].method_name:<16} {score:.3f}")
