"""Ranked impact lists for a query method."""

from __future__ import annotations

import json
from collections.abc import Collection, Iterable
from dataclasses import dataclass
from typing import Any

import numpy as np

from .corpus import Corpus
from .embedding import EmbeddingMatrix
from .propagation import similarity_weighting

__all__ = ["SETTINGS", "RankedImpactList", "rank", "scope_corpus"]

SETTINGS = ("whole", "inner", "outer")


@dataclass(frozen=True)
class RankedImpactList:
    query_id: int
    setting: str
    entries: tuple[tuple[int, float], ...]

    @property
    def ids(self) -> list[int]:
        return [i for i, _ in self.entries]

    def head(self, k: int | None) -> RankedImpactList:
        if k is None:
            return self
        return RankedImpactList(self.query_id, self.setting, self.entries[:k])

    def to_json(self) -> dict[str, Any]:
        return {
            "query": self.query_id,
            "setting": self.setting,
            "ranked": [[i, s] for i, s in self.entries],
        }

    def to_line(self, **extra: Any) -> str:
        return json.dumps({**extra, **self.to_json()})

    @classmethod
    def from_json(cls, obj: dict[str, Any]) -> RankedImpactList:
        return cls(
            int(obj["query"]),
            str(obj["setting"]),
            tuple((int(i), float(s)) for i, s in obj["ranked"]),
        )


def scope_corpus(query_id: int, corpus: Corpus, setting: str) -> list[int]:
    """Candidate ids for ``setting``, ascending.

    ``whole``: every other method; ``inner``: other methods of the query's
    file; ``outer``: methods of every other file.
    """
    if not 0 <= query_id < len(corpus):
        raise ValueError(f"query {query_id} outside 0..{len(corpus) - 1}")
    if setting not in SETTINGS:
        raise ValueError(f"setting must be one of {SETTINGS}, got {setting!r}")
    path = corpus[query_id].file_path
    if setting == "whole":
        return [m.method_id for m in corpus.methods if m.method_id != query_id]
    if setting == "inner":
        return [i for i in corpus.file_index[path] if i != query_id]
    return [m.method_id for m in corpus.methods if m.file_path != path]


def rank(
    query_id: int,
    embeddings: EmbeddingMatrix,
    scope: Iterable[int],
    setting: str = "whole",
    weighting_graph=None,
    reduction: float = 0.5,
) -> RankedImpactList:
    """Order ``scope`` by descending cosine similarity to the query.

    When ``weighting_graph`` is given, similarities of the query's direct
    neighbours are first pulled towards 1 (see
    :func:`~impactrank.propagation.similarity_weighting`). Ties go to the
    lower method id.
    """
    candidates = np.array(sorted(set(scope) - {query_id}), dtype=np.int64)
    if candidates.size == 0:
        return RankedImpactList(query_id, setting, ())
    if candidates[0] < 0 or candidates[-1] >= embeddings.n_rows:
        raise ValueError("scope contains ids outside the embedding matrix")
    sims = embeddings.similarities(query_id)
    if weighting_graph is not None:
        sims = similarity_weighting(query_id, weighting_graph, sims, reduction)
    scores = sims[candidates]
    order = np.lexsort((candidates, -scores))
    return RankedImpactList(
        query_id,
        setting,
        tuple((int(candidates[j]), float(scores[j])) for j in order),
    )


def rank_queries(
    queries: Collection[tuple[int, str]],
    corpus: Corpus,
    embeddings: EmbeddingMatrix,
    weighting_graph=None,
    top_k: int | None = None,
) -> list[RankedImpactList]:
    """Rank each distinct (query, setting) pair, sorted by (query, setting)."""
    out = []
    for query_id, setting in sorted(set(queries)):
        ranked = rank(
            query_id,
            embeddings,
            scope_corpus(query_id, corpus, setting),
            setting,
            weighting_graph,
        )
        out.append(ranked.head(top_k))
    return out
