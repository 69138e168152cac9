"""Training-free embedding propagation over a method graph.

The update is

    M' = (I + w * sum_{i=1..k} D_i^{-1/2} A_i D_i^{-1/2}) M

where ``A_i`` joins method pairs at undirected shortest-path distance
exactly ``i`` and ``D_i`` is its degree matrix. Isolated rows of
``D_i^{-1/2}`` are 0, so a method without order-``i`` neighbours keeps its
own row from the identity term.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Protocol

import numpy as np
import scipy.sparse as sp

from .embedding import EmbeddingMatrix

__all__ = [
    "NormalizedAdjacency",
    "PropagationConfig",
    "distance_layers",
    "order_adjacency",
    "propagate",
    "propagation_operator",
    "similarity_weighting",
]

NEIGHBORHOODS = ("exact", "cumulative")


class Graph(Protocol):
    n_nodes: int

    def undirected_adjacency(self) -> sp.csr_matrix: ...


@dataclass(frozen=True)
class PropagationConfig:
    """Balance weight ``w``, highest neighbour order and graph choice.

    ``neighborhood="cumulative"`` makes order ``i`` cover every node within
    distance ``i`` rather than exactly at distance ``i``.
    """

    w: float = 0.5
    max_order: int = 2
    graph_kind: str = "call"
    neighborhood: str = "exact"

    def __post_init__(self):
        if not self.w >= 0:
            raise ValueError(f"w must be >= 0, got {self.w}")
        if not 1 <= self.max_order <= 3:
            raise ValueError(f"max_order must be in 1..3, got {self.max_order}")
        if self.graph_kind not in ("call", "class"):
            raise ValueError(f"graph_kind must be 'call' or 'class', got {self.graph_kind!r}")
        if self.neighborhood not in NEIGHBORHOODS:
            raise ValueError(f"neighborhood must be one of {NEIGHBORHOODS}")


@dataclass(frozen=True)
class NormalizedAdjacency:
    order: int
    matrix: sp.csr_matrix


def _adjacency(graph: Graph | sp.spmatrix) -> sp.csr_matrix:
    if sp.issparse(graph):
        adj = sp.csr_matrix(graph, dtype=np.float64)
        adj.setdiag(0)
        adj.eliminate_zeros()
        adj = ((adj + adj.T) > 0).astype(np.float64)
        return sp.csr_matrix(adj)
    return graph.undirected_adjacency()


def distance_layers(graph: Graph | sp.spmatrix, max_order: int) -> list[sp.csr_matrix]:
    """0/1 matrices ``[A_1, ..., A_max_order]`` of exact-distance node pairs.

    Breadth-first search from every node, cut off at depth ``max_order``.
    """
    adj = _adjacency(graph)
    n = adj.shape[0]
    indptr, indices = adj.indptr, adj.indices
    rows: list[list[int]] = [[] for _ in range(max_order)]
    cols: list[list[int]] = [[] for _ in range(max_order)]
    dist = np.full(n, -1, dtype=np.int64)
    for source in range(n):
        if indptr[source] == indptr[source + 1]:
            continue
        dist[source] = 0
        touched = [source]
        queue = deque([source])
        while queue:
            u = queue.popleft()
            du = dist[u]
            if du == max_order:
                continue
            for v in indices[indptr[u] : indptr[u + 1]]:
                if dist[v] < 0:
                    dist[v] = du + 1
                    touched.append(v)
                    queue.append(v)
                    rows[du].append(source)
                    cols[du].append(v)
        dist[touched] = -1
    return [
        sp.csr_matrix((np.ones(len(r)), (r, c)), shape=(n, n), dtype=np.float64)
        for r, c in zip(rows, cols)
    ]


def _sym_normalize(a: sp.csr_matrix) -> sp.csr_matrix:
    deg = np.asarray(a.sum(axis=1)).ravel()
    inv_sqrt = np.zeros_like(deg)
    nz = deg > 0
    inv_sqrt[nz] = 1.0 / np.sqrt(deg[nz])
    d = sp.diags(inv_sqrt)
    out = sp.csr_matrix(d @ a @ d)
    out.sort_indices()
    return out


def order_adjacency(graph: Graph | sp.spmatrix, order: int, neighborhood: str = "exact") -> NormalizedAdjacency:
    """Symmetrically normalized adjacency of the order-``order`` neighbours."""
    if not 1 <= order <= 3:
        raise ValueError(f"order must be in 1..3, got {order}")
    if neighborhood not in NEIGHBORHOODS:
        raise ValueError(f"neighborhood must be one of {NEIGHBORHOODS}")
    layers = distance_layers(graph, order)
    a = layers[-1] if neighborhood == "exact" else sum(layers[1:], layers[0])
    return NormalizedAdjacency(order, _sym_normalize(sp.csr_matrix(a)))


def propagation_operator(graph: Graph | sp.spmatrix, config: PropagationConfig) -> sp.csr_matrix:
    """The sparse N x N matrix ``w * sum_i S_i`` (without the identity)."""
    layers = distance_layers(graph, config.max_order)
    n = layers[0].shape[0]
    total = sp.csr_matrix((n, n), dtype=np.float64)
    for i in range(config.max_order):
        a = layers[i] if config.neighborhood == "exact" else sum(layers[1 : i + 1], layers[0])
        total = total + _sym_normalize(sp.csr_matrix(a))
    return sp.csr_matrix(config.w * total)


def propagate(
    embeddings: EmbeddingMatrix,
    graph: Graph | sp.spmatrix,
    config: PropagationConfig | None = None,
) -> EmbeddingMatrix:
    """Mix each method's vector with its graph neighbours' (see module doc)."""
    config = config or PropagationConfig()
    n = graph.shape[0] if sp.issparse(graph) else graph.n_nodes
    if embeddings.n_rows != n:
        raise ValueError(f"embedding rows ({embeddings.n_rows}) != graph nodes ({n})")
    op = propagation_operator(graph, config)
    values = embeddings.values
    if sp.issparse(values):
        updated = sp.csr_matrix(values + op @ values)
    else:
        updated = values + op @ values
    return EmbeddingMatrix(updated, embeddings.provider_tag, embeddings.columns)


def similarity_weighting(
    query_id: int,
    graph: Graph | sp.spmatrix,
    base_similarities: np.ndarray,
    reduction: float = 0.5,
) -> np.ndarray:
    """Shrink the cosine distance to each direct neighbour of the query.

    For every order-1 neighbour ``j``: ``1 - (1 - reduction) * (1 - s_j)``;
    all other entries are returned unchanged.
    """
    adj = _adjacency(graph)
    base = np.asarray(base_similarities, dtype=np.float64)
    if base.shape != (adj.shape[0],):
        raise ValueError(f"expected {adj.shape[0]} similarities, got shape {base.shape}")
    out = base.copy()
    neighbours = adj.indices[adj.indptr[query_id] : adj.indptr[query_id + 1]]
    neighbours = neighbours[neighbours != query_id]
    out[neighbours] = 1.0 - (1.0 - reduction) * (1.0 - base[neighbours])
    return out
