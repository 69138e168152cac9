"""Method embedding matrices: native TF-IDF and imported vectors."""

from __future__ import annotations

import json
import math
import os
from collections import Counter
from collections.abc import Sequence
from pathlib import Path
from typing import Any

import numpy as np
import scipy.sparse as sp

from .corpus import Corpus

__all__ = [
    "EmbeddingMatrix",
    "cosine",
    "import_embeddings",
    "read_embeddings",
    "tfidf_embed",
    "write_embeddings",
]

PROVIDERS = ("tfidf", "external")
IDF_MODES = ("collection", "document")


class EmbeddingMatrix:
    """N x F matrix whose row ``i`` embeds method ``i``.

    ``values`` may be a dense ndarray or a scipy sparse matrix; :meth:`dense`
    always returns an ndarray. Instances are treated as immutable.
    """

    def __init__(
        self,
        values: np.ndarray | sp.spmatrix,
        provider_tag: str = "external",
        columns: Sequence[str] | None = None,
    ):
        if provider_tag not in PROVIDERS:
            raise ValueError(f"provider_tag must be one of {PROVIDERS}, got {provider_tag!r}")
        if sp.issparse(values):
            values = sp.csr_matrix(values, dtype=np.float64, copy=True)
            values.sum_duplicates()
            values.sort_indices()
            data = values.data
        else:
            values = np.array(values, dtype=np.float64)
            if values.ndim != 2:
                raise ValueError(f"embedding matrix must be 2-D, got shape {values.shape}")
            data = values
        if not np.all(np.isfinite(data)):
            bad = int(np.argwhere(~np.isfinite(values.toarray() if sp.issparse(values) else values))[0][0])
            raise ValueError(f"non-finite value in row {bad}")
        if sp.issparse(values):
            values.data.flags.writeable = False
        else:
            values.flags.writeable = False
        if columns is not None and len(columns) != values.shape[1]:
            raise ValueError("columns length does not match matrix width")
        self.values = values
        self.provider_tag = provider_tag
        self.columns = tuple(columns) if columns is not None else None

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    @property
    def is_sparse(self) -> bool:
        return sp.issparse(self.values)

    def dense(self) -> np.ndarray:
        if self.is_sparse:
            return self.values.toarray()
        return self.values

    def row(self, i: int) -> np.ndarray:
        if self.is_sparse:
            return self.values.getrow(i).toarray().ravel()
        return self.values[i]

    def similarities(self, query_id: int) -> np.ndarray:
        """Cosine similarity of row ``query_id`` with every row (0 for zero norms)."""
        if self.is_sparse:
            norms = np.sqrt(np.asarray(self.values.multiply(self.values).sum(axis=1)).ravel())
            dots = np.asarray(self.values @ self.values.getrow(query_id).T.toarray()).ravel()
        else:
            norms = np.linalg.norm(self.values, axis=1)
            dots = self.values @ self.values[query_id]
        denom = norms * norms[query_id]
        sims = np.zeros(self.n_rows)
        ok = denom > 0
        sims[ok] = dots[ok] / denom[ok]
        return np.clip(sims, -1.0, 1.0)

    def __repr__(self) -> str:
        kind = "sparse" if self.is_sparse else "dense"
        return f"EmbeddingMatrix({self.n_rows}x{self.dim}, {kind}, provider={self.provider_tag})"


def cosine(u: Sequence[float], v: Sequence[float]) -> float:
    """Cosine similarity, defined as 0 when either vector has zero norm.

    >>> cosine([1, 1], [1, 0])
    0.7071067811865475
    """
    a = np.asarray(u, dtype=np.float64)
    b = np.asarray(v, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        return 0.0
    return float(min(1.0, max(-1.0, np.dot(a, b) / (na * nb))))


def tfidf_embed(corpus: Corpus, idf_mode: str = "collection") -> EmbeddingMatrix:
    """TF-IDF rows over the sorted corpus vocabulary.

    ``tf`` is the raw count of a token in a method. With ``idf_mode =
    "collection"`` the weight is ``tf * log(T / cf)`` where ``T`` is the
    number of tokens in the whole corpus and ``cf`` the token's total count;
    ``"document"`` uses the usual ``log(N / df)`` over methods instead.
    """
    if idf_mode not in IDF_MODES:
        raise ValueError(f"idf_mode must be one of {IDF_MODES}, got {idf_mode!r}")
    counts = [Counter(m.tokens) for m in corpus.methods]
    collection: Counter = Counter()
    doc_freq: Counter = Counter()
    for c in counts:
        collection.update(c)
        doc_freq.update(c.keys())
    vocab = sorted(collection)
    if not vocab:
        raise ValueError("empty vocabulary: no method has any token")
    column = {t: j for j, t in enumerate(vocab)}

    if idf_mode == "collection":
        total = sum(collection.values())
        idf = {t: math.log(total / collection[t]) for t in vocab}
    else:
        n_docs = len(counts)
        idf = {t: math.log(n_docs / doc_freq[t]) for t in vocab}

    rows, cols, vals = [], [], []
    for i, c in enumerate(counts):
        for t in sorted(c):
            rows.append(i)
            cols.append(column[t])
            vals.append(c[t] * idf[t])
    matrix = sp.csr_matrix((vals, (rows, cols)), shape=(len(counts), len(vocab)), dtype=np.float64)
    return EmbeddingMatrix(matrix, "tfidf", columns=vocab)


# ---------------------------------------------------------------------------
# JSON Lines interchange
# ---------------------------------------------------------------------------


def _n_expected(corpus_or_n: Corpus | int) -> int:
    return corpus_or_n if isinstance(corpus_or_n, int) else len(corpus_or_n)


def read_embeddings(
    path: str | os.PathLike[str],
    corpus_or_n: Corpus | int,
    provider_tag: str = "external",
) -> EmbeddingMatrix:
    """Load a JSON Lines embedding file, validating every record.

    Each line is ``{"method_id": int, "vector": [float, ...]}``; lines of
    the sparse form ``{"method_id", "dim", "indices", "values"}`` are also
    accepted. Errors name the first offending record.
    """
    n = _n_expected(corpus_or_n)
    rows: dict[int, Any] = {}
    dim: int | None = None
    sparse_rows = False
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"line {lineno}: invalid JSON ({exc.msg})") from None
            if not isinstance(rec, dict) or "method_id" not in rec:
                raise ValueError(f"line {lineno}: record has no method_id")
            mid = rec["method_id"]
            if not isinstance(mid, int) or isinstance(mid, bool) or not 0 <= mid < n:
                raise ValueError(f"line {lineno}: method_id {mid!r} outside 0..{n - 1}")
            if mid in rows:
                raise ValueError(f"line {lineno}: duplicate method_id {mid}")
            if "vector" in rec:
                vec = np.asarray(rec["vector"], dtype=np.float64)
                if vec.ndim != 1:
                    raise ValueError(f"line {lineno}: method_id {mid} vector is not flat")
                length = vec.shape[0]
                values = vec
            else:
                sparse_rows = True
                length = int(rec["dim"])
                idx = np.asarray(rec["indices"], dtype=np.int64)
                values = np.asarray(rec["values"], dtype=np.float64)
                if idx.shape != values.shape or (idx.size and (idx.min() < 0 or idx.max() >= length)):
                    raise ValueError(f"line {lineno}: method_id {mid} has malformed sparse indices")
                vec = (idx, values)
            if dim is None:
                dim = length
            elif length != dim:
                raise ValueError(f"line {lineno}: method_id {mid} has length {length}, expected {dim}")
            if not np.all(np.isfinite(values)):
                raise ValueError(f"line {lineno}: method_id {mid} contains non-finite values")
            rows[mid] = vec
    for mid in range(n):
        if mid not in rows:
            raise ValueError(f"missing method_id {mid}")
    if dim is None:
        raise ValueError("embedding file is empty")

    if sparse_rows:
        r, c, v = [], [], []
        for mid in range(n):
            entry = rows[mid]
            if isinstance(entry, tuple):
                idx, vals = entry
            else:
                idx = np.flatnonzero(entry)
                vals = entry[idx]
            r.extend([mid] * len(idx))
            c.extend(idx.tolist())
            v.extend(vals.tolist())
        matrix = sp.csr_matrix((v, (r, c)), shape=(n, dim))
        return EmbeddingMatrix(matrix, provider_tag)
    return EmbeddingMatrix(np.vstack([rows[i] for i in range(n)]), provider_tag)


def import_embeddings(path: str | os.PathLike[str], corpus: Corpus | int) -> EmbeddingMatrix:
    """Externally computed vectors (e.g. from a neural code encoder)."""
    return read_embeddings(path, corpus, "external")


def write_embeddings(path: str | os.PathLike[str], matrix: EmbeddingMatrix, sparse: bool | None = None) -> None:
    """Write ``matrix`` as JSON Lines, one record per method in id order.

    Sparse matrices are written in the sparse record form unless
    ``sparse=False``.
    """
    sparse = matrix.is_sparse if sparse is None else sparse
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        if sparse:
            csr = sp.csr_matrix(matrix.values)
            for i in range(matrix.n_rows):
                start, end = csr.indptr[i], csr.indptr[i + 1]
                rec = {
                    "method_id": i,
                    "dim": matrix.dim,
                    "indices": csr.indices[start:end].tolist(),
                    "values": csr.data[start:end].tolist(),
                }
                fh.write(json.dumps(rec) + "\n")
        else:
            dense = matrix.dense()
            for i in range(matrix.n_rows):
                fh.write(json.dumps({"method_id": i, "vector": dense[i].tolist()}) + "\n")
