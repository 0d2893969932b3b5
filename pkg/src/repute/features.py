"""Bag-of-n-grams vectorization, LSA embeddings and cosine similarity."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence, Union

import numpy as np
import scipy.sparse as sp

from .corpus import TokenizedReview

Weighting = str  # "count" | "tfidf"
DocLike = Union[TokenizedReview, Sequence[str]]


def _tokens(doc: DocLike) -> Sequence[str]:
    return doc.tokens if isinstance(doc, TokenizedReview) else doc


def ngrams(tokens: Sequence[str], n: int) -> list[str]:
    if n < 1:
        raise ValueError("n-gram order must be >= 1")
    return [" ".join(tokens[i:i + n]) for i in range(len(tokens) - n + 1)]


def doc_terms(tokens: Sequence[str], orders: Sequence[int]) -> list[str]:
    out: list[str] = []
    for n in orders:
        out.extend(ngrams(tokens, n))
    return out


@dataclass(frozen=True, eq=False)
class Vocabulary:
    terms: tuple[str, ...]
    doc_freq: np.ndarray
    n_docs: int
    ngram: tuple[int, ...] = (1,)

    def __post_init__(self):
        if len(set(self.terms)) != len(self.terms):
            raise ValueError("duplicate vocabulary terms")
        if len(self.doc_freq) != len(self.terms):
            raise ValueError("doc_freq length does not match terms")

    def __len__(self) -> int:
        return len(self.terms)

    def __contains__(self, term: str) -> bool:
        return term in self.index

    def __eq__(self, other) -> bool:
        if not isinstance(other, Vocabulary):
            return NotImplemented
        return (
            self.terms == other.terms
            and self.n_docs == other.n_docs
            and self.ngram == other.ngram
            and np.array_equal(self.doc_freq, other.doc_freq)
        )

    __hash__ = None

    @cached_property
    def index(self) -> dict[str, int]:
        return {t: i for i, t in enumerate(self.terms)}

    @cached_property
    def idf(self) -> np.ndarray:
        """Smoothed inverse document frequency, ``ln((1+N)/(1+df)) + 1``."""
        return np.log((1.0 + self.n_docs) / (1.0 + self.doc_freq)) + 1.0

    @cached_property
    def digest(self) -> str:
        h = hashlib.sha256()
        h.update(("ngram=" + ",".join(map(str, self.ngram)) + f";n_docs={self.n_docs}\n").encode())
        for term, df in zip(self.terms, self.doc_freq):
            h.update(f"{term}\t{int(df)}\n".encode())
        return h.hexdigest()

    def to_dict(self) -> dict:
        return {
            "terms": list(self.terms),
            "doc_freq": [int(x) for x in self.doc_freq],
            "n_docs": self.n_docs,
            "ngram": list(self.ngram),
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "Vocabulary":
        return cls(
            terms=tuple(d["terms"]),
            doc_freq=np.asarray(d["doc_freq"], dtype=np.int64),
            n_docs=int(d["n_docs"]),
            ngram=tuple(int(n) for n in d["ngram"]),
        )


def build_vocabulary(docs: Sequence[DocLike], ngram: Iterable[int] = (1,), min_df: int = 1) -> Vocabulary:
    """Collect every n-gram of the requested orders seen in at least ``min_df`` docs."""
    if not docs:
        raise ValueError("cannot build a vocabulary from an empty corpus")
    orders = tuple(sorted(set(ngram)))
    if not orders or orders[0] < 1:
        raise ValueError(f"invalid n-gram orders {orders}")
    df: dict[str, int] = {}
    for doc in docs:
        for term in set(doc_terms(_tokens(doc), orders)):
            df[term] = df.get(term, 0) + 1
    terms = tuple(sorted(t for t, c in df.items() if c >= min_df))
    return Vocabulary(
        terms=terms,
        doc_freq=np.array([df[t] for t in terms], dtype=np.int64),
        n_docs=len(docs),
        ngram=orders,
    )


def _check_weighting(weighting: str):
    if weighting not in ("count", "tfidf"):
        raise ValueError(f"weighting must be 'count' or 'tfidf', got {weighting!r}")


def vectorize(doc: DocLike, vocab: Vocabulary, weighting: Weighting = "count") -> np.ndarray:
    """Dense term vector of ``doc``; out-of-vocabulary n-grams are dropped.

    ``tfidf`` multiplies raw counts by the vocabulary idf and L2-normalizes.
    """
    _check_weighting(weighting)
    vec = np.zeros(len(vocab))
    index = vocab.index
    for term in doc_terms(_tokens(doc), vocab.ngram):
        j = index.get(term)
        if j is not None:
            vec[j] += 1.0
    if weighting == "tfidf":
        vec *= vocab.idf
        norm = np.linalg.norm(vec)
        if norm > 0:
            vec /= norm
    return vec


def vectorize_many(docs: Sequence[DocLike], vocab: Vocabulary, weighting: Weighting = "count") -> sp.csr_matrix:
    """Sparse doc x term matrix, row i equal to ``vectorize(docs[i], ...)``."""
    _check_weighting(weighting)
    index = vocab.index
    indptr = [0]
    indices: list[int] = []
    data: list[float] = []
    for doc in docs:
        counts: dict[int, float] = {}
        for term in doc_terms(_tokens(doc), vocab.ngram):
            j = index.get(term)
            if j is not None:
                counts[j] = counts.get(j, 0.0) + 1.0
        cols = sorted(counts)
        indices.extend(cols)
        data.extend(counts[c] for c in cols)
        indptr.append(len(indices))
    mat = sp.csr_matrix(
        (np.asarray(data, dtype=float), np.asarray(indices, dtype=np.int64), np.asarray(indptr)),
        shape=(len(docs), len(vocab)),
    )
    if weighting == "tfidf":
        mat = mat.multiply(vocab.idf[np.newaxis, :]).tocsr()
        norms = np.sqrt(np.asarray(mat.multiply(mat).sum(axis=1)).ravel())
        norms[norms == 0] = 1.0
        mat = sp.diags(1.0 / norms) @ mat
        mat = mat.tocsr()
    return mat


# ---------------------------------------------------------------------------
# LSA
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class EmbeddingSpace:
    projection: np.ndarray  # |V| x k, orthonormal columns
    singular_values: np.ndarray
    n_docs: int

    @property
    def rank(self) -> int:
        return int(self.singular_values.shape[0])

    @property
    def dim(self) -> int:
        return int(self.projection.shape[0])

    def reconstruct(self, matrix) -> np.ndarray:
        """Rank-k approximation ``M P P^T`` of a doc x term matrix."""
        m = _dense(matrix)
        if m.shape[1] != self.dim:
            raise ValueError(f"matrix has {m.shape[1]} columns, space expects {self.dim}")
        return (m @ self.projection) @ self.projection.T


def _dense(matrix) -> np.ndarray:
    if sp.issparse(matrix):
        return matrix.toarray().astype(float)
    return np.asarray(matrix, dtype=float)


def default_rank(n_docs: int, n_terms: int, cap: int = 100) -> int:
    return max(1, min(cap, min(n_docs, n_terms) - 1))


def lsa_fit(matrix, k: Optional[int] = None) -> EmbeddingSpace:
    """Truncated SVD of a weighted doc x term matrix.

    Keeps the top ``k`` right singular vectors as the term-space projection.
    Each vector's sign is fixed so that its largest-magnitude entry is
    positive, which makes the fit reproducible across LAPACK builds.
    """
    m = _dense(matrix)
    if m.ndim != 2 or 0 in m.shape:
        raise ValueError("LSA needs a non-empty 2-d matrix")
    n_docs, n_terms = m.shape
    if k is None:
        k = default_rank(n_docs, n_terms)
    if not 1 <= k <= min(n_docs, n_terms):
        raise ValueError(f"rank k={k} outside [1, {min(n_docs, n_terms)}]")
    _, s, vt = np.linalg.svd(m, full_matrices=False)
    vt = vt[:k]
    pivots = np.argmax(np.abs(vt), axis=1)
    signs = np.sign(vt[np.arange(k), pivots])
    signs[signs == 0] = 1.0
    vt = vt * signs[:, np.newaxis]
    return EmbeddingSpace(projection=vt.T.copy(), singular_values=s[:k].copy(), n_docs=n_docs)


def embed(doc: np.ndarray, space: EmbeddingSpace) -> np.ndarray:
    doc = np.asarray(doc, dtype=float)
    if doc.ndim != 1 or doc.shape[0] != space.dim:
        raise ValueError(f"document has dimension {doc.shape}, space expects ({space.dim},)")
    return doc @ space.projection


def cosine(a, b) -> float:
    """Cosine similarity; 0 when either vector is zero."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.clip(np.dot(a, b) / (na * nb), -1.0, 1.0))


def lsa_vectors(
    docs: Sequence[TokenizedReview],
    k: Optional[int] = None,
    weighting: Weighting = "tfidf",
) -> dict[str, np.ndarray]:
    """Fit LSA on ``docs`` themselves and return one embedding per review id."""
    vocab = build_vocabulary(docs)
    ids = [d.review_id for d in docs]
    if len(vocab) == 0:
        return {rid: np.zeros(1) for rid in ids}
    matrix = vectorize_many(docs, vocab, weighting)
    if k is not None:
        k = min(k, min(matrix.shape))
    space = lsa_fit(matrix, k)
    embedded = _dense(matrix) @ space.projection
    return {rid: embedded[i] for i, rid in enumerate(ids)}


# ---------------------------------------------------------------------------
# externally computed vectors
# ---------------------------------------------------------------------------


def load_external_vectors(path) -> dict[str, np.ndarray]:
    """Read ``review_id c1 c2 ...`` lines; every vector must share one dimension."""
    vectors: dict[str, np.ndarray] = {}
    dim = None
    with open(Path(path), encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            parts = raw.split()
            if not parts:
                continue
            rid, comps = parts[0], parts[1:]
            try:
                vec = np.array([float(c) for c in comps])
            except ValueError:
                raise ValueError(f"line {line_no}: non-numeric component") from None
            if not comps or not np.all(np.isfinite(vec)):
                raise ValueError(f"line {line_no}: vector for {rid!r} is empty or not finite")
            if dim is None:
                dim = len(vec)
            elif len(vec) != dim:
                raise ValueError(
                    f"line {line_no}: vector for {rid!r} has dimension {len(vec)}, expected {dim}"
                )
            if rid in vectors:
                raise ValueError(f"line {line_no}: duplicate id {rid!r}")
            vectors[rid] = vec
    return vectors


def write_external_vectors(vectors: Mapping[str, np.ndarray], path):
    with open(Path(path), "w", encoding="utf-8") as fh:
        for rid, vec in vectors.items():
            fh.write(rid + " " + " ".join(repr(float(x)) for x in vec) + "\n")
