"""Inverted index with BM25 scoring and a retrieve-then-rerank pipeline."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Protocol, Sequence

import numpy as np

from sessim.collection import Document, tokenize
from sessim.kernels import bm25_accumulate


class RetrievalError(Exception):
    pass


class RerankError(RetrievalError):
    """Provider unreachable or returned a malformed response."""


@dataclass(frozen=True)
class BM25Params:
    k1: float = 1.2
    b: float = 0.75

    def __post_init__(self):
        if self.k1 <= 0:
            raise ValueError(f"k1 must be > 0, got {self.k1}")
        if not 0.0 <= self.b <= 1.0:
            raise ValueError(f"b must be in [0, 1], got {self.b}")


@dataclass
class RankedList:
    """Query plus (doc_id, score) items, best first.

    Scores are non-increasing for retrieve() output; after a rerank the
    rescored head and the untouched tail are each monotone but may sit on
    different score scales.
    """

    query: str
    items: list[tuple[str, float]] = field(default_factory=list)

    def doc_ids(self) -> list[str]:
        return [d for d, _ in self.items]

    def __len__(self) -> int:
        return len(self.items)


class InvertedIndex:
    """Postings in CSR layout plus per-document statistics.

    Immutable after build; safe to share across concurrent readers.
    """

    def __init__(
        self,
        doc_ids: list[str],
        terms: dict[str, int],
        post_ptr: np.ndarray,
        post_doc: np.ndarray,
        post_tf: np.ndarray,
        doc_len: np.ndarray,
    ):
        self.doc_ids = doc_ids
        self.terms = terms
        self.post_ptr = post_ptr
        self.post_doc = post_doc
        self.post_tf = post_tf
        self.doc_len_arr = doc_len
        self.N = len(doc_ids)
        self.avgdl = float(doc_len.sum() / self.N) if self.N > 0 else 0.0
        self._doc_index = {d: i for i, d in enumerate(doc_ids)}
        # rank of each doc in ascending doc_id order, for byte-stable tie-breaks
        order = sorted(range(self.N), key=lambda i: doc_ids[i])
        self.tie_rank = np.empty(self.N, dtype=np.int64)
        for r, i in enumerate(order):
            self.tie_rank[i] = r

    def df(self, term: str) -> int:
        tid = self.terms.get(term)
        if tid is None:
            return 0
        return int(self.post_ptr[tid + 1] - self.post_ptr[tid])

    def doc_length(self, doc_id: str) -> int:
        return int(self.doc_len_arr[self._doc_index[doc_id]])

    def has_doc(self, doc_id: str) -> bool:
        return doc_id in self._doc_index

    def postings(self, term: str) -> list[tuple[str, int]]:
        """(doc_id, term frequency) pairs for a term, in corpus order."""
        tid = self.terms.get(term)
        if tid is None:
            return []
        s, e = int(self.post_ptr[tid]), int(self.post_ptr[tid + 1])
        return [
            (self.doc_ids[int(d)], int(tf))
            for d, tf in zip(self.post_doc[s:e], self.post_tf[s:e])
        ]

    def tf(self, term: str, doc_id: str) -> int:
        tid = self.terms.get(term)
        if tid is None:
            return 0
        i = self._doc_index[doc_id]
        s, e = int(self.post_ptr[tid]), int(self.post_ptr[tid + 1])
        pos = np.searchsorted(self.post_doc[s:e], i)
        if pos < e - s and self.post_doc[s + pos] == i:
            return int(self.post_tf[s + pos])
        return 0


def build_index(corpus: Iterable[Document]) -> InvertedIndex:
    """Index a corpus; an empty corpus yields a valid N=0 index."""
    doc_ids: list[str] = []
    doc_lens: list[int] = []
    terms: dict[str, int] = {}
    # per-term posting accumulators; doc ints ascend because docs are scanned in order
    post_docs: list[list[int]] = []
    post_tfs: list[list[int]] = []
    for doc in corpus:
        i = len(doc_ids)
        doc_ids.append(doc.doc_id)
        tokens = tokenize(doc.text)
        doc_lens.append(len(tokens))
        counts: dict[str, int] = {}
        for t in tokens:
            counts[t] = counts.get(t, 0) + 1
        for t, tf in counts.items():
            tid = terms.get(t)
            if tid is None:
                tid = len(terms)
                terms[t] = tid
                post_docs.append([])
                post_tfs.append([])
            post_docs[tid].append(i)
            post_tfs[tid].append(tf)

    ptr = np.zeros(len(terms) + 1, dtype=np.int64)
    for tid, docs in enumerate(post_docs):
        ptr[tid + 1] = ptr[tid] + len(docs)
    nnz = int(ptr[-1])
    post_doc = np.empty(nnz, dtype=np.int64)
    post_tf = np.empty(nnz, dtype=np.float64)
    for tid, (docs, tfs) in enumerate(zip(post_docs, post_tfs)):
        s = int(ptr[tid])
        post_doc[s : s + len(docs)] = docs
        post_tf[s : s + len(tfs)] = tfs
    return InvertedIndex(
        doc_ids=doc_ids,
        terms=terms,
        post_ptr=ptr,
        post_doc=post_doc,
        post_tf=post_tf,
        doc_len=np.asarray(doc_lens, dtype=np.float64),
    )


def idf(index: InvertedIndex, term: str) -> tuple[float, float]:
    """(raw, normalized) inverse document frequency of a term.

    raw is the non-negative form ln(1 + (N - df + 0.5)/(df + 0.5)), with
    df = 0 for unseen terms. normalized is ln(N/df)/ln(N) clamped to
    [0, 1]; unseen terms get 1.0 (maximally rare) and N = 1 degenerates
    to 0.0.
    """
    if index.N == 0:
        raise RetrievalError("idf undefined on an empty index")
    n = index.N
    df = index.df(term)
    raw = math.log(1.0 + (n - df + 0.5) / (df + 0.5))
    if df == 0:
        norm = 1.0
    elif n == 1:
        norm = 0.0
    else:
        norm = math.log(n / df) / math.log(n)
        norm = min(1.0, max(0.0, norm))
    return raw, norm


def bm25_score(
    index: InvertedIndex, params: BM25Params, query_terms: Sequence[str], doc_id: str
) -> float:
    """Sum of per-term BM25 contributions; terms absent from the doc add 0.

    Query terms carry multiplicity: a duplicated term contributes twice.
    """
    if not index.has_doc(doc_id):
        raise RetrievalError(f"unknown doc_id {doc_id!r}")
    dl = index.doc_length(doc_id)
    k1, b = params.k1, params.b
    denom_norm = k1 * (1.0 - b + b * dl / index.avgdl)
    score = 0.0
    for t in query_terms:
        tf = index.tf(t, doc_id)
        if tf == 0:
            continue
        raw, _ = idf(index, t)
        score += raw * tf * (k1 + 1.0) / (tf + denom_norm)
    return score


def retrieve(index: InvertedIndex, params: BM25Params, query: str, k: int) -> RankedList:
    """Top-k documents by BM25, ties broken by ascending doc_id.

    Only documents containing at least one query term are candidates.
    """
    if k < 0:
        raise ValueError(f"k must be >= 0, got {k}")
    tokens = tokenize(query)
    if k == 0 or not tokens or index.N == 0:
        return RankedList(query=query, items=[])

    tids = [index.terms.get(t, -1) for t in tokens]
    starts = np.asarray(
        [index.post_ptr[t] if t >= 0 else 0 for t in tids], dtype=np.int64
    )
    ends = np.asarray(
        [index.post_ptr[t + 1] if t >= 0 else 0 for t in tids], dtype=np.int64
    )
    idfs = np.asarray([idf(index, t)[0] for t in tokens], dtype=np.float64)
    scores = bm25_accumulate(
        starts, ends, index.post_doc, index.post_tf, idfs,
        index.doc_len_arr, index.avgdl, params.k1, params.b,
    )
    cand = np.flatnonzero(scores > 0.0)
    if cand.size == 0:
        return RankedList(query=query, items=[])
    order = np.lexsort((index.tie_rank[cand], -scores[cand]))
    top = cand[order[: min(k, cand.size)]]
    return RankedList(
        query=query, items=[(index.doc_ids[int(i)], float(scores[i])) for i in top]
    )


class RerankProvider(Protocol):
    def rescore(self, query: str, doc_ids: Sequence[str]) -> list[float]: ...


class IdentityReranker:
    """No-op provider: rerank() returns its input unchanged."""


IDENTITY = IdentityReranker()


@dataclass(frozen=True)
class RerankConfig:
    cutoff: int = 100
    provider: object = IDENTITY

    def __post_init__(self):
        if self.cutoff <= 0:
            raise ValueError(f"cutoff must be > 0, got {self.cutoff}")


class HttpReranker:
    """Client for the POST /rerank provider protocol.

    Holds the corpus text lookup so callers only pass doc_ids.
    """

    def __init__(self, base_url: str, documents: Mapping[str, Document], timeout: float = 30.0):
        self.base_url = base_url.rstrip("/")
        self._documents = documents
        self.timeout = timeout

    def rescore(self, query: str, doc_ids: Sequence[str]) -> list[float]:
        import requests

        try:
            docs = [{"id": d, "text": self._documents[d].text} for d in doc_ids]
        except KeyError as exc:
            raise RerankError(f"no text for doc_id {exc.args[0]!r}") from exc
        try:
            resp = requests.post(
                f"{self.base_url}/rerank",
                json={"query": query, "docs": docs},
                timeout=self.timeout,
            )
            resp.raise_for_status()
            payload = resp.json()
        except requests.RequestException as exc:
            raise RerankError(f"rerank provider unreachable: {exc}") from exc
        except ValueError as exc:
            raise RerankError(f"rerank provider returned non-JSON: {exc}") from exc
        scores = payload.get("scores") if isinstance(payload, dict) else None
        if not isinstance(scores, list):
            raise RerankError("rerank response missing 'scores' list")
        return scores


def rerank(ranked: RankedList, query: str, config: RerankConfig) -> RankedList:
    """Rescore the top-cutoff items via the provider; tail passes through.

    The Identity provider returns the input unchanged. The output is
    always a permutation of the input doc_ids.
    """
    if isinstance(config.provider, IdentityReranker):
        return ranked
    head = ranked.items[: config.cutoff]
    tail = ranked.items[config.cutoff :]
    if not head:
        return ranked
    scores = config.provider.rescore(query, [d for d, _ in head])
    if len(scores) != len(head):
        raise RerankError(
            f"provider returned {len(scores)} scores for {len(head)} docs"
        )
    new_head = []
    for (doc_id, _), s in zip(head, scores):
        s = float(s)
        if not math.isfinite(s):
            raise RerankError(f"non-finite score for doc {doc_id!r}")
        new_head.append((doc_id, s))
    new_head.sort(key=lambda it: (-it[1], it[0]))
    return RankedList(query=ranked.query, items=new_head + tail)


def save_index(index: InvertedIndex, path: str | Path) -> None:
    """Single-file snapshot (npz with JSON-encoded string tables)."""
    vocab = [None] * len(index.terms)
    for t, tid in index.terms.items():
        vocab[tid] = t
    np.savez_compressed(
        path,
        post_ptr=index.post_ptr,
        post_doc=index.post_doc,
        post_tf=index.post_tf,
        doc_len=index.doc_len_arr,
        doc_ids=np.array(json.dumps(index.doc_ids)),
        vocab=np.array(json.dumps(vocab)),
    )


def load_index(path: str | Path) -> InvertedIndex:
    with np.load(path, allow_pickle=False) as data:
        doc_ids = json.loads(str(data["doc_ids"]))
        vocab = json.loads(str(data["vocab"]))
        return InvertedIndex(
            doc_ids=doc_ids,
            terms={t: i for i, t in enumerate(vocab)},
            post_ptr=data["post_ptr"],
            post_doc=data["post_doc"],
            post_tf=data["post_tf"],
            doc_len=data["doc_len"],
        )
