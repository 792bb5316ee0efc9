#!/usr/bin/env python3
"""Benchmark the BM25 scoring kernel: numba JIT vs pure-numpy fallback.

The same comparison can be driven end to end through the env flag
(SESSIM_PURE_NUMPY=1 selects the numpy path at import time); here both
implementations are timed side by side on one synthetic index.

Usage: python benchmarks/bench_bm25.py [--docs 50000] [--queries 300]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from sessim.collection import Document
from sessim.kernels import _score_loops, _score_numpy, backend
from sessim.retrieval import BM25Params, build_index, idf, retrieve


def synthetic_corpus(n_docs: int, vocab_size: int, rng: np.random.Generator):
    weights = 1.0 / np.arange(1, vocab_size + 1)  # Zipf-ish term distribution
    weights /= weights.sum()
    vocab = np.array([f"w{i:05d}" for i in range(vocab_size)])
    docs = []
    for i in range(n_docs):
        length = int(rng.integers(20, 200))
        docs.append(Document(f"d{i:06d}", " ".join(rng.choice(vocab, size=length, p=weights))))
    return docs


def kernel_args(index, params, query_terms):
    tids = [index.terms.get(t, -1) for t in query_terms]
    starts = np.asarray([index.post_ptr[t] if t >= 0 else 0 for t in tids], dtype=np.int64)
    ends = np.asarray([index.post_ptr[t + 1] if t >= 0 else 0 for t in tids], dtype=np.int64)
    idfs = np.asarray([idf(index, t)[0] for t in query_terms])
    return (starts, ends, index.post_doc, index.post_tf, idfs,
            index.doc_len_arr, index.avgdl, params.k1, params.b)


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--docs", type=int, default=50_000)
    parser.add_argument("--vocab", type=int, default=20_000)
    parser.add_argument("--queries", type=int, default=300)
    parser.add_argument("--terms", type=int, default=4, help="terms per query")
    args = parser.parse_args()

    rng = np.random.default_rng(1234)
    print(f"building index over {args.docs} docs (active backend: {backend()}) ...")
    t0 = time.perf_counter()
    index = build_index(synthetic_corpus(args.docs, args.vocab, rng))
    print(f"  built in {time.perf_counter() - t0:.1f}s "
          f"({len(index.terms)} terms, {index.post_doc.size} postings)")

    params = BM25Params()
    vocab = list(index.terms)
    queries = [
        [vocab[i] for i in rng.integers(0, len(vocab), size=args.terms)]
        for _ in range(args.queries)
    ]

    # one warmup call so JIT compilation stays out of the timings
    _score_loops(*kernel_args(index, params, queries[0]))
    _score_numpy(*kernel_args(index, params, queries[0]))

    timings = {}
    for name, fn in (("numba", _score_loops), ("numpy", _score_numpy)):
        checksum = 0.0
        t0 = time.perf_counter()
        for q in queries:
            scores = fn(*kernel_args(index, params, q))
            checksum += float(scores.sum())
        timings[name] = time.perf_counter() - t0
        print(f"  {name:6s}: {timings[name]:.3f}s total, "
              f"{1000 * timings[name] / args.queries:.2f} ms/query (checksum {checksum:.3e})")
    print(f"speedup numba vs numpy: {timings['numpy'] / timings['numba']:.2f}x")

    t0 = time.perf_counter()
    for q in queries[:50]:
        retrieve(index, params, " ".join(q), 100)
    print(f"end-to-end retrieve(k=100): {1000 * (time.perf_counter() - t0) / 50:.2f} ms/query")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
