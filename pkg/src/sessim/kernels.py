"""BM25 score-accumulation kernels.

The scoring loop over CSR-layout postings is the hot path of batch
simulation (every simulated query hits it), so it is JIT-compiled with
numba by default. Set SESSIM_PURE_NUMPY=1 to select the pure-numpy
fallback; the fallback is also used automatically when numba is not
importable. Both paths accumulate per-term contributions in the same
order, so their results agree bitwise.
"""

from __future__ import annotations

import os

import numpy as np


def _score_numpy(term_starts, term_ends, post_doc, post_tf, idf, doc_len, avgdl, k1, b):
    n_docs = doc_len.shape[0]
    scores = np.zeros(n_docs, dtype=np.float64)
    denom = k1 * (1.0 - b + b * doc_len / avgdl)
    for j in range(term_starts.shape[0]):
        s, e = term_starts[j], term_ends[j]
        if s == e:
            continue
        docs = post_doc[s:e]
        tf = post_tf[s:e]
        scores[docs] += idf[j] * tf * (k1 + 1.0) / (tf + denom[docs])
    return scores


def _score_loops(term_starts, term_ends, post_doc, post_tf, idf, doc_len, avgdl, k1, b):
    n_docs = doc_len.shape[0]
    scores = np.zeros(n_docs, dtype=np.float64)
    denom = k1 * (1.0 - b + b * doc_len / avgdl)
    for j in range(term_starts.shape[0]):
        w = idf[j]
        for p in range(term_starts[j], term_ends[j]):
            d = post_doc[p]
            tf = post_tf[p]
            scores[d] += w * tf * (k1 + 1.0) / (tf + denom[d])
    return scores


_FORCE_NUMPY = os.environ.get("SESSIM_PURE_NUMPY", "") == "1"

if _FORCE_NUMPY:
    BACKEND = "numpy"
    bm25_accumulate = _score_numpy
else:
    try:
        from numba import njit

        bm25_accumulate = njit(cache=True)(_score_loops)
        BACKEND = "numba"
    except ImportError:
        BACKEND = "numpy"
        bm25_accumulate = _score_numpy


def backend() -> str:
    """Active kernel backend, "numba" or "numpy"."""
    return BACKEND
