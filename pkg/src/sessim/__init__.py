"""Simulated interactive search sessions over indexed test collections.

The toolkit runs a complex-searcher loop (query reformulation, snippet
scanning, probabilistic clicking, reading, judging, stopping) against a
BM25 index with an optional rerank stage, logs every action with its
cost, and evaluates the logs with effort-based, session-DCG, and
session-RBP measures.
"""

__version__ = "0.1.0"
