import pytest
from pathlib import Path

from sessim.collection import (
    Document,
    load_corpus,
    load_qrels,
    load_stopwords,
    load_topics,
)
from sessim.querygen import PoolDirLoader
from sessim.retrieval import build_index
from sessim.session import SimResources

REPO = Path(__file__).resolve().parent.parent
SYNTHETIC = REPO / "data" / "synthetic"
CONFIG = REPO / "configs" / "synthetic.yaml"


@pytest.fixture(scope="session")
def toy_docs():
    return [
        Document("d1", "the quick brown fox jumps over the lazy dog"),
        Document("d2", "a fox den near the river bank"),
        Document("d3", "banking regulations and fox hunting law"),
        Document("d4", "quick quick quick repetition test"),
        Document("d5", "completely unrelated text about pottery"),
    ]


@pytest.fixture(scope="session")
def toy_index(toy_docs):
    return build_index(toy_docs)


@pytest.fixture(scope="session")
def synthetic():
    """The bundled synthetic collection, loaded once per test session."""
    docs = load_corpus(SYNTHETIC / "corpus.jsonl")
    topics = load_topics(SYNTHETIC / "topics.jsonl")
    qrels = load_qrels(SYNTHETIC / "qrels.txt")
    stopwords = load_stopwords(None)
    index = build_index(docs)
    resources = SimResources(
        documents={d.doc_id: d for d in docs},
        qrels=qrels,
        stopwords=stopwords,
        pool_loader=PoolDirLoader(SYNTHETIC / "pools"),
    )
    return {
        "docs": docs,
        "topics": topics,
        "qrels": qrels,
        "stopwords": stopwords,
        "index": index,
        "resources": resources,
    }
