"""Test-collection ingestion: corpora, topics, qrels, stopwords, tokenization."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Union

from sessim._stopwords import DEFAULT_STOPWORDS

_TOKEN = re.compile(r"[^\W_]+", re.UNICODE)


class CollectionError(Exception):
    """Malformed or inconsistent collection file."""


@dataclass(frozen=True)
class Document:
    doc_id: str
    text: str


@dataclass(frozen=True)
class Topic:
    topic_id: str
    title: str
    description: str = ""
    narrative: str = ""


@dataclass(frozen=True)
class Judged:
    """A graded relevance judgment (grade 0 means judged non-relevant)."""

    grade: int


class _Unjudged:
    __slots__ = ()

    def __repr__(self) -> str:
        return "Unjudged"


UNJUDGED = _Unjudged()

RelevanceGrade = Union[Judged, _Unjudged]


def is_relevant(g: RelevanceGrade) -> bool:
    """Binarized relevance: judged with grade > 0."""
    return isinstance(g, Judged) and g.grade > 0


def grade_value(g: RelevanceGrade) -> int:
    """Graded gain value; unjudged counts as 0."""
    return g.grade if isinstance(g, Judged) else 0


def tokenize(text: str) -> list[str]:
    """Lowercase and split on every non-alphanumeric character.

    No stemming; empty tokens are dropped. Total on any unicode string.
    """
    return _TOKEN.findall(text.lower())


class QrelStore:
    """Graded relevance judgments keyed by (topic_id, doc_id)."""

    def __init__(self, entries: Iterable[tuple[str, str, int]] = ()):
        self._grades: dict[tuple[str, str], int] = {}
        for topic_id, doc_id, g in entries:
            self.add(topic_id, doc_id, g)

    def add(self, topic_id: str, doc_id: str, grade_: int) -> None:
        if grade_ < 0:
            raise CollectionError(f"negative grade for ({topic_id}, {doc_id}): {grade_}")
        key = (topic_id, doc_id)
        if key in self._grades:
            raise CollectionError(f"duplicate qrel entry for ({topic_id}, {doc_id})")
        self._grades[key] = grade_

    def lookup(self, topic_id: str, doc_id: str) -> RelevanceGrade:
        g = self._grades.get((topic_id, doc_id))
        return UNJUDGED if g is None else Judged(g)

    def relevant_grades(self, topic_id: str) -> list[int]:
        """All judged grades > 0 for a topic (used for ideal-DCG and Bpref)."""
        return [g for (t, _), g in self._grades.items() if t == topic_id and g > 0]

    def judged_counts(self, topic_id: str) -> tuple[int, int]:
        """(relevant, non-relevant) judged counts for a topic."""
        rel = nrel = 0
        for (t, _), g in self._grades.items():
            if t == topic_id:
                if g > 0:
                    rel += 1
                else:
                    nrel += 1
        return rel, nrel

    def __len__(self) -> int:
        return len(self._grades)

    def entries(self) -> list[tuple[str, str, int]]:
        return [(t, d, g) for (t, d), g in self._grades.items()]


def grade(qrels: QrelStore, topic_id: str, doc_id: str) -> RelevanceGrade:
    """Judged(g) if the pair was judged, else Unjudged."""
    return qrels.lookup(topic_id, doc_id)


def _read_jsonl(path: Path) -> Iterable[tuple[int, dict]]:
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CollectionError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from exc
            if not isinstance(obj, dict):
                raise CollectionError(f"{path}:{lineno}: expected a JSON object")
            yield lineno, obj


def load_corpus(path: str | Path) -> list[Document]:
    """Load a JSON-lines corpus (one {"doc_id", "text"} object per line)."""
    path = Path(path)
    if not path.exists():
        raise CollectionError(f"corpus file not found: {path}")
    docs: list[Document] = []
    seen: set[str] = set()
    for lineno, obj in _read_jsonl(path):
        for field in ("doc_id", "text"):
            if field not in obj or not isinstance(obj[field], str):
                raise CollectionError(f"{path}:{lineno}: missing or non-string field {field!r}")
        doc_id = obj["doc_id"]
        if not doc_id:
            raise CollectionError(f"{path}:{lineno}: empty doc_id")
        if doc_id in seen:
            raise CollectionError(f"{path}:{lineno}: duplicate doc_id {doc_id!r}")
        seen.add(doc_id)
        docs.append(Document(doc_id=doc_id, text=obj["text"]))
    return docs


def load_topics(path: str | Path) -> list[Topic]:
    """Load JSON-lines topics; absent description/narrative become ""."""
    path = Path(path)
    if not path.exists():
        raise CollectionError(f"topics file not found: {path}")
    topics: list[Topic] = []
    seen: set[str] = set()
    for lineno, obj in _read_jsonl(path):
        for field in ("topic_id", "title"):
            if field not in obj or not isinstance(obj[field], str) or not obj[field]:
                raise CollectionError(f"{path}:{lineno}: missing or empty field {field!r}")
        topic_id = obj["topic_id"]
        if topic_id in seen:
            raise CollectionError(f"{path}:{lineno}: duplicate topic_id {topic_id!r}")
        seen.add(topic_id)
        topics.append(
            Topic(
                topic_id=topic_id,
                title=obj["title"],
                description=obj.get("description", "") or "",
                narrative=obj.get("narrative", "") or "",
            )
        )
    return topics


def load_qrels(path: str | Path) -> QrelStore:
    """Load TREC 4-column qrels: "topic_id 0 doc_id grade" (second column ignored)."""
    path = Path(path)
    if not path.exists():
        raise CollectionError(f"qrels file not found: {path}")
    store = QrelStore()
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 4:
                raise CollectionError(f"{path}:{lineno}: expected 4 whitespace-separated fields")
            topic_id, _, doc_id, grade_str = parts
            try:
                g = int(grade_str)
            except ValueError:
                raise CollectionError(f"{path}:{lineno}: non-integer grade {grade_str!r}") from None
            try:
                store.add(topic_id, doc_id, g)
            except CollectionError as exc:
                raise CollectionError(f"{path}:{lineno}: {exc}") from None
    return store


def load_stopwords(path: str | Path | None = None) -> frozenset[str]:
    """Stopword set from a one-term-per-line file, or the bundled default list."""
    if path is None:
        return DEFAULT_STOPWORDS
    path = Path(path)
    if not path.exists():
        raise CollectionError(f"stopwords file not found: {path}")
    terms: set[str] = set()
    for line in path.read_text(encoding="utf-8").splitlines():
        term = line.strip().lower()
        if not term:
            continue
        if any(ch.isspace() for ch in term):
            raise CollectionError(f"stopword entry contains whitespace: {term!r}")
        terms.add(term)
    return frozenset(terms)


def save_corpus(docs: Iterable[Document], path: str | Path) -> None:
    """Write documents back in canonical JSON-lines form (round-trip safe)."""
    with Path(path).open("w", encoding="utf-8", newline="\n") as fh:
        for d in docs:
            fh.write(json.dumps({"doc_id": d.doc_id, "text": d.text}, sort_keys=True) + "\n")


def save_topics(topics: Iterable[Topic], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8", newline="\n") as fh:
        for t in topics:
            rec = {
                "topic_id": t.topic_id,
                "title": t.title,
                "description": t.description,
                "narrative": t.narrative,
            }
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def save_qrels(store: QrelStore, path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8", newline="\n") as fh:
        for topic_id, doc_id, g in store.entries():
            fh.write(f"{topic_id} 0 {doc_id} {g}\n")
