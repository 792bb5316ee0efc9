"""Query generation strategies, knowledge states, and query pools.

Seven strategies are supported: two probabilistic ones that replay
LLM-generated query pools (context-free and context-full), two rule-based
ones that expand the topic title with pool vocabulary, and three
document-driven ones that expand the title with terms harvested from seen
(and judged-relevant) documents via a doc-to-questions generator.
"""

from __future__ import annotations

import enum
import json
import os
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Protocol, Sequence

from sessim.collection import Document, Topic, tokenize
from sessim.retrieval import InvertedIndex, idf


class QueryGenError(Exception):
    pass


class Strategy(enum.Enum):
    GPT = "gpt"
    GPT_PLUS = "gpt_plus"
    GPT_STAR = "gpt_star"
    GPT_STAR_STAR = "gpt_star_star"
    D2Q = "d2q"
    D2Q_PLUS = "d2q_plus"
    D2Q_PLUS_PLUS = "d2q_plus_plus"


_STRATEGY_ALIASES = {
    "gpt": Strategy.GPT,
    "gpt+": Strategy.GPT_PLUS,
    "gpt_plus": Strategy.GPT_PLUS,
    "gpt*": Strategy.GPT_STAR,
    "gpt_star": Strategy.GPT_STAR,
    "gpt**": Strategy.GPT_STAR_STAR,
    "gpt_star_star": Strategy.GPT_STAR_STAR,
    "d2q": Strategy.D2Q,
    "d2q+": Strategy.D2Q_PLUS,
    "d2q_plus": Strategy.D2Q_PLUS,
    "d2q++": Strategy.D2Q_PLUS_PLUS,
    "d2q_plus_plus": Strategy.D2Q_PLUS_PLUS,
}

POOL_STRATEGIES = {Strategy.GPT, Strategy.GPT_PLUS}
VOCAB_STRATEGIES = {Strategy.GPT_STAR, Strategy.GPT_STAR_STAR}
D2Q_STRATEGIES = {Strategy.D2Q, Strategy.D2Q_PLUS, Strategy.D2Q_PLUS_PLUS}

# pool file variant each strategy reads ("gpt" = context-free, "gpt_plus" = with context)
POOL_VARIANT = {
    Strategy.GPT: "gpt",
    Strategy.GPT_PLUS: "gpt_plus",
    Strategy.GPT_STAR: "gpt_plus",
    Strategy.GPT_STAR_STAR: "gpt",
}


def parse_strategy(name: str) -> Strategy:
    try:
        return _STRATEGY_ALIASES[name.strip().lower()]
    except KeyError:
        raise QueryGenError(
            f"unknown strategy {name!r}; one of {sorted(set(_STRATEGY_ALIASES))}"
        ) from None


def normalize_query(q: str) -> str:
    """Canonical form used for duplicate detection."""
    return " ".join(tokenize(q))


@dataclass
class QueryPool:
    """Ordered, duplicate-free query strings for one topic, with a cursor."""

    topic_id: str
    queries: list[str] = field(default_factory=list)
    cursor: int = 0

    def fresh(self) -> "QueryPool":
        """Copy with the cursor rewound; pools are read-shared across sessions."""
        return QueryPool(self.topic_id, list(self.queries), 0)


def dedupe_queries(queries: Iterable[str]) -> list[str]:
    """Drop later entries whose normalized form was already seen."""
    out: list[str] = []
    seen: set[str] = set()
    for q in queries:
        key = normalize_query(q)
        if not key or key in seen:
            continue
        seen.add(key)
        out.append(q)
    return out


def save_pool(pool: QueryPool, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        for rank, q in enumerate(pool.queries):
            fh.write(
                json.dumps(
                    {"topic_id": pool.topic_id, "rank": rank, "query": q},
                    sort_keys=True,
                )
                + "\n"
            )


def load_pool(path: str | Path) -> QueryPool:
    path = Path(path)
    if not path.exists():
        raise QueryGenError(f"pool file not found: {path}")
    records = []
    topic_id = None
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise QueryGenError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from exc
            for f in ("topic_id", "rank", "query"):
                if f not in obj:
                    raise QueryGenError(f"{path}:{lineno}: missing field {f!r}")
            if topic_id is None:
                topic_id = obj["topic_id"]
            elif obj["topic_id"] != topic_id:
                raise QueryGenError(f"{path}:{lineno}: mixed topic_ids in one pool file")
            records.append((obj["rank"], obj["query"]))
    if topic_id is None:
        raise QueryGenError(f"pool file is empty: {path}")
    records.sort(key=lambda r: r[0])
    return QueryPool(topic_id=topic_id, queries=dedupe_queries(q for _, q in records))


class PoolDirLoader:
    """Loads pools/<variant>/<topic_id>.jsonl; picklable for worker processes."""

    def __init__(self, pool_dir: str | Path):
        self.pool_dir = Path(pool_dir)

    def path_for(self, variant: str, topic_id: str) -> Path:
        return self.pool_dir / variant / f"{topic_id}.jsonl"

    def __call__(self, variant: str, topic_id: str) -> QueryPool:
        return load_pool(self.path_for(variant, topic_id))


@dataclass
class Vocabulary:
    """Expansion terms for the rule-based pool strategies, in pool order."""

    terms: list[str] = field(default_factory=list)
    used: set[str] = field(default_factory=set)


def build_vocabulary(pool: QueryPool, stopwords: frozenset[str]) -> Vocabulary:
    """Tokenized pool terms, deduped, stopword-filtered, order-preserving."""
    terms: list[str] = []
    seen: set[str] = set()
    for q in pool.queries:
        for t in tokenize(q):
            if t in seen or t in stopwords:
                continue
            seen.add(t)
            terms.append(t)
    return Vocabulary(terms=terms)


@dataclass
class KnowledgeState:
    """Accumulated terms a simulated user has acquired during a session.

    ks holds terms from all seen documents, ks_rel only terms from
    documents the user judged relevant, topic_terms the background terms
    harvested from the topic description/narrative. All three keep
    insertion order; used tracks terms already consumed for expansions.
    """

    seed: list[str]
    ks: list[str] = field(default_factory=list)
    ks_rel: list[str] = field(default_factory=list)
    topic_terms: list[str] = field(default_factory=list)
    used: set[str] = field(default_factory=set)

    def __post_init__(self):
        if not self.seed:
            raise QueryGenError("knowledge state requires a non-empty seed query")
        self._ks_set = set(self.ks)
        self._ks_rel_set = set(self.ks_rel)

    def extend_ks(self, terms: Iterable[str]) -> None:
        for t in terms:
            if t not in self._ks_set:
                self._ks_set.add(t)
                self.ks.append(t)

    def extend_ks_rel(self, terms: Iterable[str]) -> None:
        for t in terms:
            if t not in self._ks_rel_set:
                self._ks_rel_set.add(t)
                self.ks_rel.append(t)


def make_knowledge_state(
    topic: Topic,
    index: InvertedIndex,
    stopwords: frozenset[str],
    with_topic_terms: bool = False,
    idf_threshold: float = 0.5,
) -> KnowledgeState:
    """Fresh per-session state seeded with the tokenized topic title."""
    seed = tokenize(topic.title)
    if not seed:
        raise QueryGenError(f"topic {topic.topic_id!r} has no usable title terms")
    topic_terms: list[str] = []
    if with_topic_terms:
        text = f"{topic.description} {topic.narrative}"
        topic_terms = filter_terms(tokenize(text), index, stopwords, idf_threshold)
    return KnowledgeState(seed=seed, topic_terms=topic_terms)


class D2QProvider(Protocol):
    def generate(self, doc: Document, n: int) -> list[str]: ...


class DeterministicD2Q:
    """Offline fallback generator: the document's top-n terms by tf*idf,
    emitted as n one-term question strings."""

    def __init__(self, index: InvertedIndex):
        self.index = index

    def generate(self, doc: Document, n: int = 5) -> list[str]:
        tokens = tokenize(doc.text)
        counts: dict[str, int] = {}
        order: list[str] = []
        for t in tokens:
            if t not in counts:
                order.append(t)
            counts[t] = counts.get(t, 0) + 1
        scored = [(counts[t] * idf(self.index, t)[0], t) for t in order]
        # stable sort keeps first-occurrence order among exact ties
        scored.sort(key=lambda st: -st[0])
        return [t for _, t in scored[:n]]


class HttpD2Q:
    """Client for the POST /doc2query provider protocol."""

    def __init__(self, base_url: str, n: int = 5, timeout: float = 30.0):
        self.base_url = base_url.rstrip("/")
        self.n = n
        self.timeout = timeout

    def generate(self, doc: Document, n: int | None = None) -> list[str]:
        import requests

        try:
            resp = requests.post(
                f"{self.base_url}/doc2query",
                json={"text": doc.text, "n": n or self.n},
                timeout=self.timeout,
            )
            resp.raise_for_status()
            payload = resp.json()
        except requests.RequestException as exc:
            raise QueryGenError(f"doc2query provider unreachable: {exc}") from exc
        queries = payload.get("queries") if isinstance(payload, dict) else None
        if not isinstance(queries, list):
            raise QueryGenError("doc2query response missing 'queries' list")
        return [str(q) for q in queries]


def filter_terms(
    terms: Iterable[str],
    index: InvertedIndex,
    stopwords: frozenset[str],
    idf_threshold: float = 0.5,
) -> list[str]:
    """Keep terms with normalized idf below the threshold that are not
    stopwords; first-occurrence order, deduped."""
    out: list[str] = []
    seen: set[str] = set()
    for t in terms:
        if t in seen:
            continue
        seen.add(t)
        if t in stopwords:
            continue
        if idf(index, t)[1] >= idf_threshold:
            continue
        out.append(t)
    return out


def phi_terms(
    docs: Sequence[Document],
    provider: D2QProvider,
    index: InvertedIndex,
    stopwords: frozenset[str],
    idf_threshold: float = 0.5,
) -> list[str]:
    """Terms extracted from a document set: tokenize every generated
    question for every doc, then apply the idf/stopword filter."""
    raw: list[str] = []
    for doc in docs:
        for question in provider.generate(doc, 5):
            raw.extend(tokenize(question))
    return filter_terms(raw, index, stopwords, idf_threshold)


def update_knowledge_state(
    state: KnowledgeState,
    seen_docs: Sequence[Document],
    judged_relevant_docs: Sequence[Document],
    provider: D2QProvider,
    index: InvertedIndex,
    stopwords: frozenset[str],
    idf_threshold: float = 0.5,
) -> KnowledgeState:
    """Grow ks with terms from all seen docs and ks_rel with terms from
    the judged-relevant subset. Idempotent for a fixed document set."""
    seen_ids = {d.doc_id for d in seen_docs}
    for d in judged_relevant_docs:
        if d.doc_id not in seen_ids:
            raise QueryGenError(f"judged-relevant doc {d.doc_id!r} was never seen")
    state.extend_ks(phi_terms(seen_docs, provider, index, stopwords, idf_threshold))
    state.extend_ks_rel(
        phi_terms(judged_relevant_docs, provider, index, stopwords, idf_threshold)
    )
    return state


def build_prompt(topic: Topic, include_context: bool) -> str:
    """Keyword-query generation prompt; context mode appends the topic's
    description and narrative."""
    if not topic.title:
        raise QueryGenError(f"topic {topic.topic_id!r} has an empty title")
    base = f"Please generate one-hundred keyword queries about {topic.title}."
    if not include_context:
        return base
    parts = [base] + [p for p in (topic.description, topic.narrative) if p]
    return " ".join(parts)


_ENUM_PREFIX = None  # compiled lazily to keep module import light


def parse_llm_queries(text: str) -> list[str]:
    """Per line: strip leading enumeration ("12.", "12)", "-", "*"),
    surrounding quotes, and whitespace; drop empties."""
    import re

    global _ENUM_PREFIX
    if _ENUM_PREFIX is None:
        _ENUM_PREFIX = re.compile(r"^\s*(?:\d+\s*[.)]|[-*])\s*")
    out: list[str] = []
    for line in text.splitlines():
        q = _ENUM_PREFIX.sub("", line).strip()
        if len(q) >= 2 and q[0] == q[-1] and q[0] in ("\"", "'"):
            q = q[1:-1].strip()
        if q:
            out.append(q)
    return out


class ChatCompletionsClient:
    """Minimal client for an OpenAI-compatible chat-completions endpoint.

    Endpoint, model, and key come from API_BASE_URL, API_MODEL, and
    API_KEY unless given explicitly; the key is never read from config
    files.
    """

    def __init__(
        self,
        base_url: str | None = None,
        api_key: str | None = None,
        model: str | None = None,
        timeout: float = 60.0,
        max_retries: int = 4,
        backoff_cap: float = 8.0,
    ):
        self.base_url = (base_url or os.environ.get("API_BASE_URL", "")).rstrip("/")
        self.api_key = api_key or os.environ.get("API_KEY", "")
        self.model = model or os.environ.get("API_MODEL", "")
        self.timeout = timeout
        self.max_retries = max_retries
        self.backoff_cap = backoff_cap
        if not self.base_url or not self.model:
            raise QueryGenError(
                "chat client needs API_BASE_URL and API_MODEL (env or arguments)"
            )

    def complete(self, prompt: str) -> str:
        import requests

        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        body = {"model": self.model, "messages": [{"role": "user", "content": prompt}]}
        last_exc: Exception | None = None
        for attempt in range(self.max_retries + 1):
            try:
                resp = requests.post(
                    f"{self.base_url}/chat/completions",
                    json=body,
                    headers=headers,
                    timeout=self.timeout,
                )
                if resp.status_code in (429,) or resp.status_code >= 500:
                    raise QueryGenError(f"retryable API status {resp.status_code}")
                resp.raise_for_status()
                payload = resp.json()
                return payload["choices"][0]["message"]["content"]
            except (QueryGenError, requests.RequestException, KeyError, ValueError) as exc:
                last_exc = exc
                if attempt == self.max_retries:
                    break
                time.sleep(min(2.0**attempt, self.backoff_cap))
        raise QueryGenError(f"chat completion failed after retries: {last_exc}")


def generate_pool(
    topic: Topic,
    include_context: bool,
    client: ChatCompletionsClient,
    rounds: int = 4,
    out_path: str | Path | None = None,
) -> QueryPool:
    """Issue `rounds` completions of the topic prompt, parse and dedupe
    the returned queries, and optionally persist the pool."""
    if rounds <= 0:
        raise QueryGenError(f"rounds must be > 0, got {rounds}")
    prompt = build_prompt(topic, include_context)
    queries: list[str] = []
    for _ in range(rounds):
        queries.extend(parse_llm_queries(client.complete(prompt)))
    deduped = dedupe_queries(queries)
    if not deduped:
        raise QueryGenError(f"no parseable queries for topic {topic.topic_id!r}")
    pool = QueryPool(topic_id=topic.topic_id, queries=deduped)
    if out_path is not None:
        save_pool(pool, out_path)
    return pool


def _expansion_query(seed: Sequence[str], term: str) -> str:
    # the expansion is a set union with the seed; a seed term reproduces it unchanged
    if term in seed:
        return " ".join(seed)
    return " ".join([*seed, term])


def next_query(
    strategy: Strategy,
    topic: Topic,
    pool: QueryPool | None = None,
    state: KnowledgeState | None = None,
    vocab: Vocabulary | None = None,
    issued: set[str] | None = None,
) -> str | None:
    """Produce the session's next query, or None when the strategy is
    exhausted (a terminal condition, not a failure).

    Candidates whose normalized form was already emitted this session are
    consumed and skipped; `issued` (normalized forms) is updated in place
    with the emitted query.
    """
    if issued is None:
        issued = set()

    def emit(q: str) -> str:
        issued.add(normalize_query(q))
        return q

    if strategy in POOL_STRATEGIES:
        if pool is None:
            raise QueryGenError(f"{strategy.value} requires a loaded query pool")
        while pool.cursor < len(pool.queries):
            q = pool.queries[pool.cursor]
            pool.cursor += 1
            if normalize_query(q) not in issued:
                return emit(q)
        return None

    seed = tokenize(topic.title)
    if not seed:
        raise QueryGenError(f"topic {topic.topic_id!r} has no usable title terms")

    if strategy in VOCAB_STRATEGIES:
        if vocab is None:
            raise QueryGenError(f"{strategy.value} requires a generated vocabulary")
        for term in vocab.terms:
            if term in vocab.used:
                continue
            vocab.used.add(term)
            q = _expansion_query(seed, term)
            if normalize_query(q) in issued:
                continue
            return emit(q)
        return None

    if state is None:
        raise QueryGenError(f"{strategy.value} requires a knowledge state")
    seed_query = " ".join(state.seed)
    if normalize_query(seed_query) not in issued:
        return emit(seed_query)

    if strategy is Strategy.D2Q:
        sources: Iterable[str] = state.ks
    elif strategy is Strategy.D2Q_PLUS:
        sources = [*state.ks_rel, *state.ks]
    else:  # D2Q_PLUS_PLUS: background terms first, then the feedback rule
        sources = [*state.topic_terms, *state.ks_rel, *state.ks]
    for term in sources:
        if term in state.used:
            continue
        state.used.add(term)
        q = _expansion_query(state.seed, term)
        if normalize_query(q) in issued:
            continue
        return emit(q)
    return None
