"""Complex-searcher session loop: queries, snippet scans, clicks, reads,
judgments, stop decisions, and the timestamped action log."""

from __future__ import annotations

import hashlib
import json
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence, Union

import numpy as np

from sessim.collection import Document, Judged, QrelStore, Topic
from sessim.querygen import (
    D2Q_STRATEGIES,
    POOL_STRATEGIES,
    POOL_VARIANT,
    VOCAB_STRATEGIES,
    DeterministicD2Q,
    KnowledgeState,
    QueryGenError,
    QueryPool,
    Strategy,
    Vocabulary,
    build_vocabulary,
    make_knowledge_state,
    next_query,
    update_knowledge_state,
)
from sessim.retrieval import (
    BM25Params,
    IdentityReranker,
    InvertedIndex,
    RankedList,
    RerankConfig,
    rerank,
    retrieve,
)
from sessim.usermodel import (
    ClickModel,
    CostModel,
    Dynamic,
    JudgeModel,
    Noisy,
    Perfect,
    PERFECT_JUDGE,
    Static,
    StopPolicy,
    CLICK_PRESETS,
    decide_click,
    judge_document,
    should_stop,
)

ISSUE_QUERY = "issue_query"
EXAMINE_SNIPPET = "examine_snippet"
CLICK = "click"
READ = "read"
JUDGE = "judge"
STOP_QUERY = "stop_query"
END_SESSION = "end_session"

COSTED_ACTIONS = {ISSUE_QUERY, EXAMINE_SNIPPET, READ, JUDGE}


class SessionError(Exception):
    pass


@dataclass(frozen=True)
class SessionConfig:
    strategy: Strategy = Strategy.GPT
    click: ClickModel = CLICK_PRESETS["informational"]
    stop: StopPolicy = Static(10)
    judge: JudgeModel = PERFECT_JUDGE
    costs: CostModel = CostModel()
    rerank: RerankConfig = RerankConfig()
    retrieval_k: int = 50
    global_budget: float = 2000.0
    seed: int = 0

    def __post_init__(self):
        if self.retrieval_k <= 0:
            raise ValueError(f"retrieval_k must be > 0, got {self.retrieval_k}")
        if self.global_budget <= 0:
            raise ValueError(f"global_budget must be > 0, got {self.global_budget}")

    def payload(self) -> dict:
        """JSON-stable description of everything that shapes a run."""
        if isinstance(self.stop, Static):
            stop = {"static_rpp": self.stop.rpp}
        else:
            stop = {"dynamic_tnr": self.stop.tnr}
        if isinstance(self.judge, Perfect):
            judge: object = "perfect"
        else:
            judge = {"noisy_p_correct": self.judge.p_correct}
        provider = self.rerank.provider
        if isinstance(provider, IdentityReranker):
            provider_desc = "identity"
        else:
            provider_desc = f"{type(provider).__name__}:{getattr(provider, 'base_url', '')}"
        return {
            "strategy": self.strategy.value,
            "click": {
                "name": self.click.name,
                "p_rel": self.click.p_rel,
                "p_nrel": self.click.p_nrel,
            },
            "stop": stop,
            "judge": judge,
            "costs": {
                "query": self.costs.query,
                "snippet": self.costs.snippet,
                "read": self.costs.read,
                "judge": self.costs.judge,
            },
            "rerank": {"cutoff": self.rerank.cutoff, "provider": provider_desc},
            "retrieval_k": self.retrieval_k,
            "global_budget": self.global_budget,
            "seed": self.seed,
        }

    def fingerprint(self) -> str:
        blob = json.dumps(self.payload(), sort_keys=True).encode("utf-8")
        return hashlib.sha256(blob).hexdigest()[:16]


def derive_session_seed(master_seed: int, topic_id: str, fingerprint: str) -> int:
    """Child rng seed; independent per (topic, config), so adding runs
    never perturbs existing ones."""
    blob = f"{master_seed}|{topic_id}|{fingerprint}".encode("utf-8")
    return int.from_bytes(hashlib.sha256(blob).digest()[:8], "little")


@dataclass
class SessionEvent:
    t: float
    action: str
    query_index: int
    cost: float
    doc_id: str | None = None
    grade: int | None = None
    judged_relevant: bool | None = None

    def to_json(self) -> dict:
        return {
            "type": "event",
            "t": self.t,
            "action": self.action,
            "query_index": self.query_index,
            "cost": self.cost,
            "doc_id": self.doc_id,
            "grade": self.grade,
            "judged_relevant": self.judged_relevant,
        }


@dataclass
class QueryRecord:
    """One issued query: its (possibly reranked) ranking, the qrel grade
    of each ranked doc (None = unjudged), and how many snippets the user
    actually scanned."""

    query: str
    items: list[tuple[str, float]]
    grades: list[int | None]
    examined_depth: int


@dataclass
class SessionLog:
    topic_id: str
    fingerprint: str
    events: list[SessionEvent] = field(default_factory=list)
    per_query_rankings: list[QueryRecord] = field(default_factory=list)

    def n_queries(self) -> int:
        return len(self.per_query_rankings)

    def final_time(self) -> float:
        return self.events[-1].t if self.events else 0.0


@dataclass
class SessionFailure:
    topic_id: str
    fingerprint: str
    error: str
    log_tail: list[str]


SessionResult = Union[SessionLog, SessionFailure]


def write_log(log: SessionLog, path: str | Path) -> None:
    """JSON-lines: header line, one event per line, then ranking records."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        header = {"type": "header", "topic_id": log.topic_id, "fingerprint": log.fingerprint}
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for ev in log.events:
            fh.write(json.dumps(ev.to_json(), sort_keys=True) + "\n")
        for i, rec in enumerate(log.per_query_rankings, start=1):
            fh.write(
                json.dumps(
                    {
                        "type": "ranking",
                        "query_index": i,
                        "query": rec.query,
                        "items": [[d, s] for d, s in rec.items],
                        "grades": rec.grades,
                        "examined_depth": rec.examined_depth,
                    },
                    sort_keys=True,
                )
                + "\n"
            )


def read_log(path: str | Path) -> SessionLog:
    path = Path(path)
    log: SessionLog | None = None
    rankings: list[tuple[int, QueryRecord]] = []
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            kind = obj.get("type")
            if kind == "header":
                log = SessionLog(topic_id=obj["topic_id"], fingerprint=obj["fingerprint"])
            elif kind == "event":
                if log is None:
                    raise SessionError(f"{path}:{lineno}: event before header")
                log.events.append(
                    SessionEvent(
                        t=obj["t"],
                        action=obj["action"],
                        query_index=obj["query_index"],
                        cost=obj["cost"],
                        doc_id=obj.get("doc_id"),
                        grade=obj.get("grade"),
                        judged_relevant=obj.get("judged_relevant"),
                    )
                )
            elif kind == "ranking":
                rankings.append(
                    (
                        obj["query_index"],
                        QueryRecord(
                            query=obj["query"],
                            items=[(d, s) for d, s in obj["items"]],
                            grades=[g for g in obj["grades"]],
                            examined_depth=obj["examined_depth"],
                        ),
                    )
                )
            else:
                raise SessionError(f"{path}:{lineno}: unknown record type {kind!r}")
    if log is None:
        raise SessionError(f"no header line in {path}")
    rankings.sort(key=lambda r: r[0])
    log.per_query_rankings = [rec for _, rec in rankings]
    return log


@dataclass
class SimResources:
    """Shared immutable inputs of a simulation batch."""

    documents: dict[str, Document]
    qrels: QrelStore
    stopwords: frozenset[str]
    bm25: BM25Params = BM25Params()
    pool_loader: Callable[[str, str], QueryPool] | None = None
    d2q_provider: object | None = None
    idf_threshold: float = 0.5


def run_session(
    topic: Topic,
    config: SessionConfig,
    resources: SimResources,
    index: InvertedIndex,
) -> SessionLog:
    """Run the searcher loop for one (topic, config) pair.

    Loop: generate the next query (ending the session when the strategy is
    exhausted), retrieve and optionally rerank, then scan snippets in rank
    order, skipping documents already clicked this session. Each snippet
    may be clicked (then read and judged); a relevant judgment resets the
    dynamic give-up clock. The query ends on the stop rule or when the
    ranking runs out; the session ends when cumulative cost reaches the
    global budget.
    """
    fingerprint = config.fingerprint()
    rng = np.random.default_rng(derive_session_seed(config.seed, topic.topic_id, fingerprint))
    log = SessionLog(topic_id=topic.topic_id, fingerprint=fingerprint)
    costs = config.costs

    pool: QueryPool | None = None
    vocab: Vocabulary | None = None
    state: KnowledgeState | None = None
    provider = None
    if config.strategy in POOL_STRATEGIES or config.strategy in VOCAB_STRATEGIES:
        if resources.pool_loader is None:
            raise SessionError(f"strategy {config.strategy.value} needs a pool loader")
        base = resources.pool_loader(POOL_VARIANT[config.strategy], topic.topic_id)
        if config.strategy in POOL_STRATEGIES:
            pool = base.fresh()
        else:
            vocab = build_vocabulary(base, resources.stopwords)
    else:
        provider = resources.d2q_provider or DeterministicD2Q(index)
        state = make_knowledge_state(
            topic,
            index,
            resources.stopwords,
            with_topic_terms=config.strategy is Strategy.D2Q_PLUS_PLUS,
            idf_threshold=resources.idf_threshold,
        )

    t = 0.0
    issued: set[str] = set()
    clicked: set[str] = set()
    query_index = 0
    session_over = False

    def log_event(action: str, cost: float, **kw) -> None:
        nonlocal t
        t += cost
        log.events.append(
            SessionEvent(t=t, action=action, query_index=query_index, cost=cost, **kw)
        )

    while not session_over:
        q = next_query(
            config.strategy, topic, pool=pool, state=state, vocab=vocab, issued=issued
        )
        if q is None:
            break
        query_index += 1
        log_event(ISSUE_QUERY, costs.query)
        if t >= config.global_budget:
            log.per_query_rankings.append(QueryRecord(q, [], [], 0))
            break

        ranking = retrieve(index, resources.bm25, q, config.retrieval_k)
        ranking = rerank(ranking, q, config.rerank)
        grades = [
            g.grade if isinstance(g, Judged) else None
            for g in (resources.qrels.lookup(topic.topic_id, d) for d, _ in ranking.items)
        ]

        examined = 0
        give_up_clock = 0.0
        seen_docs: list[str] = []
        rel_docs: list[str] = []
        for doc_id, _score in ranking.items:
            if doc_id in clicked:
                continue  # recognized duplicate: no cost, no examine event
            g = resources.qrels.lookup(topic.topic_id, doc_id)
            g_int = g.grade if isinstance(g, Judged) else None
            examined += 1
            seen_docs.append(doc_id)
            log_event(EXAMINE_SNIPPET, costs.snippet, doc_id=doc_id, grade=g_int)
            give_up_clock += costs.snippet
            if t >= config.global_budget:
                session_over = True
                break

            if decide_click(config.click, g, rng):
                clicked.add(doc_id)
                log_event(CLICK, 0.0, doc_id=doc_id, grade=g_int)
                log_event(READ, costs.read, doc_id=doc_id, grade=g_int)
                give_up_clock += costs.read
                if t >= config.global_budget:
                    session_over = True
                    break
                verdict = judge_document(config.judge, g, rng)
                log_event(
                    JUDGE, costs.judge, doc_id=doc_id, grade=g_int, judged_relevant=verdict
                )
                give_up_clock += costs.judge
                if verdict:
                    rel_docs.append(doc_id)
                    give_up_clock = 0.0
                if t >= config.global_budget:
                    session_over = True
                    break

            if should_stop(config.stop, examined, give_up_clock):
                break

        log.per_query_rankings.append(
            QueryRecord(q, list(ranking.items), grades, examined)
        )
        if session_over:
            break
        # the query ends here whether the stop rule fired or the ranking ran dry
        log_event(STOP_QUERY, 0.0)

        if state is not None:
            seen = [resources.documents[d] for d in seen_docs]
            rel = [resources.documents[d] for d in rel_docs]
            update_knowledge_state(
                state, seen, rel, provider, index, resources.stopwords,
                resources.idf_threshold,
            )

    log_event(END_SESSION, 0.0)
    return log


def validate_log(log: SessionLog, budget: float | None = None) -> None:
    """Raise on any event-grammar or bookkeeping violation (test helper)."""
    prev_t = 0.0
    prev: SessionEvent | None = None
    max_cost = 0.0
    for ev in log.events:
        if ev.cost < 0:
            raise SessionError(f"negative cost at t={ev.t}")
        if ev.action in COSTED_ACTIONS and ev.cost <= 0:
            raise SessionError(f"{ev.action} must carry positive cost")
        if ev.action in (STOP_QUERY, END_SESSION, CLICK) and ev.cost != 0:
            raise SessionError(f"{ev.action} must be a zero-cost marker")
        if ev.t < prev_t or (ev.cost > 0 and ev.t <= prev_t):
            raise SessionError(f"timestamps not increasing at t={ev.t}")
        if ev.action == READ:
            if prev is None or prev.action != CLICK or prev.doc_id != ev.doc_id:
                raise SessionError(f"read at t={ev.t} not preceded by click on same doc")
        if ev.action == JUDGE:
            if prev is None or prev.action != READ or prev.doc_id != ev.doc_id:
                raise SessionError(f"judge at t={ev.t} not preceded by read of same doc")
        if ev.action == CLICK:
            if prev is None or prev.action != EXAMINE_SNIPPET or prev.doc_id != ev.doc_id:
                raise SessionError(f"click at t={ev.t} not preceded by examine of same doc")
        prev_t = ev.t
        prev = ev
        max_cost = max(max_cost, ev.cost)
    for rec in log.per_query_rankings:
        if rec.examined_depth > len(rec.items):
            raise SessionError("examined_depth exceeds ranking length")
        if len(rec.grades) != len(rec.items):
            raise SessionError("grades not aligned with ranking items")
    if budget is not None and log.events:
        if log.events[-1].t > budget + max_cost:
            raise SessionError("session overshot the global budget by more than one action")


_WORKER: dict = {}


def _init_worker(resources: SimResources, index: InvertedIndex) -> None:
    _WORKER["resources"] = resources
    _WORKER["index"] = index


def _run_job(job: tuple[Topic, SessionConfig]) -> SessionResult:
    topic, config = job
    try:
        return run_session(topic, config, _WORKER["resources"], _WORKER["index"])
    except Exception as exc:
        return SessionFailure(
            topic_id=topic.topic_id,
            fingerprint=config.fingerprint(),
            error=f"{type(exc).__name__}: {exc}",
            log_tail=traceback.format_exc().splitlines()[-6:],
        )


def run_batch(
    topics: Sequence[Topic],
    configs: Sequence[SessionConfig],
    resources: SimResources,
    index: InvertedIndex,
    parallelism: int = 1,
) -> list[SessionResult]:
    """One session per (topic, config), topic-major order.

    Per-session failures are captured as SessionFailure entries; the rest
    of the batch continues. Output order and bytes are independent of
    parallelism.
    """
    jobs = [(topic, config) for topic in topics for config in configs]
    if parallelism <= 1:
        _init_worker(resources, index)
        return [_run_job(job) for job in jobs]
    with ProcessPoolExecutor(
        max_workers=parallelism, initializer=_init_worker, initargs=(resources, index)
    ) as pool:
        return list(pool.map(_run_job, jobs))
