import json

import pytest

from sessim.collection import Document, QrelStore, Topic
from sessim.querygen import QueryPool, Strategy
from sessim.session import (
    CLICK,
    END_SESSION,
    EXAMINE_SNIPPET,
    ISSUE_QUERY,
    JUDGE,
    READ,
    STOP_QUERY,
    SessionConfig,
    SessionFailure,
    SimResources,
    derive_session_seed,
    read_log,
    run_batch,
    run_session,
    validate_log,
    write_log,
)
from sessim.retrieval import build_index
from sessim.usermodel import CLICK_PRESETS, CostModel, Dynamic, Static


def flat_collection(n_docs=15, n_rel=10):
    """Identical docs (ties broken by doc_id) with the first n_rel judged 1."""
    docs = [Document(f"doc{i:02d}", "q filler") for i in range(n_docs)]
    qrels = QrelStore((("t", f"doc{i:02d}", 1) for i in range(n_rel)))
    return docs, qrels


def make_resources(docs, qrels, pools=None):
    loader = None
    if pools is not None:
        loader = lambda variant, topic_id: pools[topic_id].fresh()
    return SimResources(
        documents={d.doc_id: d for d in docs},
        qrels=qrels,
        stopwords=frozenset({"the"}),
        pool_loader=loader,
    )


TOPIC = Topic("t", "q")


class TestRunSession:
    def test_perfect_static10_event_counts(self):
        docs, qrels = flat_collection()
        res = make_resources(docs, qrels, pools={"t": QueryPool("t", ["q"])})
        cfg = SessionConfig(
            strategy=Strategy.GPT, click=CLICK_PRESETS["perfect"], stop=Static(10),
            retrieval_k=15, global_budget=10_000, seed=1,
        )
        log = run_session(TOPIC, cfg, res, build_index(docs))
        validate_log(log, budget=10_000)
        counts = {}
        for ev in log.events:
            counts[ev.action] = counts.get(ev.action, 0) + 1
        assert counts[ISSUE_QUERY] == 1
        assert counts[EXAMINE_SNIPPET] == 10
        assert counts[CLICK] == 10
        assert counts[READ] == 10
        assert counts[JUDGE] == 10
        assert counts[STOP_QUERY] == 1
        assert counts[END_SESSION] == 1
        assert log.per_query_rankings[0].examined_depth == 10
        assert log.final_time() == 10 + 10 * (3 + 30 + 5)

    def test_budget_smaller_than_query_cost(self):
        docs, qrels = flat_collection()
        res = make_resources(docs, qrels, pools={"t": QueryPool("t", ["q"])})
        cfg = SessionConfig(
            strategy=Strategy.GPT, stop=Static(10), retrieval_k=5,
            global_budget=5, seed=1,
        )
        log = run_session(TOPIC, cfg, res, build_index(docs))
        assert [ev.action for ev in log.events] == [ISSUE_QUERY, END_SESSION]

    def test_same_seed_byte_identical(self, tmp_path):
        docs, qrels = flat_collection()
        res = make_resources(docs, qrels, pools={"t": QueryPool("t", ["q", "q filler"])})
        cfg = SessionConfig(
            strategy=Strategy.GPT, stop=Static(5), retrieval_k=15,
            global_budget=2000, seed=7,
        )
        idx = build_index(docs)
        for i, log in enumerate((run_session(TOPIC, cfg, res, idx),
                                 run_session(TOPIC, cfg, res, idx))):
            write_log(log, tmp_path / f"run{i}.jsonl")
        assert (tmp_path / "run0.jsonl").read_bytes() == (tmp_path / "run1.jsonl").read_bytes()

    def test_clicked_docs_skipped_on_reencounter(self):
        docs, qrels = flat_collection()
        res = make_resources(docs, qrels, pools={"t": QueryPool("t", ["q", "q filler"])})
        cfg = SessionConfig(
            strategy=Strategy.GPT, click=CLICK_PRESETS["perfect"], stop=Static(5),
            retrieval_k=15, global_budget=10_000, seed=1,
        )
        log = run_session(TOPIC, cfg, res, build_index(docs))
        validate_log(log)
        examined_q1 = [ev.doc_id for ev in log.events
                       if ev.action == EXAMINE_SNIPPET and ev.query_index == 1]
        examined_q2 = [ev.doc_id for ev in log.events
                       if ev.action == EXAMINE_SNIPPET and ev.query_index == 2]
        assert examined_q1 == [f"doc{i:02d}" for i in range(5)]
        # q1 clicked all 5 (perfect + rel): q2 skips them without cost
        assert examined_q2 == [f"doc{i:02d}" for i in range(5, 10)]
        clicks = [ev.doc_id for ev in log.events if ev.action == CLICK]
        assert len(clicks) == len(set(clicks))

    def test_dynamic_give_up_depth(self):
        # doc00 relevant then non-relevant tail; perfect user never clicks
        # the tail, so the clock runs out after ceil(9/3)=3 more snippets
        docs = [Document(f"doc{i:02d}", "q") for i in range(10)]
        qrels = QrelStore([("t", "doc00", 1)])
        res = make_resources(docs, qrels, pools={"t": QueryPool("t", ["q"])})
        cfg = SessionConfig(
            strategy=Strategy.GPT, click=CLICK_PRESETS["perfect"], stop=Dynamic(9),
            retrieval_k=10, global_budget=10_000, seed=1,
        )
        log = run_session(TOPIC, cfg, res, build_index(docs))
        assert log.per_query_rankings[0].examined_depth == 4

    def test_dynamic_clock_resets_on_relevant(self):
        # relevant docs every 3rd position keep the tnr=9 clock alive
        docs = [Document(f"doc{i:02d}", "q") for i in range(12)]
        qrels = QrelStore((("t", f"doc{i:02d}", 1) for i in range(0, 12, 3)))
        res = make_resources(docs, qrels, pools={"t": QueryPool("t", ["q"])})
        cfg = SessionConfig(
            strategy=Strategy.GPT, click=CLICK_PRESETS["perfect"], stop=Dynamic(9),
            retrieval_k=12, global_budget=10_000, seed=1,
        )
        log = run_session(TOPIC, cfg, res, build_index(docs))
        assert log.per_query_rankings[0].examined_depth == 12  # ranking exhausted

    def test_budget_overshoot_at_most_one_action(self):
        docs, qrels = flat_collection()
        res = make_resources(docs, qrels, pools={"t": QueryPool("t", ["q", "q filler"])})
        costs = CostModel(query=10, snippet=3, read=30, judge=5)
        for budget in (11, 44, 45, 100, 390):
            cfg = SessionConfig(
                strategy=Strategy.GPT, click=CLICK_PRESETS["perfect"], stop=Static(10),
                costs=costs, retrieval_k=15, global_budget=budget, seed=1,
            )
            log = run_session(TOPIC, cfg, res, build_index(docs))
            validate_log(log, budget=budget)
            assert log.final_time() <= budget + 30

    def test_event_grammar_on_noisy_sessions(self, synthetic):
        topics = synthetic["topics"]
        cfg = SessionConfig(
            strategy=Strategy.GPT, click=CLICK_PRESETS["informational"],
            stop=Dynamic(50), retrieval_k=100, global_budget=3000, seed=3,
        )
        for topic in topics[:2]:
            log = run_session(topic, cfg, synthetic["resources"], synthetic["index"])
            validate_log(log, budget=3000)

    def test_gain_counted_once_per_doc(self, synthetic):
        from sessim.metrics import effect_total

        cfg = SessionConfig(
            strategy=Strategy.GPT, click=CLICK_PRESETS["informational"],
            stop=Static(10), retrieval_k=200, global_budget=40_000, seed=5,
        )
        log = run_session(synthetic["topics"][0], cfg, synthetic["resources"], synthetic["index"])
        read_docs = [ev.doc_id for ev in log.events if ev.action == READ]
        assert len(read_docs) == len(set(read_docs))
        max_total = sum(
            g for t, _, g in synthetic["qrels"].entries() if t == "t1" and g > 0
        )
        assert effect_total(log) <= max_total


class TestLogSerialization:
    def test_round_trip(self, tmp_path, synthetic):
        cfg = SessionConfig(
            strategy=Strategy.GPT, stop=Static(10), retrieval_k=50,
            global_budget=1000, seed=2,
        )
        log = run_session(synthetic["topics"][0], cfg, synthetic["resources"], synthetic["index"])
        path = tmp_path / "log.jsonl"
        write_log(log, path)
        again = read_log(path)
        assert again.topic_id == log.topic_id
        assert again.fingerprint == log.fingerprint
        assert again.events == log.events
        assert again.per_query_rankings == log.per_query_rankings

    def test_header_first_line(self, tmp_path, synthetic):
        cfg = SessionConfig(strategy=Strategy.GPT, global_budget=100, seed=0)
        log = run_session(synthetic["topics"][0], cfg, synthetic["resources"], synthetic["index"])
        path = tmp_path / "log.jsonl"
        write_log(log, path)
        first = json.loads(path.read_text().splitlines()[0])
        assert first["type"] == "header"
        assert first["topic_id"] == "t1"


class TestFingerprint:
    def test_stable_and_sensitive(self):
        a = SessionConfig(seed=1)
        b = SessionConfig(seed=1)
        c = SessionConfig(seed=2)
        assert a.fingerprint() == b.fingerprint()
        assert a.fingerprint() != c.fingerprint()
        assert a.fingerprint() != SessionConfig(seed=1, retrieval_k=51).fingerprint()

    def test_seed_derivation_varies_by_topic(self):
        fp = SessionConfig(seed=1).fingerprint()
        assert derive_session_seed(1, "t1", fp) != derive_session_seed(1, "t2", fp)


class TestRunBatch:
    def test_order_and_isolation(self, synthetic):
        topics = synthetic["topics"][:2]
        good = SessionConfig(strategy=Strategy.GPT, global_budget=500, seed=1)
        bad = SessionConfig(strategy=Strategy.GPT_STAR_STAR, global_budget=500, seed=1)
        res = synthetic["resources"]

        # a loader that has no pool for topic t2 under the gpt variant
        class PartialLoader:
            def __call__(self, variant, topic_id):
                if topic_id == "t2":
                    raise FileNotFoundError(f"no pool for {topic_id}")
                return res.pool_loader(variant, topic_id)

        partial = SimResources(
            documents=res.documents, qrels=res.qrels, stopwords=res.stopwords,
            pool_loader=PartialLoader(),
        )
        results = run_batch(topics, [good, bad], partial, synthetic["index"])
        assert len(results) == 4
        assert not isinstance(results[0], SessionFailure)
        assert not isinstance(results[1], SessionFailure)
        assert isinstance(results[2], SessionFailure)
        assert isinstance(results[3], SessionFailure)
        assert results[2].topic_id == "t2"

    def test_parallel_matches_serial(self, tmp_path, synthetic):
        topics = synthetic["topics"]
        configs = [
            SessionConfig(strategy=Strategy.GPT, stop=Static(5), global_budget=1500, seed=4),
            SessionConfig(strategy=Strategy.D2Q, stop=Static(5), global_budget=1500, seed=4),
        ]
        serial = run_batch(topics, configs, synthetic["resources"], synthetic["index"], 1)
        parallel = run_batch(topics, configs, synthetic["resources"], synthetic["index"], 4)
        assert len(serial) == len(parallel) == 10
        for a, b in zip(serial, parallel):
            pa, pb = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
            write_log(a, pa)
            write_log(b, pb)
            assert pa.read_bytes() == pb.read_bytes()
