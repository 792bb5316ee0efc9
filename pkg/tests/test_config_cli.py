import json
from pathlib import Path

import pytest

from sessim.cli import main
from sessim.config import ConfigError, load_experiment_config
from sessim.metrics import read_csv
from sessim.querygen import Strategy
from sessim.usermodel import Dynamic, Noisy, Static

REPO = Path(__file__).resolve().parent.parent


def write_mini_config(tmp_path, out_dir, sessions=None, seed=1):
    sessions = sessions or [
        "  - {name: run-a, click: perfect, stop: {tnr: 6}}",
        "  - {name: run-b, strategy: d2q, stop: {rpp: 5}, global_budget: 800}",
    ]
    text = "\n".join(
        [
            "collection:",
            f"  corpus: {REPO / 'data/synthetic/corpus.jsonl'}",
            f"  topics: {REPO / 'data/synthetic/topics.jsonl'}",
            f"  qrels: {REPO / 'data/synthetic/qrels.txt'}",
            "  stopwords: null",
            f"pools_dir: {REPO / 'data/synthetic/pools'}",
            f"output_dir: {out_dir}",
            f"seed: {seed}",
            "defaults:",
            "  strategy: gpt",
            "  click: informational",
            "  retrieval_k: 100",
            "  global_budget: 1500",
            "sessions:",
            *sessions,
        ]
    )
    path = tmp_path / "exp.yaml"
    path.write_text(text + "\n")
    return path


class TestConfigParsing:
    def test_full_example_config_parses(self):
        cfg = load_experiment_config(REPO / "configs" / "synthetic.yaml")
        assert len(cfg.variants) == 11
        assert cfg.metrics.bq == 4.0
        by_name = {v.name: v for v in cfg.variants}
        assert by_name["click-perfect"].click.name == "perfect"
        assert by_name["click-perfect"].stop == Dynamic(3)
        assert by_name["stop-static-20"].stop == Static(20)
        assert by_name["feedback-d2q-plus"].strategy is Strategy.D2Q_PLUS
        assert by_name["feedback-d2q-plus"].global_budget == 1500

    def test_defaults_inherited(self, tmp_path):
        path = write_mini_config(tmp_path, tmp_path / "out")
        cfg = load_experiment_config(path)
        assert cfg.variants[0].retrieval_k == 100
        assert cfg.variants[0].global_budget == 1500
        assert cfg.variants[1].global_budget == 800

    def test_unknown_click_preset(self, tmp_path):
        path = write_mini_config(tmp_path, tmp_path / "out",
                                 ["  - {name: x, click: psychic}"])
        with pytest.raises(ConfigError, match=r"sessions\[0\].click"):
            load_experiment_config(path)

    def test_custom_click_model(self, tmp_path):
        path = write_mini_config(tmp_path, tmp_path / "out",
                                 ["  - {name: x, click: {p_rel: 0.7, p_nrel: 0.2}}"])
        cfg = load_experiment_config(path)
        assert cfg.variants[0].click.p_rel == 0.7

    def test_noisy_judge(self, tmp_path):
        path = write_mini_config(tmp_path, tmp_path / "out",
                                 ["  - {name: x, judge: {p_correct: 0.9}}"])
        assert load_experiment_config(path).variants[0].judge == Noisy(0.9)

    def test_duplicate_names_rejected(self, tmp_path):
        path = write_mini_config(tmp_path, tmp_path / "out",
                                 ["  - {name: x}", "  - {name: x}"])
        with pytest.raises(ConfigError, match="unique"):
            load_experiment_config(path)

    def test_yaml_error_carries_location(self, tmp_path):
        path = tmp_path / "broken.yaml"
        path.write_text("collection: [unclosed\n")
        with pytest.raises(ConfigError, match="line"):
            load_experiment_config(path)

    def test_missing_sessions(self, tmp_path):
        path = tmp_path / "c.yaml"
        path.write_text("collection: {corpus: a, topics: b, qrels: c}\nsessions: []\n")
        with pytest.raises(ConfigError, match="sessions"):
            load_experiment_config(path)


class TestCliExitCodes:
    def test_unknown_subcommand_exits_2(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["frobnicate", "--config", "x"])
        assert exc.value.code == 2

    def test_config_error_exits_2(self, tmp_path):
        bad = tmp_path / "bad.yaml"
        bad.write_text("collection: [broken\n")
        assert main(["simulate", "--config", str(bad)]) == 2

    def test_missing_collection_exits_1(self, tmp_path):
        path = write_mini_config(tmp_path, tmp_path / "out")
        cfg = load_experiment_config(path)
        broken = tmp_path / "broken.yaml"
        broken.write_text(
            path.read_text().replace(str(cfg.corpus), str(tmp_path / "missing.jsonl"))
        )
        assert main(["simulate", "--config", str(broken)]) == 1


class TestCliPipeline:
    def test_index_simulate_evaluate_report(self, tmp_path, capsys):
        out = tmp_path / "out"
        path = write_mini_config(tmp_path, out)

        assert main(["index", "--config", str(path)]) == 0
        assert (out / "index.npz").exists()

        assert main(["simulate", "--config", str(path)]) == 0
        logs = sorted((out / "logs").rglob("*.jsonl"))
        assert len(logs) == 10  # 2 variants x 5 topics

        assert main(["evaluate", "--config", str(path)]) == 0
        curves = read_csv(out / "metrics" / "curves.csv")
        measures = {r["measure"] for r in curves}
        assert {"effect_by_cost", "sdcg_by_query", "srbp_by_query",
                "sdcg_by_cost", "srbp_by_cost"} <= measures
        totals = read_csv(out / "metrics" / "totals.csv")
        assert {r["measure"] for r in totals} == {"effect", "sdcg", "srbp"}
        assert len(totals) == 30

        assert main(["report", "--config", str(path)]) == 0
        summary = read_csv(out / "report" / "summary.csv")
        assert {r["run_id"] for r in summary} == {"run-a", "run-b"}
        snippets = read_csv(out / "report" / "snippets.csv")
        # a query issued right at the budget edge legitimately examines 0
        assert all(float(r["mean_examined"]) >= 0 for r in snippets)
        assert any(float(r["mean_examined"]) > 0 for r in snippets)

        # emitted CSVs re-parse and keep 6-decimal formatting
        for row in curves[:50]:
            assert len(row["x"].split(".")[1]) == 6
            assert len(row["y"].split(".")[1]) == 6

    def test_simulate_seed_override_changes_logs(self, tmp_path):
        out1, out2 = tmp_path / "o1", tmp_path / "o2"
        path = write_mini_config(tmp_path, out1)
        assert main(["simulate", "--config", str(path)]) == 0
        assert main(["simulate", "--config", str(path), "--out", str(out2),
                     "--seed", "99"]) == 0
        a = (out1 / "logs" / "run-a" / "t1.jsonl").read_text()
        b = (out2 / "logs" / "run-a" / "t1.jsonl").read_text()
        assert a != b

    def test_timestamps_confined_to_meta(self, tmp_path):
        out = tmp_path / "out"
        path = write_mini_config(tmp_path, out)
        assert main(["simulate", "--config", str(path)]) == 0
        meta = json.loads((out / "run_meta.json").read_text())
        assert "finished_at" in meta
        for log in (out / "logs").rglob("*.jsonl"):
            text = log.read_text()
            assert "finished_at" not in text

    def test_evaluate_matches_documented_metric_values(self, tmp_path):
        # a crafted one-query log: rank-1 doc of grade 1, examined, clicked,
        # read, and judged relevant -> effect 1, sdcg 1.0, srbp 0.0100
        from sessim.session import (
            CLICK, END_SESSION, EXAMINE_SNIPPET, ISSUE_QUERY, JUDGE, READ,
            STOP_QUERY, QueryRecord, SessionEvent, SessionLog, write_log,
        )

        out = tmp_path / "out"
        path = write_mini_config(tmp_path, out)
        events = [
            SessionEvent(t=10, action=ISSUE_QUERY, query_index=1, cost=10),
            SessionEvent(t=13, action=EXAMINE_SNIPPET, query_index=1, cost=3,
                         doc_id="d", grade=1),
            SessionEvent(t=13, action=CLICK, query_index=1, cost=0, doc_id="d", grade=1),
            SessionEvent(t=43, action=READ, query_index=1, cost=30, doc_id="d", grade=1),
            SessionEvent(t=48, action=JUDGE, query_index=1, cost=5, doc_id="d",
                         grade=1, judged_relevant=True),
            SessionEvent(t=48, action=STOP_QUERY, query_index=1, cost=0),
            SessionEvent(t=48, action=END_SESSION, query_index=1, cost=0),
        ]
        log = SessionLog("t1", "fixture", events=events,
                         per_query_rankings=[QueryRecord("q", [("d", 1.0)], [1], 1)])
        write_log(log, out / "logs" / "run-a" / "t1.jsonl")
        assert main(["evaluate", "--config", str(path)]) == 0
        totals = {r["measure"]: r["value"] for r in read_csv(out / "metrics" / "totals.csv")}
        assert totals == {
            "effect": "1.000000",
            "sdcg": "1.000000",
            "srbp": "0.010000",
        }

    def test_report_perfect_beats_almost_random(self, tmp_path):
        # frozen regression on the bundled fixture: the skyline click model
        # must end with strictly higher mean sdcg than the baseline
        out = tmp_path / "out"
        path = write_mini_config(
            tmp_path, out,
            ["  - {name: skyline, click: perfect, stop: {tnr: 3}, global_budget: 40000}",
             "  - {name: baseline, click: almost_random, stop: {tnr: 3}, global_budget: 40000}"],
        )
        assert main(["simulate", "--config", str(path)]) == 0
        assert main(["report", "--config", str(path)]) == 0
        summary = {
            (r["run_id"], r["measure"]): float(r["mean_final"])
            for r in read_csv(out / "report" / "summary.csv")
        }
        assert summary[("skyline", "sdcg")] > summary[("baseline", "sdcg")]
        assert summary[("skyline", "effect")] > summary[("baseline", "effect")]
