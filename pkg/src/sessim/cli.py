"""Command-line entry point: index, poolgen, simulate, evaluate, report."""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

from sessim import __version__
from sessim.collection import (
    CollectionError,
    load_corpus,
    load_qrels,
    load_stopwords,
    load_topics,
)
from sessim.config import ConfigError, ExperimentConfig, load_experiment_config
from sessim.metrics import (
    GainCurve,
    curve_rows,
    effect_curve,
    query_end_costs,
    sdcg,
    snippet_distribution,
    srbp,
    write_csv,
)
from sessim.querygen import (
    ChatCompletionsClient,
    HttpD2Q,
    PoolDirLoader,
    QueryGenError,
    generate_pool,
)
from sessim.retrieval import build_index, load_index, save_index
from sessim.session import (
    SessionFailure,
    SessionLog,
    SimResources,
    read_log,
    run_batch,
    write_log,
)


def _load_config(args) -> ExperimentConfig:
    cfg = load_experiment_config(args.config)
    if args.out:
        cfg.output_dir = Path(args.out)
    if args.seed is not None:
        cfg.seed = args.seed
    return cfg


def _sidecar_url(cfg: ExperimentConfig) -> str | None:
    return os.environ.get("SIDECAR_URL") or cfg.sidecar_url


def _index_path(cfg: ExperimentConfig) -> Path:
    return cfg.output_dir / "index.npz"


def _load_or_build_index(cfg: ExperimentConfig, docs):
    snap = _index_path(cfg)
    if snap.exists():
        return load_index(snap)
    return build_index(docs)


def cmd_index(args) -> int:
    cfg = _load_config(args)
    docs = load_corpus(cfg.corpus)
    index = build_index(docs)
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    save_index(index, _index_path(cfg))
    print(
        f"indexed {index.N} docs, {len(index.terms)} terms, "
        f"avgdl {index.avgdl:.2f} -> {_index_path(cfg)}"
    )
    return 0


def cmd_poolgen(args) -> int:
    cfg = _load_config(args)
    topics = load_topics(cfg.topics)
    client = ChatCompletionsClient()
    loader = PoolDirLoader(cfg.pools_dir)
    for topic in topics:
        for variant, include_context in (("gpt", False), ("gpt_plus", True)):
            out = loader.path_for(variant, topic.topic_id)
            pool = generate_pool(
                topic, include_context, client, rounds=cfg.poolgen_rounds, out_path=out
            )
            print(f"topic {topic.topic_id}: {variant} pool of {len(pool.queries)} -> {out}")
    return 0


def _log_path(cfg: ExperimentConfig, variant_name: str, topic_id: str) -> Path:
    return cfg.output_dir / "logs" / variant_name / f"{topic_id}.jsonl"


def cmd_simulate(args) -> int:
    cfg = _load_config(args)
    docs = load_corpus(cfg.corpus)
    topics = load_topics(cfg.topics)
    qrels = load_qrels(cfg.qrels)
    stopwords = load_stopwords(cfg.stopwords)
    index = _load_or_build_index(cfg, docs)
    documents = {d.doc_id: d for d in docs}
    sidecar = _sidecar_url(cfg)
    resources = SimResources(
        documents=documents,
        qrels=qrels,
        stopwords=stopwords,
        bm25=cfg.bm25,
        pool_loader=PoolDirLoader(cfg.pools_dir),
        d2q_provider=HttpD2Q(sidecar) if sidecar else None,
    )
    configs = [
        v.to_session_config(cfg.seed, documents=documents, sidecar_url=sidecar)
        for v in cfg.variants
    ]
    results = run_batch(topics, configs, resources, index, parallelism=args.parallel)

    failures: list[SessionFailure] = []
    i = 0
    for topic in topics:
        for variant in cfg.variants:
            result = results[i]
            i += 1
            if isinstance(result, SessionFailure):
                failures.append(result)
                continue
            write_log(result, _log_path(cfg, variant.name, topic.topic_id))
    meta = {
        "version": __version__,
        "seed": cfg.seed,
        "variants": [v.name for v in cfg.variants],
        "topics": [t.topic_id for t in topics],
        "finished_at": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
    }
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    (cfg.output_dir / "run_meta.json").write_text(
        json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    ok = len(results) - len(failures)
    print(f"simulated {ok}/{len(results)} sessions -> {cfg.output_dir / 'logs'}")
    if failures:
        for f in failures:
            print(f"FAILED topic={f.topic_id} config={f.fingerprint}: {f.error}")
            for line in f.log_tail:
                print(f"  | {line}")
        return 1
    return 0


def _iter_logs(cfg: ExperimentConfig, topics) -> list[tuple[str, str, SessionLog]]:
    out = []
    for variant in cfg.variants:
        for topic in topics:
            path = _log_path(cfg, variant.name, topic.topic_id)
            if path.exists():
                out.append((variant.name, topic.topic_id, read_log(path)))
    if not out:
        raise CollectionError(f"no session logs under {cfg.output_dir / 'logs'}")
    return out


def cmd_evaluate(args) -> int:
    cfg = _load_config(args)
    topics = load_topics(cfg.topics)
    logs = _iter_logs(cfg, topics)
    rows: list[str] = []
    totals: list[str] = []
    for run_id, topic_id, log in logs:
        eff = effect_curve(log)
        sdcg_total, sdcg_curve = sdcg(log, cfg.metrics)
        srbp_total, srbp_curve = srbp(log, cfg.metrics)
        ends = query_end_costs(log)
        rows += curve_rows(run_id, topic_id, "effect_by_cost", eff)
        rows += curve_rows(run_id, topic_id, "sdcg_by_query", sdcg_curve)
        rows += curve_rows(run_id, topic_id, "srbp_by_query", srbp_curve)
        rows += curve_rows(
            run_id, topic_id, "sdcg_by_cost",
            GainCurve(list(zip(ends, sdcg_curve.ys()))),
        )
        rows += curve_rows(
            run_id, topic_id, "srbp_by_cost",
            GainCurve(list(zip(ends, srbp_curve.ys()))),
        )
        totals.append(f"{run_id},{topic_id},effect,{eff.final():.6f}")
        totals.append(f"{run_id},{topic_id},sdcg,{sdcg_total:.6f}")
        totals.append(f"{run_id},{topic_id},srbp,{srbp_total:.6f}")
    write_csv(cfg.output_dir / "metrics" / "curves.csv", rows)
    write_csv(
        cfg.output_dir / "metrics" / "totals.csv",
        totals,
        header="run_id,topic_id,measure,value",
    )
    print(f"evaluated {len(logs)} logs -> {cfg.output_dir / 'metrics'}")
    return 0


def _mean_by_position(curves: list[GainCurve]) -> GainCurve:
    """Mean y at each integer query position over the curves reaching it."""
    max_len = max((len(c.points) for c in curves), default=0)
    points = []
    for i in range(max_len):
        ys = [c.points[i][1] for c in curves if len(c.points) > i]
        points.append((float(i + 1), sum(ys) / len(ys)))
    return GainCurve(points)


def _mean_on_grid(curves: list[GainCurve], budget: float, steps: int = 100) -> GainCurve:
    """Mean of step-function curves sampled on a fixed cost grid."""
    grid = [budget * s / steps for s in range(steps + 1)]
    points = []
    for x in grid:
        ys = []
        for c in curves:
            y = 0.0
            for cx, cy in c.points:
                if cx <= x:
                    y = cy
                else:
                    break
            ys.append(y)
        points.append((x, sum(ys) / len(ys)) if ys else (x, 0.0))
    return GainCurve(points)


def cmd_report(args) -> int:
    cfg = _load_config(args)
    topics = load_topics(cfg.topics)
    logs = _iter_logs(cfg, topics)
    by_run: dict[str, list[SessionLog]] = {}
    for run_id, _topic_id, log in logs:
        by_run.setdefault(run_id, []).append(log)

    mean_rows: list[str] = []
    snippet_rows: list[str] = []
    summary_rows: list[str] = []
    budgets = {v.name: v.global_budget for v in cfg.variants}
    for run_id in [v.name for v in cfg.variants if v.name in by_run]:
        run_logs = by_run[run_id]
        effects = [effect_curve(log) for log in run_logs]
        sdcgs = [sdcg(log, cfg.metrics)[1] for log in run_logs]
        srbps = [srbp(log, cfg.metrics)[1] for log in run_logs]
        mean_rows += curve_rows(
            run_id, "mean", "effect_by_cost", _mean_on_grid(effects, budgets[run_id])
        )
        mean_rows += curve_rows(run_id, "mean", "sdcg_by_query", _mean_by_position(sdcgs))
        mean_rows += curve_rows(run_id, "mean", "srbp_by_query", _mean_by_position(srbps))
        for measure, curves in (("effect", effects), ("sdcg", sdcgs), ("srbp", srbps)):
            final = sum(c.final() for c in curves) / len(curves)
            summary_rows.append(f"{run_id},{measure},{final:.6f}")
        for pos, (mean, std) in enumerate(snippet_distribution(run_logs), start=1):
            snippet_rows.append(f"{run_id},{pos},{mean:.6f},{std:.6f}")

    report_dir = cfg.output_dir / "report"
    write_csv(report_dir / "mean_curves.csv", mean_rows)
    write_csv(
        report_dir / "snippets.csv",
        snippet_rows,
        header="run_id,query_position,mean_examined,std_examined",
    )
    write_csv(
        report_dir / "summary.csv", summary_rows, header="run_id,measure,mean_final"
    )
    print(f"report over {len(by_run)} runs -> {report_dir}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sessim",
        description="Simulated interactive search sessions with session-based evaluation.",
    )
    parser.add_argument("--version", action="version", version=f"sessim {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn, doc in (
        ("index", cmd_index, "build and snapshot the inverted index"),
        ("poolgen", cmd_poolgen, "generate query pools via the chat API (needs API_* env)"),
        ("simulate", cmd_simulate, "run the configured session batch and write logs"),
        ("evaluate", cmd_evaluate, "compute effect/sdcg/srbp CSVs from logs"),
        ("report", cmd_report, "aggregate mean gain curves and snippet distributions"),
    ):
        p = sub.add_parser(name, help=doc)
        p.add_argument("--config", required=True, help="experiment config file (YAML)")
        p.add_argument("--out", default=None, help="override the output directory")
        p.add_argument("--seed", type=int, default=None, help="override the master seed")
        p.add_argument(
            "--parallel", type=int, default=1, help="worker processes for simulate"
        )
        p.set_defaults(fn=fn)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (CollectionError, QueryGenError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
