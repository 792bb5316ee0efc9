"""Session evaluation: effort-based gain, session DCG, session RBP,
adhoc measures, and snippet-scan statistics."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from sessim.collection import Judged, QrelStore, is_relevant
from sessim.retrieval import RankedList
from sessim.session import JUDGE, READ, SessionLog


class MetricError(Exception):
    pass


@dataclass(frozen=True)
class MetricParams:
    bq: float = 4.0
    p: float = 0.99
    b: float = 0.9

    def __post_init__(self):
        if self.bq <= 1:
            raise ValueError(f"bq must be > 1, got {self.bq}")
        if not 0.0 < self.p < 1.0:
            raise ValueError(f"p must be in (0, 1), got {self.p}")
        if not 0.0 < self.b <= 1.0:
            raise ValueError(f"b must be in (0, 1], got {self.b}")


@dataclass
class GainCurve:
    """(cumulative cost or query index, cumulative gain) points;
    x strictly increasing, y non-decreasing."""

    points: list[tuple[float, float]] = field(default_factory=list)

    def final(self) -> float:
        return self.points[-1][1] if self.points else 0.0

    def xs(self) -> list[float]:
        return [x for x, _ in self.points]

    def ys(self) -> list[float]:
        return [y for _, y in self.points]


def effect_curve(log: SessionLog) -> GainCurve:
    """Cumulative information gain over cumulative action cost.

    Gain rel_d is credited at a read event exactly when the judgment that
    follows it marks the document relevant; every other event adds 0.
    """
    gains_at: dict[int, float] = {}
    last_read_idx: dict[str, int] = {}
    for i, ev in enumerate(log.events):
        if ev.action == READ and ev.doc_id is not None:
            last_read_idx[ev.doc_id] = i
        elif ev.action == JUDGE and ev.judged_relevant and ev.doc_id in last_read_idx:
            gains_at[last_read_idx.pop(ev.doc_id)] = float(ev.grade or 0)
    points: list[tuple[float, float]] = []
    y = 0.0
    for i, ev in enumerate(log.events):
        y += gains_at.get(i, 0.0)
        if points and points[-1][0] == ev.t:
            points[-1] = (ev.t, y)  # zero-cost markers share the boundary
        else:
            points.append((ev.t, y))
    return GainCurve(points)


def effect_total(log: SessionLog) -> float:
    return effect_curve(log).final()


def _dcg(grades: Sequence[int | None], depth: int) -> float:
    total = 0.0
    for r, g in enumerate(grades[:depth], start=1):
        rel = g or 0
        total += (2.0**rel - 1.0) / math.log2(r + 1)
    return total


def sdcg(log: SessionLog, params: MetricParams) -> tuple[float, GainCurve]:
    """Session DCG: per-query DCG over the examined prefix, discounted by
    1 + log_bq(query position). Curve x is the query index."""
    total = 0.0
    points: list[tuple[float, float]] = []
    for i, rec in enumerate(log.per_query_rankings, start=1):
        contribution = _dcg(rec.grades, rec.examined_depth)
        total += contribution / (1.0 + math.log(i, params.bq))
        points.append((float(i), total))
    return total, GainCurve(points)


def srbp(log: SessionLog, params: MetricParams) -> tuple[float, GainCurve]:
    """Session RBP with persistence p and balance b (geometric discounts,
    raw graded gains). Curve x is the query index."""
    bp = params.b * params.p
    if bp >= 1.0 or params.p <= bp:
        raise MetricError(f"degenerate session-RBP parameters: p={params.p}, b={params.b}")
    query_base = (params.p - bp) / (1.0 - bp)
    total = 0.0
    points: list[tuple[float, float]] = []
    for i, rec in enumerate(log.per_query_rankings, start=1):
        inner = 0.0
        for r, g in enumerate(rec.grades[: rec.examined_depth], start=1):
            inner += bp ** (r - 1) * float(g or 0)
        total += (1.0 - params.p) * query_base ** (i - 1) * inner
        points.append((float(i), total))
    return total, GainCurve(points)


def query_end_costs(log: SessionLog) -> list[float]:
    """Cumulative cost at the end of each issued query, for remapping
    per-query curves onto the cost axis."""
    ends: list[float] = []
    current = 0
    last_t = 0.0
    for ev in log.events:
        if ev.action == "issue_query":
            if current >= 1:
                ends.append(last_t)
            current = ev.query_index
        last_t = ev.t
    if current >= 1:
        ends.append(last_t)
    return ends


@dataclass(frozen=True)
class AdhocScores:
    p_at_k: float
    ndcg_at_k: float
    bpref: float


def adhoc_eval(ranking: RankedList, qrels: QrelStore, topic_id: str, k: int) -> AdhocScores:
    """P@k, nDCG@k (graded, 2^rel - 1 gains), and Bpref over judged docs."""
    if k <= 0:
        raise ValueError(f"k must be > 0, got {k}")
    grades = [qrels.lookup(topic_id, d) for d, _ in ranking.items]

    rel_in_top = sum(1 for g in grades[:k] if is_relevant(g))
    p_at_k = rel_in_top / k

    gains = [(2.0 ** g.grade - 1.0) if is_relevant(g) else 0.0 for g in grades[:k]]
    dcg = sum(gain / math.log2(r + 1) for r, gain in enumerate(gains, start=1))
    ideal_grades = sorted(qrels.relevant_grades(topic_id), reverse=True)[:k]
    idcg = sum(
        (2.0**g - 1.0) / math.log2(r + 1) for r, g in enumerate(ideal_grades, start=1)
    )
    ndcg = dcg / idcg if idcg > 0 else 0.0

    n_rel, n_nrel = qrels.judged_counts(topic_id)
    if n_rel == 0:
        bpref = 0.0
    else:
        denom = min(n_rel, n_nrel)
        nonrel_above = 0
        acc = 0.0
        for g in grades:
            if not isinstance(g, Judged):
                continue  # unjudged docs are invisible to bpref
            if g.grade > 0:
                acc += 1.0 if denom == 0 else 1.0 - min(nonrel_above, denom) / denom
            else:
                nonrel_above += 1
        bpref = acc / n_rel
    return AdhocScores(p_at_k=p_at_k, ndcg_at_k=ndcg, bpref=bpref)


def snippet_distribution(logs: Sequence[SessionLog]) -> list[tuple[float, float]]:
    """Per query position: (mean, population std) of examined snippet
    counts, aggregated over the logs that issued at least that many queries."""
    if not logs:
        raise MetricError("snippet_distribution needs at least one log")
    max_q = max(log.n_queries() for log in logs)
    out: list[tuple[float, float]] = []
    for i in range(max_q):
        depths = [
            log.per_query_rankings[i].examined_depth
            for log in logs
            if log.n_queries() > i
        ]
        arr = np.asarray(depths, dtype=np.float64)
        out.append((float(arr.mean()), float(arr.std())))
    return out


CURVE_CSV_HEADER = "run_id,topic_id,x,y,measure"


def curve_rows(run_id: str, topic_id: str, measure: str, curve: GainCurve) -> list[str]:
    """Bit-stable CSV rows: fixed 6-decimal formatting, '.' separator."""
    return [
        f"{run_id},{topic_id},{x:.6f},{y:.6f},{measure}" for x, y in curve.points
    ]


def write_csv(path: str | Path, rows: Iterable[str], header: str = CURVE_CSV_HEADER) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write(row + "\n")


def read_csv(path: str | Path) -> list[dict[str, str]]:
    """Re-parse an emitted CSV (round-trip helper for report/evaluate)."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines:
        raise MetricError(f"empty CSV: {path}")
    header = lines[0].split(",")
    return [dict(zip(header, line.split(","))) for line in lines[1:] if line]
