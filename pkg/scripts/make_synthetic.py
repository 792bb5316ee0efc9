#!/usr/bin/env python3
"""Generate the bundled synthetic test collection (committed under data/synthetic).

Per topic: 30 graded-relevant docs partitioned into 8 marker groups (one
marker each, repeated in-doc), 16 unjudged near-topic noise docs whose
scores interleave with the relevant band, 6 strong decoys that own the
bare-title query, and 14 weak decoys reachable only through decoy
markers; unjudged background docs pad marker document frequencies past
sqrt(N) so the normalized-idf term filter keeps every marker. Each
pre-generated pool query targets one marker group, so later queries hit
bands that earlier clicks could not deplete. Pools ship in-repo so
simulations replay offline.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import numpy as np

ROOT = Path(__file__).resolve().parent.parent
OUT = ROOT / "data" / "synthetic"

SEED = 20240803

TOPICS = [
    ("t1", "solar rooftop"),
    ("t2", "battery recycling"),
    ("t3", "wind turbine"),
    ("t4", "grid storage"),
    ("t5", "carbon capture"),
]

DOMAIN_WORD = "energy"

COMMON_WORDS = (
    "power plant project report study cost price market policy region utility "
    "sector annual output capacity supply demand network system model data "
    "review survey analysis forecast trend growth plan permit site county "
    "company firm agency program fund rate metric index"
).split()

N_MARKERS = 8
N_REL = 32
N_NOISE = 16

_SYLLABLES = [c + v for c in "bdfgklmnprstvz" for v in "aeiou"]


def pseudo_words(rng: np.random.Generator, count: int, taken: set[str]) -> list[str]:
    out: list[str] = []
    while len(out) < count:
        w = "".join(rng.choice(_SYLLABLES) for _ in range(3))
        if w in taken or len(w) < 6:
            continue
        taken.add(w)
        out.append(w)
    return out


def doc_text(rng: np.random.Generator, tokens: list[str]) -> str:
    tokens = list(tokens)
    rng.shuffle(tokens)
    return " ".join(tokens) + "."


def main() -> int:
    rng = np.random.default_rng(SEED)
    taken = set(COMMON_WORDS) | {DOMAIN_WORD}
    for _, title in TOPICS:
        taken.update(title.split())

    markers = {tid: pseudo_words(rng, N_MARKERS, taken) for tid, _ in TOPICS}
    decoys = {tid: pseudo_words(rng, 6, taken) for tid, _ in TOPICS}
    filler_counter = [0]

    def fillers(n: int) -> list[str]:
        out = [f"x{filler_counter[0] + i:05d}q" for i in range(n)]
        filler_counter[0] += n
        return out

    docs: list[tuple[str, list[str], str, int]] = []  # (kind, tokens, topic, grade)
    for tid, title in TOPICS:
        t1, t2 = title.split()
        ms, ds = markers[tid], decoys[tid]
        # graded relevant, one marker group per doc
        for j in range(N_REL):
            m = ms[j % N_MARKERS]
            tokens = (
                [t1, t1]
                + [m] * int(rng.integers(2, 4))
                + [DOMAIN_WORD]
                + list(rng.choice(COMMON_WORDS, size=3, replace=False))
                + fillers(2)
            )
            docs.append(("rel", tokens, tid, 1 + j % 3))
        # unjudged near-topic noise, ranked just below the relevant band
        for j in range(N_NOISE):
            m = ms[j % N_MARKERS]
            tokens = (
                [t1]
                + [m] * int(rng.integers(1, 3))
                + [DOMAIN_WORD]
                + list(rng.choice(COMMON_WORDS, size=3, replace=False))
                + fillers(2)
            )
            docs.append(("noise", tokens, tid, 0))
        # strong decoys: both title terms, so they own the bare-title query
        for _ in range(6):
            chosen = list(rng.choice(ds, size=3, replace=False))
            tokens = (
                [t1, t1, t2, t2]
                + [d for d in chosen for _ in range(3)]
                + [DOMAIN_WORD]
                + list(rng.choice(COMMON_WORDS, size=3, replace=False))
                + fillers(2)
            )
            docs.append(("strong_decoy", tokens, tid, 0))
        # weak decoys: decoy markers only
        for _ in range(14):
            chosen = list(rng.choice(ds, size=3, replace=False))
            tokens = (
                [d for d in chosen for _ in range(3)]
                + [DOMAIN_WORD]
                + list(rng.choice(COMMON_WORDS, size=4, replace=False))
                + fillers(2)
            )
            docs.append(("weak_decoy", tokens, tid, 0))

    n_background = 500 - len(docs)
    background: list[list[str]] = []
    for _ in range(n_background):
        tokens = (
            [DOMAIN_WORD]
            + list(rng.choice(COMMON_WORDS, size=6, replace=False))
            + fillers(3)
        )
        background.append(tokens)
    # pad marker/decoy document frequencies past sqrt(N) so the
    # normalized-idf filter keeps them
    for tid, _ in TOPICS:
        for m in markers[tid]:
            for bi in rng.choice(len(background), size=26, replace=False):
                background[bi].append(m)
        for d in decoys[tid]:
            for bi in rng.choice(len(background), size=22, replace=False):
                background[bi].append(d)
    for tokens in background:
        docs.append(("background", tokens, "", 0))

    order = rng.permutation(len(docs))
    corpus_lines = []
    qrel_lines = []
    for new_id, oi in enumerate(order):
        kind, tokens, tid, g = docs[oi]
        doc_id = f"doc{new_id:04d}"
        corpus_lines.append(
            json.dumps(
                {"doc_id": doc_id, "text": doc_text(rng, tokens)}, sort_keys=True
            )
        )
        if kind in ("rel", "strong_decoy", "weak_decoy"):
            qrel_lines.append(f"{tid} 0 {doc_id} {g}")

    topic_lines = []
    for tid, title in TOPICS:
        ms = markers[tid]
        topic_lines.append(
            json.dumps(
                {
                    "topic_id": tid,
                    "title": title,
                    "description": f"Reports about {title} covering {ms[0]} {ms[1]} {ms[2]} {ms[3]}.",
                    "narrative": f"Useful documents mention {ms[4]} {ms[5]} {ms[6]} {ms[7]} deployments.",
                },
                sort_keys=True,
            )
        )

    OUT.mkdir(parents=True, exist_ok=True)
    (OUT / "corpus.jsonl").write_text("\n".join(corpus_lines) + "\n", encoding="utf-8")
    (OUT / "topics.jsonl").write_text("\n".join(topic_lines) + "\n", encoding="utf-8")
    (OUT / "qrels.txt").write_text("\n".join(sorted(qrel_lines)) + "\n", encoding="utf-8")

    # pools: one marker-group query per marker (fresh relevant band each),
    # weaker decoy queries behind them; only the first title term so the
    # strong decoys stay out of the band
    for tid, title in TOPICS:
        t1 = title.split()[0]
        ms, ds = markers[tid], decoys[tid]
        good = [f"{t1} {m} {DOMAIN_WORD}" for m in ms]
        weak = [f"{t1} {d} {DOMAIN_WORD}" for d in ds]
        pools = {
            "gpt": good + weak,
            "gpt_plus": good
            + [f"{t1} {ms[a]} {ms[b]} {DOMAIN_WORD}" for a, b in ((0, 1), (2, 3), (4, 5), (6, 7))]
            + weak[:3],
        }
        for variant, queries in pools.items():
            pool_dir = OUT / "pools" / variant
            pool_dir.mkdir(parents=True, exist_ok=True)
            with (pool_dir / f"{tid}.jsonl").open("w", encoding="utf-8", newline="\n") as fh:
                for rank, q in enumerate(queries):
                    fh.write(
                        json.dumps(
                            {"topic_id": tid, "rank": rank, "query": q}, sort_keys=True
                        )
                        + "\n"
                    )

    print(f"wrote {len(corpus_lines)} docs, {len(TOPICS)} topics, "
          f"{len(qrel_lines)} qrels, pools -> {OUT}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
