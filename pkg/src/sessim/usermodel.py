"""Probabilistic click decisions, relevance judging, stop rules, action costs."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from sessim.collection import RelevanceGrade, is_relevant


@dataclass(frozen=True)
class ClickModel:
    """Click probabilities conditioned on binarized relevance of the snippet."""

    name: str
    p_rel: float
    p_nrel: float

    def __post_init__(self):
        if not (0.0 <= self.p_nrel <= self.p_rel <= 1.0):
            raise ValueError(
                f"need 0 <= p_nrel <= p_rel <= 1, got ({self.p_rel}, {self.p_nrel})"
            )


CLICK_PRESETS = {
    "perfect": ClickModel("perfect", 1.0, 0.0),
    "navigational": ClickModel("navigational", 0.9, 0.1),
    "informational": ClickModel("informational", 0.8, 0.4),
    "almost_random": ClickModel("almost_random", 0.6, 0.4),
}


def click_model(name: str) -> ClickModel:
    try:
        return CLICK_PRESETS[name]
    except KeyError:
        raise ValueError(
            f"unknown click model {name!r}; presets: {sorted(CLICK_PRESETS)}"
        ) from None


@dataclass(frozen=True)
class Static:
    """Stop after a fixed number of examined snippets per query (rpp)."""

    rpp: int

    def __post_init__(self):
        if self.rpp <= 0:
            raise ValueError(f"rpp must be > 0, got {self.rpp}")


@dataclass(frozen=True)
class Dynamic:
    """Give-up rule: stop once tnr time units pass without a relevant sighting."""

    tnr: float

    def __post_init__(self):
        if self.tnr <= 0:
            raise ValueError(f"tnr must be > 0, got {self.tnr}")


StopPolicy = Union[Static, Dynamic]


@dataclass(frozen=True)
class CostModel:
    """Time units charged per action kind."""

    query: float = 10.0
    snippet: float = 3.0
    read: float = 30.0
    judge: float = 5.0

    def __post_init__(self):
        for name in ("query", "snippet", "read", "judge"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} cost must be > 0")


class Perfect:
    """Judge that reproduces the qrel verdict exactly."""

    __slots__ = ()

    def __repr__(self) -> str:
        return "Perfect"


@dataclass(frozen=True)
class Noisy:
    """Judge that flips the correct verdict with probability 1 - p_correct."""

    p_correct: float

    def __post_init__(self):
        if not 0.0 <= self.p_correct <= 1.0:
            raise ValueError(f"p_correct must be in [0, 1], got {self.p_correct}")


PERFECT_JUDGE = Perfect()

JudgeModel = Union[Perfect, Noisy]


def decide_click(model: ClickModel, grade: RelevanceGrade, rng: np.random.Generator) -> bool:
    """Bernoulli(p_rel) on judged-relevant snippets, Bernoulli(p_nrel) otherwise.

    Judged(0) and unjudged documents both take the nrel branch. Exactly
    one rng draw per call, so streams stay aligned across branches.
    """
    p = model.p_rel if is_relevant(grade) else model.p_nrel
    return bool(rng.random() < p)


def judge_document(judge: JudgeModel, grade: RelevanceGrade, rng: np.random.Generator) -> bool:
    """Whether the simulated user marks the read document relevant."""
    truth = is_relevant(grade)
    if isinstance(judge, Perfect):
        return truth
    correct = bool(rng.random() < judge.p_correct)
    return truth if correct else not truth


def should_stop(
    policy: StopPolicy, snippets_examined: int, time_since_last_relevant: float
) -> bool:
    """Stop the current query per the configured rule."""
    if snippets_examined < 0 or time_since_last_relevant < 0:
        raise ValueError("counters must be non-negative")
    if isinstance(policy, Static):
        return snippets_examined >= policy.rpp
    return time_since_last_relevant >= policy.tnr


def action_cost(costs: CostModel, action: str) -> float:
    """Configured constant for one of: query, snippet, read, judge."""
    try:
        return getattr(costs, action)
    except AttributeError:
        raise ValueError(f"unknown action kind {action!r}") from None
