"""Experiment configuration file: YAML with per-run session variants."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping

import yaml

from sessim.metrics import MetricParams
from sessim.querygen import Strategy, parse_strategy
from sessim.retrieval import BM25Params, HttpReranker, IDENTITY, RerankConfig
from sessim.session import SessionConfig
from sessim.usermodel import (
    ClickModel,
    CostModel,
    Dynamic,
    Noisy,
    PERFECT_JUDGE,
    Static,
    click_model,
)


class ConfigError(Exception):
    """Config parse/validation failure, with a field path in the message."""


def _require(mapping: Mapping, key: str, where: str) -> Any:
    if key not in mapping:
        raise ConfigError(f"{where}: missing required field {key!r}")
    return mapping[key]


def _parse_click(value: Any, where: str) -> ClickModel:
    if isinstance(value, str):
        try:
            return click_model(value)
        except ValueError as exc:
            raise ConfigError(f"{where}: {exc}") from None
    if isinstance(value, Mapping):
        try:
            return ClickModel(
                name=str(value.get("name", "custom")),
                p_rel=float(_require(value, "p_rel", where)),
                p_nrel=float(_require(value, "p_nrel", where)),
            )
        except ValueError as exc:
            raise ConfigError(f"{where}: {exc}") from None
    raise ConfigError(f"{where}: expected a click preset name or p_rel/p_nrel mapping")


def _parse_stop(value: Any, where: str):
    if not isinstance(value, Mapping) or len(value) != 1:
        raise ConfigError(f"{where}: expected exactly one of rpp:/tnr:")
    try:
        if "rpp" in value:
            return Static(int(value["rpp"]))
        if "tnr" in value:
            return Dynamic(float(value["tnr"]))
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from None
    raise ConfigError(f"{where}: expected rpp: or tnr:")


def _parse_judge(value: Any, where: str):
    if value in ("perfect", None):
        return PERFECT_JUDGE
    if isinstance(value, Mapping) and "p_correct" in value:
        try:
            return Noisy(float(value["p_correct"]))
        except ValueError as exc:
            raise ConfigError(f"{where}: {exc}") from None
    raise ConfigError(f"{where}: expected 'perfect' or {{p_correct: ...}}")


def _parse_costs(value: Any, where: str) -> CostModel:
    if value is None:
        return CostModel()
    if not isinstance(value, Mapping):
        raise ConfigError(f"{where}: expected a mapping of action costs")
    known = {"query", "snippet", "read", "judge"}
    unknown = set(value) - known
    if unknown:
        raise ConfigError(f"{where}: unknown cost keys {sorted(unknown)}")
    try:
        return CostModel(**{k: float(v) for k, v in value.items()})
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from None


@dataclass
class VariantSpec:
    """One named session configuration from the config file."""

    name: str
    strategy: Strategy
    click: ClickModel
    stop: object
    judge: object
    costs: CostModel
    rerank_cutoff: int
    rerank_provider: str  # "identity" or "sidecar"
    retrieval_k: int
    global_budget: float

    def to_session_config(
        self, seed: int, documents=None, sidecar_url: str | None = None
    ) -> SessionConfig:
        if self.rerank_provider == "identity":
            provider = IDENTITY
        elif self.rerank_provider == "sidecar":
            if not sidecar_url:
                raise ConfigError(
                    f"variant {self.name!r} wants the sidecar reranker but no "
                    "sidecar URL is configured (config sidecar_url or SIDECAR_URL)"
                )
            if documents is None:
                raise ConfigError("sidecar reranker needs the loaded corpus")
            provider = HttpReranker(sidecar_url, documents)
        else:
            raise ConfigError(
                f"variant {self.name!r}: unknown rerank provider {self.rerank_provider!r}"
            )
        return SessionConfig(
            strategy=self.strategy,
            click=self.click,
            stop=self.stop,
            judge=self.judge,
            costs=self.costs,
            rerank=RerankConfig(cutoff=self.rerank_cutoff, provider=provider),
            retrieval_k=self.retrieval_k,
            global_budget=self.global_budget,
            seed=seed,
        )


@dataclass
class ExperimentConfig:
    root: Path
    corpus: Path
    topics: Path
    qrels: Path
    stopwords: Path | None
    pools_dir: Path
    sidecar_url: str | None
    output_dir: Path
    seed: int
    metrics: MetricParams
    bm25: BM25Params
    poolgen_rounds: int
    variants: list[VariantSpec]


def _variant_from(raw: Mapping, defaults: Mapping, where: str) -> VariantSpec:
    def pick(key: str, fallback):
        return raw.get(key, defaults.get(key, fallback))

    name = _require(raw, "name", where)
    rerank_raw = pick("rerank", {"cutoff": 100, "provider": "identity"}) or {}
    try:
        strategy = parse_strategy(str(pick("strategy", "gpt")))
    except Exception as exc:
        raise ConfigError(f"{where}.strategy: {exc}") from None
    try:
        return VariantSpec(
            name=str(name),
            strategy=strategy,
            click=_parse_click(pick("click", "informational"), f"{where}.click"),
            stop=_parse_stop(pick("stop", {"rpp": 10}), f"{where}.stop"),
            judge=_parse_judge(pick("judge", "perfect"), f"{where}.judge"),
            costs=_parse_costs(pick("costs", None), f"{where}.costs"),
            rerank_cutoff=int(rerank_raw.get("cutoff", 100)),
            rerank_provider=str(rerank_raw.get("provider", "identity")),
            retrieval_k=int(pick("retrieval_k", 50)),
            global_budget=float(pick("global_budget", 2000)),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from None


def load_experiment_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        raw = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        loc = f" at line {mark.line + 1}, column {mark.column + 1}" if mark else ""
        raise ConfigError(f"{path}: YAML parse error{loc}: {exc}") from None
    if not isinstance(raw, Mapping):
        raise ConfigError(f"{path}: top level must be a mapping")

    root = path.parent
    coll = _require(raw, "collection", str(path))
    if not isinstance(coll, Mapping):
        raise ConfigError("collection: must be a mapping")

    def respath(value: Any) -> Path:
        p = Path(str(value))
        return p if p.is_absolute() else root / p

    stopwords = coll.get("stopwords")
    sessions = _require(raw, "sessions", str(path))
    if not isinstance(sessions, list) or not sessions:
        raise ConfigError("sessions: need at least one session variant")
    defaults = raw.get("defaults", {}) or {}
    variants = [
        _variant_from(s, defaults, f"sessions[{i}]") for i, s in enumerate(sessions)
    ]
    names = [v.name for v in variants]
    if len(set(names)) != len(names):
        raise ConfigError("sessions: variant names must be unique")

    metrics_raw = raw.get("metrics", {}) or {}
    retrieval_raw = raw.get("retrieval", {}) or {}
    try:
        metrics = MetricParams(
            bq=float(metrics_raw.get("bq", 4.0)),
            p=float(metrics_raw.get("p", 0.99)),
            b=float(metrics_raw.get("b", 0.9)),
        )
        bm25 = BM25Params(
            k1=float(retrieval_raw.get("k1", 1.2)),
            b=float(retrieval_raw.get("b", 0.75)),
        )
    except ValueError as exc:
        raise ConfigError(f"metrics/retrieval: {exc}") from None

    return ExperimentConfig(
        root=root,
        corpus=respath(_require(coll, "corpus", "collection")),
        topics=respath(_require(coll, "topics", "collection")),
        qrels=respath(_require(coll, "qrels", "collection")),
        stopwords=respath(stopwords) if stopwords else None,
        pools_dir=respath(raw.get("pools_dir", "pools")),
        sidecar_url=raw.get("sidecar_url") or None,
        output_dir=respath(raw.get("output_dir", "runs")),
        seed=int(raw.get("seed", 0)),
        metrics=metrics,
        bm25=bm25,
        poolgen_rounds=int(raw.get("poolgen_rounds", 4)),
        variants=variants,
    )
