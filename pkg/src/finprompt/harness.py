"""End-to-end experiment orchestration: config, run, leakage audit, reports.

run() wires the modules together: ingest -> label -> split -> build prompts ->
complete -> parse/vote -> score, with predictions streamed to JSONL per
strategy and a manifest written last. Completions go through the cache
journal, so re-running a config with a warm cache touches no provider and
reproduces byte-identical prediction files and reports.
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional, Sequence

from . import corpus as corpus_mod
from .canon import digest_file, digest_obj
from .corpus import (
    LabeledArticle,
    NewsArticle,
    SplitCorpus,
    format_timestamp,
    parse_timestamp,
)
from .errors import FinpromptError, OfflineViolationError, ValidationError
from .evalkit import SCORING_MODES, build_metrics_report, mi_pairs, mutual_information, score
from .gateway import CompletionCache, Gateway, GenerationParams, HttpProvider, StubProvider
from .prompts import (
    DEFAULT_SNIPPET_CHARS,
    DEFAULT_TOKEN_BUDGET,
    ContextRetriever,
    Exemplar,
    ExemplarSelector,
    KnowledgeBlock,
    PromptBundle,
    Sentiment,
    Strategy,
    REPORT_ORDER,
    build_ad_fcot,
    build_cot,
    build_dk_cot,
    build_few_shot,
    build_zero_shot,
    load_exemplars,
    load_knowledge,
)
from .verdict import PredictionRecord, aggregate_samples, write_predictions


@dataclass(frozen=True)
class SelfConsistencyConfig:
    enabled: bool = False
    n: int = 5
    temperature: float = 0.7


@dataclass(frozen=True)
class RagConfig:
    enabled: bool = False
    k: int = 2
    snippet_chars: int = DEFAULT_SNIPPET_CHARS


@dataclass(frozen=True)
class ProviderConfig:
    kind: str = "stub"  # "stub" | "http"
    model_name: str = "stub-model"
    rulebook_path: Optional[Path] = None
    base_url: Optional[str] = None
    api_key_env: str = "OPENAI_API_KEY"
    max_in_flight: int = 4
    timeout_ms: int = 30000


@dataclass(frozen=True)
class ExperimentConfig:
    news_path: Path
    prices_path: Path
    exemplars_path: Path
    cutoff: datetime
    knowledge_path: Optional[Path] = None
    news_format: str = "csv"
    column_map: dict = field(default_factory=dict)
    threshold: float = corpus_mod.DEFAULT_TICK_THRESHOLD
    shift_after_close: bool = False
    strategies: tuple[Strategy, ...] = tuple(REPORT_ORDER)
    self_consistency: SelfConsistencyConfig = SelfConsistencyConfig()
    rag: RagConfig = RagConfig()
    provider: ProviderConfig = ProviderConfig()
    budget: int = DEFAULT_TOKEN_BUDGET
    scoring_mode: str = "neutral-as-negative-signal"
    exemplar_order: tuple = (Sentiment.NEGATIVE, Sentiment.POSITIVE)
    output_dir: Path = Path("runs/latest")
    seed: int = 0
    template_paths: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict)

    @property
    def digest(self) -> str:
        return digest_obj(self.raw)


def _require(raw: dict, key: str, context: str):
    if key not in raw or raw[key] in (None, ""):
        raise ValidationError(f"config is missing required key {key!r} in {context}")
    return raw[key]


def load_config(path: str | Path) -> ExperimentConfig:
    """Parse and validate an experiment config JSON file.

    Data paths resolve relative to the config file's directory; the output
    directory resolves relative to the current working directory. The cutoff
    is mandatory: look-ahead safety must be explicit, never defaulted.
    """
    path = Path(path)
    if not path.is_file():
        raise ValidationError(f"config file not readable: {path}")
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValidationError(f"config {path} is not valid JSON: {exc}") from exc
    base = path.parent

    news = _require(raw, "news", "top level")
    news_path = base / _require(news, "path", "news")
    news_format = news.get("format", "csv")
    if news_format not in ("csv", "jsonl"):
        raise ValidationError(f"unknown news format {news_format!r}")

    prices = _require(raw, "prices", "top level")
    exemplars = _require(raw, "exemplars", "top level")
    knowledge = raw.get("knowledge")

    cutoff_raw = _require(raw, "cutoff", "top level")
    try:
        cutoff = parse_timestamp(str(cutoff_raw))
    except ValueError as exc:
        raise ValidationError(f"bad cutoff {cutoff_raw!r}: {exc}") from exc

    try:
        strategies = tuple(Strategy(name) for name in raw.get("strategies", [s.value for s in REPORT_ORDER]))
    except ValueError as exc:
        raise ValidationError(f"unknown strategy in config: {exc}") from exc
    if not strategies:
        raise ValidationError("config selects no strategies")

    threshold = float(raw.get("threshold", corpus_mod.DEFAULT_TICK_THRESHOLD))
    if threshold < 0:
        raise ValidationError(f"threshold must be >= 0, got {threshold}")

    budget = int(raw.get("budget", DEFAULT_TOKEN_BUDGET))
    if budget <= 0:
        raise ValidationError(f"budget must be positive, got {budget}")

    scoring_mode = raw.get("scoring_mode", "neutral-as-negative-signal")
    if scoring_mode not in SCORING_MODES:
        raise ValidationError(f"unknown scoring mode {scoring_mode!r}")

    try:
        exemplar_order = tuple(
            Sentiment(name) for name in raw.get("exemplar_order", ["Negative", "Positive"])
        )
    except ValueError as exc:
        raise ValidationError(f"bad exemplar_order: {exc}") from exc
    if sorted(s.value for s in exemplar_order) != ["Negative", "Positive"]:
        raise ValidationError("exemplar_order must name Negative and Positive exactly once each")

    sc_raw = raw.get("self_consistency", {})
    sc = SelfConsistencyConfig(
        enabled=bool(sc_raw.get("enabled", False)),
        n=int(sc_raw.get("n", 5)),
        temperature=float(sc_raw.get("temperature", 0.7)),
    )
    if sc.enabled and sc.n < 1:
        raise ValidationError(f"self-consistency n must be >= 1, got {sc.n}")

    rag_raw = raw.get("rag", {})
    rag = RagConfig(
        enabled=bool(rag_raw.get("enabled", False)),
        k=int(rag_raw.get("k", 2)),
        snippet_chars=int(rag_raw.get("snippet_chars", DEFAULT_SNIPPET_CHARS)),
    )
    if rag.enabled and rag.k < 1:
        raise ValidationError(f"rag k must be >= 1, got {rag.k}")

    prov_raw = raw.get("provider", {})
    kind = prov_raw.get("kind", "stub")
    if kind not in ("stub", "http"):
        raise ValidationError(f"unknown provider kind {kind!r}")
    rulebook = prov_raw.get("rulebook")
    provider = ProviderConfig(
        kind=kind,
        model_name=prov_raw.get("model_name", "stub-model"),
        rulebook_path=(base / rulebook) if rulebook else None,
        base_url=prov_raw.get("base_url"),
        api_key_env=prov_raw.get("api_key_env", "OPENAI_API_KEY"),
        max_in_flight=int(prov_raw.get("max_in_flight", 4)),
        timeout_ms=int(prov_raw.get("timeout_ms", 30000)),
    )
    if kind == "stub" and provider.rulebook_path is None:
        raise ValidationError("stub provider requires a rulebook path")
    if kind == "http" and not provider.base_url:
        raise ValidationError("http provider requires base_url")

    template_paths = {}
    for name, tpl in (raw.get("templates") or {}).items():
        try:
            strategy = Strategy(name)
        except ValueError as exc:
            raise ValidationError(f"templates section names unknown strategy {name!r}") from exc
        tpl_path = base / tpl
        if not tpl_path.is_file():
            raise ValidationError(f"template file not readable: {tpl_path}")
        template_paths[strategy] = tpl_path

    return ExperimentConfig(
        news_path=news_path,
        news_format=news_format,
        column_map=news.get("column_map") or {},
        prices_path=base / _require(prices, "path", "prices"),
        exemplars_path=base / _require(exemplars, "path", "exemplars"),
        knowledge_path=(base / knowledge["path"]) if knowledge and knowledge.get("path") else None,
        cutoff=cutoff,
        threshold=threshold,
        shift_after_close=bool(raw.get("shift_after_close", False)),
        strategies=strategies,
        self_consistency=sc,
        rag=rag,
        provider=provider,
        budget=budget,
        scoring_mode=scoring_mode,
        exemplar_order=exemplar_order,
        output_dir=Path(raw.get("output_dir", "runs/latest")),
        seed=int(raw.get("seed", 0)),
        template_paths=template_paths,
        raw=raw,
    )


def build_provider(config: ProviderConfig, offline: bool = False):
    if config.kind == "stub":
        return StubProvider.from_file(config.rulebook_path)
    if offline:
        raise OfflineViolationError(
            "offline mode forbids the http provider; configure the stub provider instead"
        )
    api_key = os.environ.get(config.api_key_env, "")
    return HttpProvider(
        base_url=config.base_url,
        api_key=api_key,
        timeout_ms=config.timeout_ms,
    )


# --- leakage audit -----------------------------------------------------------


@dataclass(frozen=True)
class AuditViolation:
    kind: str  # test_before_cutoff | stale_reference | future_reference | dev_id_as_target
    subject_id: str
    detail: str

    def to_dict(self) -> dict:
        return {"kind": self.kind, "subject_id": self.subject_id, "detail": self.detail}


@dataclass(frozen=True)
class AuditReport:
    violations: tuple[AuditViolation, ...]
    bundles_checked: int
    articles_checked: int

    @property
    def passed(self) -> bool:
        return not self.violations

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "bundles_checked": self.bundles_checked,
            "articles_checked": self.articles_checked,
            "violations": [v.to_dict() for v in self.violations],
        }


def audit_leakage(
    split: SplitCorpus,
    bundles: Sequence[PromptBundle],
    pool: Sequence[Exemplar],
) -> AuditReport:
    """Hindsight check that no future information reached any prompt.

    Verifies (a) every test article sits at or after the cutoff, (b) every
    exemplar and retrieved snippet in every bundle strictly predates its
    target, and (c) no dev article id appears as a test target.
    """
    violations: list[AuditViolation] = []
    for item in split.test:
        if item.article.timestamp < split.cutoff:
            violations.append(
                AuditViolation(
                    kind="test_before_cutoff",
                    subject_id=item.article.id,
                    detail=(
                        f"test article dated {format_timestamp(item.article.timestamp)} "
                        f"precedes cutoff {format_timestamp(split.cutoff)}"
                    ),
                )
            )

    exemplar_times = {ex.source_article_id: ex.timestamp for ex in pool}
    article_times = {item.article.id: item.article.timestamp for item in split.dev + split.test}
    dev_ids = {item.article.id for item in split.dev}

    for bundle in bundles:
        target_ts = article_times.get(bundle.target_article_id)
        if target_ts is None:
            violations.append(
                AuditViolation(
                    kind="stale_reference",
                    subject_id=bundle.target_article_id,
                    detail="bundle targets an article absent from the corpus",
                )
            )
            continue
        if bundle.target_article_id in dev_ids:
            violations.append(
                AuditViolation(
                    kind="dev_id_as_target",
                    subject_id=bundle.target_article_id,
                    detail="prompt development article used as a test target",
                )
            )
        for ex_id in bundle.exemplar_ids:
            ex_ts = exemplar_times.get(ex_id)
            if ex_ts is None:
                violations.append(
                    AuditViolation(
                        kind="stale_reference",
                        subject_id=ex_id,
                        detail=f"bundle for {bundle.target_article_id} cites an exemplar not in the pool",
                    )
                )
            elif ex_ts >= target_ts:
                violations.append(
                    AuditViolation(
                        kind="future_reference",
                        subject_id=ex_id,
                        detail=(
                            f"exemplar dated {format_timestamp(ex_ts)} does not predate "
                            f"target {bundle.target_article_id}"
                        ),
                    )
                )
        for ctx_id in bundle.context_ids:
            ctx_ts = article_times.get(ctx_id)
            if ctx_ts is None:
                violations.append(
                    AuditViolation(
                        kind="stale_reference",
                        subject_id=ctx_id,
                        detail=f"bundle for {bundle.target_article_id} cites a snippet not in the corpus",
                    )
                )
            elif ctx_ts >= target_ts:
                violations.append(
                    AuditViolation(
                        kind="future_reference",
                        subject_id=ctx_id,
                        detail=(
                            f"retrieved snippet dated {format_timestamp(ctx_ts)} does not "
                            f"predate target {bundle.target_article_id}"
                        ),
                    )
                )
    return AuditReport(
        violations=tuple(violations),
        bundles_checked=len(bundles),
        articles_checked=len(split.test),
    )


# --- run orchestration --------------------------------------------------------


@dataclass(frozen=True)
class RunManifest:
    config_digest: str
    corpus_digests: dict
    prediction_files: dict
    bundle_files: dict
    metrics: dict
    started_at: str
    finished_at: str
    provider_call_count: int
    cache_hit_count: int
    corpus_summary: dict
    errors: tuple = ()
    leakage_audit: Optional[dict] = None

    def to_dict(self) -> dict:
        return {
            "config_digest": self.config_digest,
            "corpus_digests": self.corpus_digests,
            "prediction_files": self.prediction_files,
            "bundle_files": self.bundle_files,
            "metrics": self.metrics,
            "started_at": self.started_at,
            "finished_at": self.finished_at,
            "provider_call_count": self.provider_call_count,
            "cache_hit_count": self.cache_hit_count,
            "corpus_summary": self.corpus_summary,
            "errors": list(self.errors),
            "leakage_audit": self.leakage_audit,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "RunManifest":
        return cls(
            config_digest=raw["config_digest"],
            corpus_digests=raw.get("corpus_digests", {}),
            prediction_files=raw.get("prediction_files", {}),
            bundle_files=raw.get("bundle_files", {}),
            metrics=raw["metrics"],
            started_at=raw.get("started_at", ""),
            finished_at=raw.get("finished_at", ""),
            provider_call_count=int(raw.get("provider_call_count", 0)),
            cache_hit_count=int(raw.get("cache_hit_count", 0)),
            corpus_summary=raw.get("corpus_summary", {}),
            errors=tuple(raw.get("errors", [])),
            leakage_audit=raw.get("leakage_audit"),
        )


def load_manifest(path: str | Path) -> RunManifest:
    path = Path(path)
    if not path.is_file():
        raise ValidationError(f"manifest not readable: {path}")
    return RunManifest.from_dict(json.loads(path.read_text(encoding="utf-8")))


def prepare_corpus(config: ExperimentConfig):
    """Shared ingest half of a run: load, label, split, and load prompt data."""
    news = corpus_mod.load_news(
        config.news_path, format=config.news_format, column_map=config.column_map
    )
    prices = corpus_mod.load_prices(config.prices_path)
    labeled = corpus_mod.attach_labels(
        news.articles,
        prices,
        threshold=config.threshold,
        shift_after_close=config.shift_after_close,
    )
    split = corpus_mod.temporal_split(labeled, config.cutoff)
    pool = load_exemplars(config.exemplars_path)
    knowledge = load_knowledge(config.knowledge_path) if config.knowledge_path else {}
    return news, split, pool, knowledge


class _StrategyRunner:
    """Builds, completes, and parses one (article, strategy) work item."""

    def __init__(
        self,
        config: ExperimentConfig,
        gateway: Gateway,
        selector: ExemplarSelector,
        retriever: Optional[ContextRetriever],
        knowledge: dict[str, KnowledgeBlock],
        templates: dict[Strategy, str],
    ):
        self.config = config
        self.gateway = gateway
        self.selector = selector
        self.retriever = retriever
        self.knowledge = knowledge
        self.templates = templates
        self.base_params = GenerationParams(
            model_name=config.provider.model_name, temperature=0.0, max_tokens=256
        )
        sc = config.self_consistency
        self.sc_params = GenerationParams(
            model_name=config.provider.model_name, temperature=sc.temperature, max_tokens=256
        )

    def build_bundle(self, strategy: Strategy, article: NewsArticle) -> PromptBundle:
        context = ()
        if self.retriever is not None:
            context = self.retriever.retrieve(article, self.config.rag.k)
        template = self.templates.get(strategy)
        budget = self.config.budget
        if strategy is Strategy.ZERO_SHOT:
            return build_zero_shot(article, template, budget=budget, context=context)
        if strategy is Strategy.FEW_SHOT:
            exemplars = self.selector.select(
                article, k=len(self.config.exemplar_order), class_constraint=self.config.exemplar_order
            )
            return build_few_shot(article, exemplars, template, budget=budget, context=context)
        if strategy is Strategy.COT:
            return build_cot(article, template, budget=budget, context=context)
        if strategy is Strategy.DK_COT:
            block = self.knowledge.get(article.ticker) or KnowledgeBlock(article.ticker, ())
            return build_dk_cot(article, block, template, budget=budget, context=context)
        if strategy is Strategy.AD_FCOT:
            return build_ad_fcot(
                article,
                self.selector.pool,
                template,
                budget=budget,
                context=context,
                class_order=self.config.exemplar_order,
            )
        raise ValidationError(f"unhandled strategy {strategy}")

    def run_item(self, strategy: Strategy, article: NewsArticle):
        bundle = self.build_bundle(strategy, article)
        sc = self.config.self_consistency
        if sc.enabled:
            completions = [
                self.gateway.complete(bundle.text, self.sc_params, sample_index=i)
                for i in range(sc.n)
            ]
        else:
            completions = [self.gateway.complete(bundle.text, self.base_params, sample_index=0)]
        record = aggregate_samples(article.id, strategy, completions)
        return bundle, record


def run(
    config: ExperimentConfig,
    offline: bool = False,
    strategy_filter: Optional[Sequence[Strategy]] = None,
    out_dir: Optional[str | Path] = None,
) -> RunManifest:
    """Execute the full experiment described by a config.

    Per strategy: build a prompt for every evaluable test article, complete
    it (with self-consistency sampling when enabled), parse and vote, score,
    and persist predictions, bundles, metrics, and finally the manifest.
    Per-article failures are recorded with article and strategy context and
    the run continues; outputs are sorted by article id so results do not
    depend on completion order.
    """
    started_at = format_timestamp(datetime.now(timezone.utc))
    out = Path(out_dir) if out_dir else config.output_dir
    out.mkdir(parents=True, exist_ok=True)

    strategies = list(config.strategies)
    if strategy_filter:
        wanted = set(strategy_filter)
        strategies = [s for s in strategies if s in wanted]
        if not strategies:
            raise ValidationError("strategy filter excludes every configured strategy")

    news, split, pool, knowledge = prepare_corpus(config)

    templates = {
        strategy: path.read_text(encoding="utf-8")
        for strategy, path in config.template_paths.items()
    }

    provider = build_provider(config.provider, offline=offline)
    cache = CompletionCache(out / "cache.jsonl")
    gateway = Gateway(provider, cache, max_in_flight=config.provider.max_in_flight)

    selector = ExemplarSelector(pool)
    retriever = None
    if config.rag.enabled:
        history = sorted((item.article for item in split.dev), key=lambda a: a.id)
        retriever = ContextRetriever(history, snippet_chars=config.rag.snippet_chars)

    evaluable = sorted(
        (item for item in split.test if item.evaluable), key=lambda item: item.article.id
    )
    if not evaluable:
        raise ValidationError("no evaluable test articles (all flat or unlabeled)")
    labels = {item.article.id: item.direction for item in evaluable}
    excluded_flat = sum(1 for item in split.test if item.exclusion == "flat")
    excluded_unlabeled = sum(1 for item in split.test if item.exclusion == "unlabeled")

    runner = _StrategyRunner(config, gateway, selector, retriever, knowledge, templates)
    prediction_files: dict[str, str] = {}
    bundle_files: dict[str, str] = {}
    metrics_by_strategy: dict[str, dict] = {}
    errors: list[dict] = []
    all_bundles: list[PromptBundle] = []

    for strategy in strategies:
        results: list[tuple[PromptBundle, PredictionRecord]] = []

        def _work(item: LabeledArticle, _strategy=strategy):
            try:
                return runner.run_item(_strategy, item.article)
            except FinpromptError as exc:
                return {"article_id": item.article.id, "strategy": _strategy.value, "error": str(exc)}

        with ThreadPoolExecutor(max_workers=max(1, config.provider.max_in_flight)) as pool_exec:
            outcomes = list(pool_exec.map(_work, evaluable))
        for outcome in outcomes:
            if isinstance(outcome, dict):
                errors.append(outcome)
            else:
                results.append(outcome)

        results.sort(key=lambda pair: pair[1].article_id)
        bundles = [bundle for bundle, _ in results]
        records = [record for _, record in results]
        all_bundles.extend(bundles)

        bundle_path = out / f"bundles_{strategy.value}.jsonl"
        with open(bundle_path, "w", encoding="utf-8") as fh:
            for bundle in bundles:
                fh.write(json.dumps(bundle.to_dict(), ensure_ascii=False) + "\n")
        pred_path = out / f"predictions_{strategy.value}.jsonl"
        write_predictions(records, pred_path)
        prediction_files[strategy.value] = str(pred_path)
        bundle_files[strategy.value] = str(bundle_path)

        if not records:
            continue
        scored = score(records, labels, config.scoring_mode)
        signals, outcomes_list = mi_pairs(records, labels, config.scoring_mode)
        mi = mutual_information(signals, outcomes_list) if signals else None
        report_row = build_metrics_report(scored, excluded_flat, excluded_unlabeled, mi)
        metrics_by_strategy[strategy.value] = report_row.to_dict()

    audit = audit_leakage(split, all_bundles, pool)

    manifest = RunManifest(
        config_digest=config.digest,
        corpus_digests={
            "news": digest_file(config.news_path),
            "prices": digest_file(config.prices_path),
            "exemplars": digest_file(config.exemplars_path),
            "knowledge": digest_file(config.knowledge_path) if config.knowledge_path else None,
        },
        prediction_files=prediction_files,
        bundle_files=bundle_files,
        metrics=metrics_by_strategy,
        started_at=started_at,
        finished_at=format_timestamp(datetime.now(timezone.utc)),
        provider_call_count=gateway.provider_calls,
        cache_hit_count=gateway.cache_hits,
        corpus_summary={
            "articles": len(news.articles),
            "rejections": len(news.rejections),
            "dev": len(split.dev),
            "test": len(split.test),
            "evaluable_test": len(evaluable),
            "excluded_flat": excluded_flat,
            "excluded_unlabeled": excluded_unlabeled,
        },
        errors=tuple(errors),
        leakage_audit=audit.to_dict(),
    )

    corpus_mod.write_rejections(news.rejections, out / "rejections.jsonl")
    report_text, report_json = report([manifest])
    (out / "report.txt").write_text(report_text, encoding="utf-8")
    (out / "report.json").write_text(
        json.dumps(report_json, indent=2, ensure_ascii=False) + "\n", encoding="utf-8"
    )
    (out / "manifest.json").write_text(
        json.dumps(manifest.to_dict(), indent=2, ensure_ascii=False) + "\n", encoding="utf-8"
    )
    return manifest


# --- reporting ----------------------------------------------------------------


def _format_pct(value: Optional[float]) -> str:
    return "—" if value is None else f"{value * 100:.2f}"


def report(manifests: Sequence[RunManifest]) -> tuple[str, dict]:
    """Render the aggregate metrics table (text and JSON).

    Rows follow the canonical strategy order; metrics render as percentages
    to two decimals and undefined values as an em-dash cell. When several
    manifests carry the same strategy, the last one wins.
    """
    if not manifests:
        raise ValidationError("report needs at least one manifest")
    merged: dict[str, dict] = {}
    for manifest in manifests:
        merged.update(manifest.metrics)

    rows = []
    for strategy in REPORT_ORDER:
        entry = merged.get(strategy.value)
        if entry is None:
            continue
        rows.append(
            {
                "method": strategy.display_name,
                "accuracy": entry.get("accuracy"),
                "precision": entry.get("precision"),
                "recall": entry.get("recall"),
                "mutual_information_bits": entry.get("mutual_information_bits"),
            }
        )

    header = f"{'Method':<9}  {'Accuracy':>8}  {'Precision':>9}  {'Recall':>6}"
    lines = [header]
    for row in rows:
        lines.append(
            f"{row['method']:<9}  {_format_pct(row['accuracy']):>8}  "
            f"{_format_pct(row['precision']):>9}  {_format_pct(row['recall']):>6}"
        )
    text = "\n".join(lines) + "\n"
    return text, {"rows": rows}
