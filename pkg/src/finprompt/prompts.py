"""Prompt builders for the five strategies, exemplar selection, and retrieval.

Builders are pure: same (article, pool, template, config) yields byte-identical
text. They never truncate to fit the token budget; an over-budget render is an
error so nothing silently changes meaning. Exemplar selection and context
retrieval refuse any candidate that does not strictly predate the target.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass
from datetime import datetime
from enum import Enum
from pathlib import Path
from typing import Optional, Sequence

from .corpus import NewsArticle, format_timestamp, parse_timestamp
from .errors import BudgetExceededError, IngestError, TemporalViolationError, ValidationError
from .tfidf import TfidfIndex

DEFAULT_TOKEN_BUDGET = 1024
DEFAULT_SNIPPET_CHARS = 240
MAX_FACT_CHARS = 300

#: Stepwise cue shared by every CoT-bearing strategy.
COT_CUE = (
    "Think step-by-step: What events happen in the news and how might they "
    "affect the company's stock?"
)

FINAL_ANSWER_DIRECTIVE = "Finish with one line of the form:\nFinal answer: <Positive|Negative|Neutral>"


class Sentiment(str, Enum):
    POSITIVE = "Positive"
    NEGATIVE = "Negative"
    NEUTRAL = "Neutral"


class Strategy(str, Enum):
    ZERO_SHOT = "ZeroShot"
    FEW_SHOT = "FewShot"
    COT = "CoT"
    DK_COT = "DKCoT"
    AD_FCOT = "ADFCoT"

    @property
    def display_name(self) -> str:
        return _DISPLAY_NAMES[self]


_DISPLAY_NAMES = {
    Strategy.ZERO_SHOT: "Zero-Shot",
    Strategy.FEW_SHOT: "Few-Shot",
    Strategy.COT: "CoT",
    Strategy.DK_COT: "DK-CoT",
    Strategy.AD_FCOT: "AD-FCoT",
}

#: Canonical row order for reports.
REPORT_ORDER = [
    Strategy.ZERO_SHOT,
    Strategy.FEW_SHOT,
    Strategy.COT,
    Strategy.DK_COT,
    Strategy.AD_FCOT,
]


@dataclass(frozen=True)
class Exemplar:
    """Historical (excerpt, rationale chain, label) triple used as an analogy."""

    source_article_id: str
    excerpt: str
    rationale: tuple[str, ...]
    label: Sentiment
    timestamp: datetime

    def to_dict(self) -> dict:
        return {
            "source_article_id": self.source_article_id,
            "excerpt": self.excerpt,
            "rationale": list(self.rationale),
            "label": self.label.value,
            "timestamp": format_timestamp(self.timestamp),
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "Exemplar":
        return cls(
            source_article_id=str(raw["source_article_id"]),
            excerpt=str(raw["excerpt"]),
            rationale=tuple(str(step) for step in raw.get("rationale", [])),
            label=Sentiment(raw["label"]),
            timestamp=parse_timestamp(str(raw["timestamp"])),
        )


@dataclass(frozen=True)
class KnowledgeBlock:
    """Static background facts for one ticker, prepended by DK-CoT.

    Facts must be short and, by authoring contract, must never describe
    events at or after any target article they are used with.
    """

    ticker: str
    facts: tuple[str, ...]

    def __post_init__(self):
        for fact in self.facts:
            if len(fact) > MAX_FACT_CHARS:
                raise ValidationError(
                    f"knowledge fact for {self.ticker} exceeds {MAX_FACT_CHARS} chars: {fact[:60]!r}..."
                )


@dataclass(frozen=True)
class RetrievedSnippet:
    article_id: str
    text: str
    timestamp: datetime


@dataclass(frozen=True)
class PromptBundle:
    strategy: Strategy
    text: str
    token_estimate: int
    exemplar_ids: tuple[str, ...]
    knowledge_used: bool
    target_article_id: str
    context_ids: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "strategy": self.strategy.value,
            "text": self.text,
            "token_estimate": self.token_estimate,
            "exemplar_ids": list(self.exemplar_ids),
            "knowledge_used": self.knowledge_used,
            "target_article_id": self.target_article_id,
            "context_ids": list(self.context_ids),
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "PromptBundle":
        return cls(
            strategy=Strategy(raw["strategy"]),
            text=raw["text"],
            token_estimate=int(raw["token_estimate"]),
            exemplar_ids=tuple(raw.get("exemplar_ids", [])),
            knowledge_used=bool(raw.get("knowledge_used", False)),
            target_article_id=raw["target_article_id"],
            context_ids=tuple(raw.get("context_ids", [])),
        )


def estimate_tokens(text: str) -> int:
    """Deterministic token estimate: ceil(len/4), a rough subword proxy."""
    return math.ceil(len(text) / 4)


# --- default templates -------------------------------------------------------
#
# Placeholders: {{article}}, {{exemplars}}, {{knowledge}}, {{cue}}, {{context}}.
# {{context}} renders empty unless retrieval augmentation supplies snippets.

ZERO_SHOT_TEMPLATE = """\
You are a financial analyst. Read the news and assess its impact on the company's stock.

{{context}}News:
{{article}}

Classify the sentiment of this news toward the company's stock.
Answer with a single word: Positive, Negative, or Neutral."""

FEW_SHOT_TEMPLATE = """\
You are a financial analyst. Read the news and assess its impact on the company's stock.
Below are examples of news with their sentiment labels.

{{exemplars}}

{{context}}News:
{{article}}

Classify the sentiment of this news toward the company's stock.
Answer with a single word: Positive, Negative, or Neutral."""

COT_TEMPLATE = """\
You are a financial analyst. Read the news and reason step-by-step about its impact on the company's stock.

{{context}}News:
{{article}}

{{cue}}
Lay out your reasoning as numbered steps, then conclude with Positive, Negative, or Neutral.
Finish with one line of the form:
Final answer: <Positive|Negative|Neutral>"""

DK_COT_TEMPLATE = """\
You are a financial analyst. Read the news and reason step-by-step about its impact on the company's stock.

{{knowledge}}

{{context}}News:
{{article}}

{{cue}}
Lay out your reasoning as numbered steps, then conclude with Positive, Negative, or Neutral.
Finish with one line of the form:
Final answer: <Positive|Negative|Neutral>"""

AD_FCOT_TEMPLATE = """\
You are a financial analyst. Read the news and reason step-by-step about its impact on the company's stock, then output Positive/Negative/Neutral.
Here are two historical cases showing how similar news played out.

{{exemplars}}

{{context}}Now analyze the target news. Reason by analogy to the cases above, step by step, and conclude.

News:
{{article}}

Finish with one line of the form:
Final answer: <Positive|Negative|Neutral>"""

DEFAULT_TEMPLATES = {
    Strategy.ZERO_SHOT: ZERO_SHOT_TEMPLATE,
    Strategy.FEW_SHOT: FEW_SHOT_TEMPLATE,
    Strategy.COT: COT_TEMPLATE,
    Strategy.DK_COT: DK_COT_TEMPLATE,
    Strategy.AD_FCOT: AD_FCOT_TEMPLATE,
}

_PLACEHOLDER_RE = re.compile(r"\{\{(\w+)\}\}")


def render_template(template: str, mapping: dict[str, str]) -> str:
    def _sub(match: re.Match) -> str:
        name = match.group(1)
        if name not in mapping:
            raise ValidationError(f"template uses unknown placeholder {{{{{name}}}}}")
        return mapping[name]

    return _PLACEHOLDER_RE.sub(_sub, template)


def render_article(article: NewsArticle) -> str:
    day = article.timestamp.date().isoformat()
    head = f"[{article.ticker} | {day}] {article.headline}"
    if article.body:
        return f"{head}\n{article.body}"
    return head


def render_context(snippets: Sequence[RetrievedSnippet]) -> str:
    """Retrieval section; empty string when there is nothing to inject."""
    if not snippets:
        return ""
    lines = ["Related historical news:"]
    for snip in snippets:
        lines.append(f"- [{snip.timestamp.date().isoformat()}] {snip.text}")
    return "\n".join(lines) + "\n\n"


def render_exemplar(index: int, exemplar: Exemplar, with_rationale: bool) -> str:
    lines = [f"Example {index}:", f"News: {exemplar.excerpt}"]
    if with_rationale:
        lines.append("Reasoning:")
        for step_num, step in enumerate(exemplar.rationale, start=1):
            lines.append(f"{step_num}. {step}")
    lines.append(f"Sentiment: {exemplar.label.value}")
    return "\n".join(lines)


def render_knowledge(knowledge: KnowledgeBlock) -> str:
    lines = [f"Background for {knowledge.ticker}:"]
    for fact in knowledge.facts:
        lines.append(f"- {fact}")
    return "\n".join(lines)


def _require_placeholders(template: str, names: Sequence[str]) -> None:
    for name in names:
        if "{{" + name + "}}" not in template:
            raise ValidationError(f"template is missing the {{{{{name}}}}} placeholder")


def _bundle(
    strategy: Strategy,
    text: str,
    article: NewsArticle,
    budget: int,
    exemplar_ids: tuple[str, ...] = (),
    knowledge_used: bool = False,
    context: Sequence[RetrievedSnippet] = (),
) -> PromptBundle:
    estimate = estimate_tokens(text)
    if estimate >= budget:
        raise BudgetExceededError(estimate, budget)
    return PromptBundle(
        strategy=strategy,
        text=text,
        token_estimate=estimate,
        exemplar_ids=exemplar_ids,
        knowledge_used=knowledge_used,
        target_article_id=article.id,
        context_ids=tuple(snip.article_id for snip in context),
    )


def build_zero_shot(
    article: NewsArticle,
    instruction_template: Optional[str] = None,
    *,
    budget: int = DEFAULT_TOKEN_BUDGET,
    context: Sequence[RetrievedSnippet] = (),
) -> PromptBundle:
    """Instruction plus the target article, no exemplars, no reasoning cue."""
    template = instruction_template or ZERO_SHOT_TEMPLATE
    _require_placeholders(template, ["article"])
    text = render_template(
        template,
        {
            "article": render_article(article),
            "exemplars": "",
            "knowledge": "",
            "cue": "",
            "context": render_context(context),
        },
    )
    return _bundle(Strategy.ZERO_SHOT, text, article, budget, context=context)


def build_few_shot(
    article: NewsArticle,
    exemplars: Sequence[Exemplar],
    instruction_template: Optional[str] = None,
    *,
    budget: int = DEFAULT_TOKEN_BUDGET,
    context: Sequence[RetrievedSnippet] = (),
) -> PromptBundle:
    """Labeled example snippets (no rationale chains) before the target."""
    if not exemplars:
        raise ValidationError("few-shot prompt requires at least one exemplar")
    template = instruction_template or FEW_SHOT_TEMPLATE
    _require_placeholders(template, ["article", "exemplars"])
    rendered = "\n\n".join(
        render_exemplar(i, ex, with_rationale=False) for i, ex in enumerate(exemplars, start=1)
    )
    text = render_template(
        template,
        {
            "article": render_article(article),
            "exemplars": rendered,
            "knowledge": "",
            "cue": "",
            "context": render_context(context),
        },
    )
    return _bundle(
        Strategy.FEW_SHOT,
        text,
        article,
        budget,
        exemplar_ids=tuple(ex.source_article_id for ex in exemplars),
        context=context,
    )


def build_cot(
    article: NewsArticle,
    instruction_template: Optional[str] = None,
    *,
    budget: int = DEFAULT_TOKEN_BUDGET,
    context: Sequence[RetrievedSnippet] = (),
) -> PromptBundle:
    """Zero-shot structure plus the stepwise cue and a parseable answer line."""
    template = instruction_template or COT_TEMPLATE
    _require_placeholders(template, ["article", "cue"])
    text = render_template(
        template,
        {
            "article": render_article(article),
            "exemplars": "",
            "knowledge": "",
            "cue": COT_CUE,
            "context": render_context(context),
        },
    )
    return _bundle(Strategy.COT, text, article, budget, context=context)


def build_dk_cot(
    article: NewsArticle,
    knowledge: KnowledgeBlock,
    instruction_template: Optional[str] = None,
    *,
    budget: int = DEFAULT_TOKEN_BUDGET,
    context: Sequence[RetrievedSnippet] = (),
) -> PromptBundle:
    """CoT with a labeled background-facts section before the target."""
    if knowledge.ticker != article.ticker:
        raise ValidationError(
            f"knowledge block is for {knowledge.ticker} but article {article.id} is {article.ticker}"
        )
    template = instruction_template or DK_COT_TEMPLATE
    _require_placeholders(template, ["article", "cue", "knowledge"])
    text = render_template(
        template,
        {
            "article": render_article(article),
            "exemplars": "",
            "knowledge": render_knowledge(knowledge),
            "cue": COT_CUE,
            "context": render_context(context),
        },
    )
    return _bundle(Strategy.DK_COT, text, article, budget, knowledge_used=True, context=context)


def build_ad_fcot(
    article: NewsArticle,
    pool: Sequence[Exemplar],
    instruction_template: Optional[str] = None,
    *,
    budget: int = DEFAULT_TOKEN_BUDGET,
    context: Sequence[RetrievedSnippet] = (),
    class_order: Sequence[Sentiment] = (Sentiment.NEGATIVE, Sentiment.POSITIVE),
) -> PromptBundle:
    """Analogy-driven CoT: two class-balanced exemplars with causal chains.

    Sections in order: the analyst instruction, the Negative then Positive
    analogy (each excerpt -> numbered causal chain -> label), then the target
    with a cue to reason by analogy. ``class_order`` overrides the default
    Negative-first ordering.
    """
    selected = select_exemplars(pool, article, k=len(class_order), class_constraint=class_order)
    for ex in selected:
        if not ex.rationale:
            raise ValidationError(
                f"exemplar {ex.source_article_id} has no rationale chain; "
                "analogy prompts require one"
            )
    template = instruction_template or AD_FCOT_TEMPLATE
    _require_placeholders(template, ["article", "exemplars"])
    rendered = "\n\n".join(
        render_exemplar(i, ex, with_rationale=True) for i, ex in enumerate(selected, start=1)
    )
    text = render_template(
        template,
        {
            "article": render_article(article),
            "exemplars": rendered,
            "knowledge": "",
            "cue": COT_CUE,
            "context": render_context(context),
        },
    )
    return _bundle(
        Strategy.AD_FCOT,
        text,
        article,
        budget,
        exemplar_ids=tuple(ex.source_article_id for ex in selected),
        context=context,
    )


# --- selection and retrieval -------------------------------------------------


class ExemplarSelector:
    """TF-IDF ranking over a fixed exemplar pool; index built once."""

    def __init__(self, pool: Sequence[Exemplar]):
        if not pool:
            raise ValidationError("empty exemplar pool")
        self.pool = list(pool)
        self._index = TfidfIndex([ex.excerpt for ex in self.pool])

    def select(
        self,
        target: NewsArticle,
        k: int,
        class_constraint: Optional[Sequence[Sentiment]] = None,
    ) -> list[Exemplar]:
        if k < 1:
            raise ValidationError(f"k must be >= 1, got {k}")
        late = [ex.source_article_id for ex in self.pool if ex.timestamp >= target.timestamp]
        if late:
            raise TemporalViolationError(
                f"exemplar(s) {', '.join(sorted(late))} do not predate target {target.id}"
            )
        scores = self._index.similarities(target.text())
        ranked = sorted(
            range(len(self.pool)),
            key=lambda i: (-scores[i], self.pool[i].source_article_id),
        )
        if class_constraint is None:
            return [self.pool[i] for i in ranked[:k]]

        if k != len(class_constraint):
            raise ValidationError(
                f"k={k} does not match class constraint of length {len(class_constraint)}"
            )
        chosen: list[Exemplar] = []
        used: set[int] = set()
        for wanted in class_constraint:
            pick = next(
                (i for i in ranked if i not in used and self.pool[i].label is wanted), None
            )
            if pick is None:
                raise ValidationError(f"pool has no unused exemplar labeled {wanted.value}")
            used.add(pick)
            chosen.append(self.pool[pick])
        return chosen


def select_exemplars(
    pool: Sequence[Exemplar],
    target: NewsArticle,
    k: int,
    class_constraint: Optional[Sequence[Sentiment]] = None,
) -> list[Exemplar]:
    """Top-k pool exemplars by TF-IDF cosine against the target text.

    With a class constraint, returns the top-ranked exemplar of each required
    class in constraint order. Ties break by lexicographic source id. Every
    pool exemplar must strictly predate the target.
    """
    return ExemplarSelector(pool).select(target, k, class_constraint)


class ContextRetriever:
    """TF-IDF retrieval over a fixed history of articles; index built once."""

    def __init__(self, history: Sequence[NewsArticle], snippet_chars: int = DEFAULT_SNIPPET_CHARS):
        self.history = list(history)
        self.snippet_chars = snippet_chars
        self._index = TfidfIndex([art.text() for art in self.history])

    def retrieve(self, target: NewsArticle, k: int) -> list[RetrievedSnippet]:
        late = [art.id for art in self.history if art.timestamp >= target.timestamp]
        if late:
            raise TemporalViolationError(
                f"history article(s) {', '.join(sorted(late))} do not predate target {target.id}"
            )
        scores = self._index.similarities(target.text())
        ranked = sorted(
            range(len(self.history)),
            key=lambda i: (-scores[i], self.history[i].id),
        )
        picks = ranked[: min(k, len(self.history))]
        return [
            RetrievedSnippet(
                article_id=self.history[i].id,
                text=self.history[i].text()[: self.snippet_chars],
                timestamp=self.history[i].timestamp,
            )
            for i in picks
        ]


def retrieve_context(
    history: Sequence[NewsArticle],
    target: NewsArticle,
    k: int,
    snippet_chars: int = DEFAULT_SNIPPET_CHARS,
) -> list[RetrievedSnippet]:
    """Top-k historical articles by TF-IDF cosine, truncated to snippet length.

    k larger than the history simply returns all of it, ranked.
    """
    return ContextRetriever(history, snippet_chars).retrieve(target, k)


# --- data file loaders ---------------------------------------------------------


def load_exemplars(path: str | Path) -> list[Exemplar]:
    """Load the exemplar pool: JSONL of {source_article_id, excerpt, rationale, label, timestamp}."""
    path = Path(path)
    if not path.is_file():
        raise IngestError(f"exemplar pool file not readable: {path}")
    pool: list[Exemplar] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for line_num, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                exemplar = Exemplar.from_dict(json.loads(line))
            except (json.JSONDecodeError, KeyError, ValueError) as exc:
                raise IngestError(f"bad exemplar at {path}:{line_num}: {exc}") from exc
            if not exemplar.excerpt.strip():
                raise IngestError(f"bad exemplar at {path}:{line_num}: empty excerpt")
            if exemplar.source_article_id in seen:
                raise IngestError(
                    f"bad exemplar at {path}:{line_num}: duplicate source id {exemplar.source_article_id!r}"
                )
            seen.add(exemplar.source_article_id)
            pool.append(exemplar)
    if not pool:
        raise IngestError(f"exemplar pool {path} is empty")
    return pool


def load_knowledge(path: str | Path) -> dict[str, KnowledgeBlock]:
    """Load per-ticker background facts: JSONL of {ticker, facts}."""
    path = Path(path)
    if not path.is_file():
        raise IngestError(f"knowledge file not readable: {path}")
    blocks: dict[str, KnowledgeBlock] = {}
    with open(path, encoding="utf-8") as fh:
        for line_num, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                raw = json.loads(line)
                block = KnowledgeBlock(
                    ticker=str(raw["ticker"]),
                    facts=tuple(str(fact) for fact in raw.get("facts", [])),
                )
            except (json.JSONDecodeError, KeyError, ValidationError) as exc:
                raise IngestError(f"bad knowledge block at {path}:{line_num}: {exc}") from exc
            if block.ticker in blocks:
                raise IngestError(f"duplicate knowledge ticker {block.ticker!r} at {path}:{line_num}")
            blocks[block.ticker] = block
    return blocks
