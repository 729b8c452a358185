"""Extract sentiment and rationale from free-text completions; aggregate votes.

Parsing is a rule cascade: an explicit "Final answer:" marker wins, then the
last standalone sentiment word, else the completion is Unparseable (a value,
not an error — scoring decides how to treat it).
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Optional, Sequence

from .errors import ValidationError
from .prompts import Sentiment, Strategy

_FINAL_ANSWER_RE = re.compile(r"final answer:\s*(positive|negative|neutral)\b", re.IGNORECASE)
_KEYWORD_RE = re.compile(r"\b(positive|negative|neutral)\b", re.IGNORECASE)


class ParseMethod(str, Enum):
    FINAL_ANSWER_LINE = "FinalAnswerLine"
    LAST_KEYWORD = "LastKeyword"
    UNPARSEABLE = "Unparseable"


@dataclass(frozen=True)
class ParsedCompletion:
    sentiment: Optional[Sentiment]
    rationale: str
    method: ParseMethod


def parse_sentiment(completion: str) -> ParsedCompletion:
    """Pull (sentiment, rationale) out of a completion.

    The last "Final answer: <label>" marker wins; failing that, the last
    standalone Positive/Negative/Neutral word. The rationale is everything
    before the matched region, so it never contains the label line itself.
    """
    matches = list(_FINAL_ANSWER_RE.finditer(completion))
    if matches:
        match = matches[-1]
        return ParsedCompletion(
            sentiment=Sentiment(match.group(1).capitalize()),
            rationale=completion[: match.start()].strip(),
            method=ParseMethod.FINAL_ANSWER_LINE,
        )
    matches = list(_KEYWORD_RE.finditer(completion))
    if matches:
        match = matches[-1]
        return ParsedCompletion(
            sentiment=Sentiment(match.group(1).capitalize()),
            rationale=completion[: match.start()].strip(),
            method=ParseMethod.LAST_KEYWORD,
        )
    return ParsedCompletion(sentiment=None, rationale="", method=ParseMethod.UNPARSEABLE)


def self_consistency_vote(samples: Sequence[Sentiment]) -> Sentiment:
    """Plurality label across samples; any tie resolves to Neutral.

    A split opinion should not generate a directional trading signal, hence
    the conservative tie rule. Unparseable samples must be removed upstream.
    """
    if not samples:
        raise ValidationError("self-consistency vote needs at least one sample")
    counts: dict[Sentiment, int] = {}
    for sample in samples:
        counts[sample] = counts.get(sample, 0) + 1
    best = max(counts.values())
    winners = [label for label, count in counts.items() if count == best]
    if len(winners) == 1:
        return winners[0]
    return Sentiment.NEUTRAL


@dataclass(frozen=True)
class PredictionRecord:
    """One scored-ready prediction: parsed sentiment plus full provenance."""

    article_id: str
    strategy: Strategy
    sentiment: Optional[Sentiment]
    rationale: str
    raw_completion: str
    parse_method: ParseMethod
    samples_used: int = 1

    def __post_init__(self):
        defined = self.sentiment is not None
        if defined == (self.parse_method is ParseMethod.UNPARSEABLE):
            raise ValidationError(
                "sentiment must be defined exactly when the completion parsed "
                f"(article {self.article_id}: sentiment={self.sentiment}, "
                f"method={self.parse_method.value})"
            )
        if self.samples_used < 1:
            raise ValidationError(f"samples_used must be >= 1, got {self.samples_used}")

    def to_dict(self) -> dict:
        return {
            "article_id": self.article_id,
            "strategy": self.strategy.value,
            "sentiment": self.sentiment.value if self.sentiment else None,
            "rationale": self.rationale,
            "raw_completion": self.raw_completion,
            "parse_method": self.parse_method.value,
            "samples_used": self.samples_used,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "PredictionRecord":
        sentiment = Sentiment(raw["sentiment"]) if raw.get("sentiment") else None
        return cls(
            article_id=raw["article_id"],
            strategy=Strategy(raw["strategy"]),
            sentiment=sentiment,
            rationale=raw.get("rationale", ""),
            raw_completion=raw.get("raw_completion", ""),
            parse_method=ParseMethod(raw["parse_method"]),
            samples_used=int(raw.get("samples_used", 1)),
        )


def aggregate_samples(
    article_id: str,
    strategy: Strategy,
    completions: Sequence[str],
) -> PredictionRecord:
    """Parse every sample, drop unparseables, and vote.

    With a single sample this is plain parsing. The stored rationale comes
    from the first sample that agrees with the final verdict (falling back
    to the first parseable sample) so the record stays auditable.
    """
    if not completions:
        raise ValidationError(f"no completions to aggregate for article {article_id}")
    parsed = [parse_sentiment(text) for text in completions]
    votes = [p.sentiment for p in parsed if p.sentiment is not None]
    if not votes:
        return PredictionRecord(
            article_id=article_id,
            strategy=strategy,
            sentiment=None,
            rationale="",
            raw_completion=completions[0],
            parse_method=ParseMethod.UNPARSEABLE,
            samples_used=len(completions),
        )
    verdict = self_consistency_vote(votes)
    representative = next(
        (i for i, p in enumerate(parsed) if p.sentiment is verdict),
        next(i for i, p in enumerate(parsed) if p.sentiment is not None),
    )
    return PredictionRecord(
        article_id=article_id,
        strategy=strategy,
        sentiment=verdict,
        rationale=parsed[representative].rationale,
        raw_completion=completions[representative],
        parse_method=parsed[representative].method,
        samples_used=len(completions),
    )


def write_predictions(records: Sequence[PredictionRecord], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record.to_dict(), ensure_ascii=False) + "\n")


def read_predictions(path: str | Path) -> list[PredictionRecord]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                records.append(PredictionRecord.from_dict(json.loads(line)))
    return records
