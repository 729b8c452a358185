"""Scoring against direction labels, classification metrics, and a plug-in
mutual-information estimator over the empirical joint distribution.

A "positive" instance is an upward same-day move. Flat days never reach
score(): they are discarded from evaluation upstream. Degenerate precision
and recall are reported as undefined (None), not silently zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Hashable, Mapping, Optional, Sequence

from .corpus import DirectionLabel
from .errors import ValidationError
from .prompts import Sentiment
from .verdict import ParseMethod, PredictionRecord

SCORING_MODES = ("neutral-as-negative-signal", "neutral-excluded")


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    def to_dict(self) -> dict:
        return {"tp": self.tp, "fp": self.fp, "tn": self.tn, "fn": self.fn}


@dataclass(frozen=True)
class ScoreResult:
    """Confusion counts plus the exclusion tallies that explain them.

    excluded_unparseable counts predictions that never parsed (they are
    scored as Neutral in the default mode, dropped in neutral-excluded
    mode); excluded_neutral counts predictions dropped by neutral-excluded
    mode. Scored + dropped always equals the number of predictions.
    """

    counts: ConfusionCounts
    excluded_neutral: int = 0
    excluded_unparseable: int = 0


def score(
    predictions: Sequence[PredictionRecord],
    labels: Mapping[str, DirectionLabel],
    scoring_mode: str = "neutral-as-negative-signal",
) -> ScoreResult:
    """Fill the confusion matrix: Positive-vs-Up is a true positive,
    Negative-vs-Down a true negative, and so on.

    ``neutral-as-negative-signal`` (default) treats Neutral predictions as
    no-trade signals, i.e. predicted-Negative; ``neutral-excluded`` drops
    them from the matrix. Unparseable predictions count as Neutral either
    way, tallied separately so their effect is auditable.
    """
    if scoring_mode not in SCORING_MODES:
        raise ValidationError(f"unknown scoring mode {scoring_mode!r} (expected one of {SCORING_MODES})")
    tp = fp = tn = fn = 0
    excluded_neutral = 0
    excluded_unparseable = 0
    for pred in predictions:
        label = labels.get(pred.article_id)
        if label is None:
            raise ValidationError(f"prediction for unknown article {pred.article_id!r}")
        if label is DirectionLabel.FLAT:
            raise ValidationError(
                f"article {pred.article_id} is labeled Flat; flat items must be excluded before scoring"
            )
        if pred.parse_method is ParseMethod.UNPARSEABLE:
            excluded_unparseable += 1
            effective = Sentiment.NEUTRAL
        else:
            effective = pred.sentiment
        if effective is Sentiment.NEUTRAL:
            if scoring_mode == "neutral-excluded":
                excluded_neutral += 1
                continue
            effective = Sentiment.NEGATIVE
        if effective is Sentiment.POSITIVE:
            if label is DirectionLabel.UP:
                tp += 1
            else:
                fp += 1
        else:
            if label is DirectionLabel.DOWN:
                tn += 1
            else:
                fn += 1
    return ScoreResult(
        counts=ConfusionCounts(tp=tp, fp=fp, tn=tn, fn=fn),
        excluded_neutral=excluded_neutral,
        excluded_unparseable=excluded_unparseable,
    )


@dataclass(frozen=True)
class MetricsFragment:
    """Accuracy/precision/recall; None marks an undefined ratio (0/0)."""

    accuracy: float
    precision: Optional[float]
    recall: Optional[float]

    def to_dict(self) -> dict:
        return {"accuracy": self.accuracy, "precision": self.precision, "recall": self.recall}


def metrics(counts: ConfusionCounts) -> MetricsFragment:
    total = counts.total
    if total == 0:
        raise ValidationError("cannot compute metrics over zero scored items")
    precision = counts.tp / (counts.tp + counts.fp) if counts.tp + counts.fp > 0 else None
    recall = counts.tp / (counts.tp + counts.fn) if counts.tp + counts.fn > 0 else None
    return MetricsFragment(
        accuracy=(counts.tp + counts.tn) / total,
        precision=precision,
        recall=recall,
    )


@dataclass(frozen=True)
class MetricsReport:
    """Full per-strategy evaluation record: headline metrics, the counts they
    derive from, exclusion tallies, and the information-theoretic extras."""

    accuracy: float
    precision: Optional[float]
    recall: Optional[float]
    counts: ConfusionCounts
    excluded_flat: int
    excluded_unparseable: int
    mutual_information_bits: Optional[float]
    excluded_unlabeled: int = 0
    excluded_neutral: int = 0
    outcome_entropy: Optional[float] = None
    conditional_entropy: Optional[float] = None

    def __post_init__(self):
        recomputed = metrics(self.counts)
        if (recomputed.accuracy, recomputed.precision, recomputed.recall) != (
            self.accuracy, self.precision, self.recall,
        ):
            raise ValidationError("metrics are not recomputable from the confusion counts")

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "precision": self.precision,
            "recall": self.recall,
            "counts": self.counts.to_dict(),
            "scored": self.counts.total,
            "excluded_flat": self.excluded_flat,
            "excluded_unlabeled": self.excluded_unlabeled,
            "excluded_neutral": self.excluded_neutral,
            "excluded_unparseable": self.excluded_unparseable,
            "mutual_information_bits": self.mutual_information_bits,
            "outcome_entropy": self.outcome_entropy,
            "conditional_entropy": self.conditional_entropy,
        }


def build_metrics_report(
    result: ScoreResult,
    excluded_flat: int,
    excluded_unlabeled: int = 0,
    mi: Optional["MutualInformation"] = None,
) -> MetricsReport:
    fragment = metrics(result.counts)
    return MetricsReport(
        accuracy=fragment.accuracy,
        precision=fragment.precision,
        recall=fragment.recall,
        counts=result.counts,
        excluded_flat=excluded_flat,
        excluded_unlabeled=excluded_unlabeled,
        excluded_neutral=result.excluded_neutral,
        excluded_unparseable=result.excluded_unparseable,
        mutual_information_bits=mi.bits if mi else None,
        outcome_entropy=mi.outcome_entropy if mi else None,
        conditional_entropy=mi.conditional_entropy if mi else None,
    )


# --- information-theoretic estimators ---------------------------------------


def entropy(values: Sequence[Hashable]) -> float:
    """Shannon entropy (bits) of the empirical distribution."""
    if not values:
        raise ValidationError("entropy of an empty sample is undefined")
    counts: dict[Hashable, int] = {}
    for value in values:
        counts[value] = counts.get(value, 0) + 1
    n = len(values)
    return -sum((c / n) * math.log2(c / n) for c in counts.values())


@dataclass(frozen=True)
class MutualInformation:
    """Plug-in estimate in bits, with the entropies behind the identity
    I(X;Y) = H(Y) - H(Y|X)."""

    bits: float
    outcome_entropy: float
    conditional_entropy: float


def mutual_information(
    signal: Sequence[Hashable], outcome: Sequence[Hashable]
) -> MutualInformation:
    """I(X;Y) = sum p(x,y) log2[p(x,y) / (p(x) p(y))] with 0 log 0 = 0.

    Maximum-likelihood (plug-in) estimator on the empirical joint; no bias
    correction. Tiny negative rounding residue is clamped to zero so the
    estimate respects I >= 0.
    """
    if len(signal) != len(outcome):
        raise ValidationError(
            f"signal and outcome lengths differ: {len(signal)} vs {len(outcome)}"
        )
    if not signal:
        raise ValidationError("mutual information of empty inputs is undefined")
    n = len(signal)
    joint: dict[tuple[Hashable, Hashable], int] = {}
    sig_counts: dict[Hashable, int] = {}
    out_counts: dict[Hashable, int] = {}
    for x, y in zip(signal, outcome):
        joint[(x, y)] = joint.get((x, y), 0) + 1
        sig_counts[x] = sig_counts.get(x, 0) + 1
        out_counts[y] = out_counts.get(y, 0) + 1

    bits = 0.0
    for (x, y), c_xy in joint.items():
        p_xy = c_xy / n
        p_x = sig_counts[x] / n
        p_y = out_counts[y] / n
        bits += p_xy * math.log2(p_xy / (p_x * p_y))
    if -1e-12 < bits < 0.0:
        bits = 0.0

    h_outcome = -sum((c / n) * math.log2(c / n) for c in out_counts.values())
    h_joint = -sum((c / n) * math.log2(c / n) for c in joint.values())
    h_signal = -sum((c / n) * math.log2(c / n) for c in sig_counts.values())
    h_conditional = h_joint - h_signal
    return MutualInformation(
        bits=bits,
        outcome_entropy=h_outcome,
        conditional_entropy=h_conditional,
    )


def mi_pairs(
    predictions: Sequence[PredictionRecord],
    labels: Mapping[str, DirectionLabel],
    scoring_mode: str = "neutral-as-negative-signal",
) -> tuple[list[str], list[str]]:
    """(signal, outcome) pairs for the mutual-information estimate.

    Mirrors score()'s item selection: unparseable predictions enter as
    Neutral, and neutral-excluded mode drops Neutral signals. The signal
    keeps its three-way value (no Neutral->Negative folding) so the
    estimate reflects the raw sentiment channel.
    """
    if scoring_mode not in SCORING_MODES:
        raise ValidationError(f"unknown scoring mode {scoring_mode!r} (expected one of {SCORING_MODES})")
    signals: list[str] = []
    outcomes: list[str] = []
    for pred in predictions:
        label = labels.get(pred.article_id)
        if label is None:
            raise ValidationError(f"prediction for unknown article {pred.article_id!r}")
        if pred.parse_method is ParseMethod.UNPARSEABLE:
            effective = Sentiment.NEUTRAL
        else:
            effective = pred.sentiment
        if effective is Sentiment.NEUTRAL and scoring_mode == "neutral-excluded":
            continue
        signals.append(effective.value)
        outcomes.append(label.value)
    return signals, outcomes
