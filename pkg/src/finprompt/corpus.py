"""News/price ingestion, direction labeling, and the leakage-proof temporal split.

Everything here is a pure function over immutable inputs. Malformed news rows
are collected into a rejection report instead of silently dropped; price rows
are held to a stricter standard because a bad bar corrupts ground truth.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from datetime import date, datetime, time, timedelta, timezone
from enum import Enum
from pathlib import Path
from typing import Iterable, Optional

from .errors import IngestError, ValidationError

NEWS_COLUMNS = ("id", "timestamp", "ticker", "headline", "body", "source")
PRICE_COLUMNS = ("ticker", "date", "open", "close")

#: Default minimum relative open->close move for a day to count as directional.
DEFAULT_TICK_THRESHOLD = 0.001

#: Nominal market close (UTC) used only when after-close shifting is enabled.
DEFAULT_CLOSE_UTC = time(21, 0)


def parse_timestamp(raw: str) -> datetime:
    """Parse an RFC-3339 timestamp; naive values are assumed UTC."""
    text = raw.strip()
    if text.endswith(("Z", "z")):
        text = text[:-1] + "+00:00"
    ts = datetime.fromisoformat(text)
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc)


def format_timestamp(ts: datetime) -> str:
    return ts.astimezone(timezone.utc).isoformat().replace("+00:00", "Z")


@dataclass(frozen=True)
class NewsArticle:
    id: str
    timestamp: datetime
    ticker: str
    headline: str
    body: str = ""
    source: str = ""

    def text(self) -> str:
        """Headline plus body, the unit of classification and retrieval."""
        if self.body:
            return f"{self.headline}\n{self.body}"
        return self.headline

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "timestamp": format_timestamp(self.timestamp),
            "ticker": self.ticker,
            "headline": self.headline,
            "body": self.body,
            "source": self.source,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "NewsArticle":
        return cls(
            id=str(raw["id"]),
            timestamp=parse_timestamp(str(raw["timestamp"])),
            ticker=str(raw["ticker"]),
            headline=str(raw["headline"]),
            body=str(raw.get("body") or ""),
            source=str(raw.get("source") or ""),
        )


@dataclass(frozen=True)
class PriceBar:
    ticker: str
    date: date
    open: float
    close: float


class DirectionLabel(str, Enum):
    UP = "Up"
    DOWN = "Down"
    FLAT = "Flat"


@dataclass(frozen=True)
class Rejection:
    row_number: int
    reason: str

    def to_dict(self) -> dict:
        return {"row_number": self.row_number, "reason": self.reason}


@dataclass(frozen=True)
class IngestResult:
    articles: list[NewsArticle]
    rejections: list[Rejection]


class PriceTable:
    """Exact-lookup table of daily bars keyed by (ticker, date)."""

    def __init__(self, bars: Iterable[PriceBar]):
        self._bars: dict[tuple[str, date], PriceBar] = {}
        for bar in bars:
            key = (bar.ticker, bar.date)
            if key in self._bars:
                raise IngestError(f"duplicate price bar for {bar.ticker} {bar.date}")
            if bar.open <= 0 or bar.close <= 0:
                raise IngestError(
                    f"non-positive price for {bar.ticker} {bar.date}: "
                    f"open={bar.open} close={bar.close}"
                )
            self._bars[key] = bar

    def get(self, ticker: str, day: date) -> Optional[PriceBar]:
        return self._bars.get((ticker, day))

    def __len__(self) -> int:
        return len(self._bars)

    def __iter__(self):
        return iter(self._bars.values())


@dataclass(frozen=True)
class LabeledArticle:
    """An article joined to its same-day price bar.

    Exactly one of four states: labeled Up, labeled Down, labeled Flat, or
    unlabeled (no matching bar). Only Up/Down items are evaluable.
    """

    article: NewsArticle
    direction: Optional[DirectionLabel]
    exclusion: Optional[str] = None  # None | "flat" | "unlabeled"

    @property
    def evaluable(self) -> bool:
        return self.exclusion is None

    def to_dict(self) -> dict:
        return {
            "article": self.article.to_dict(),
            "direction": self.direction.value if self.direction else None,
            "exclusion": self.exclusion,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "LabeledArticle":
        direction = DirectionLabel(raw["direction"]) if raw.get("direction") else None
        return cls(
            article=NewsArticle.from_dict(raw["article"]),
            direction=direction,
            exclusion=raw.get("exclusion"),
        )


@dataclass(frozen=True)
class SplitCorpus:
    dev: list[LabeledArticle]
    test: list[LabeledArticle]
    cutoff: datetime


def _article_from_row(raw: dict, now: datetime) -> NewsArticle:
    """Build one article from a raw row dict, raising ValueError on bad fields."""
    missing = [c for c in ("id", "timestamp", "ticker", "headline") if not (raw.get(c) or "").strip()]
    if missing:
        raise ValueError(f"missing required field(s): {', '.join(missing)}")
    try:
        ts = parse_timestamp(raw["timestamp"])
    except (ValueError, TypeError) as exc:
        raise ValueError(f"unparseable timestamp {raw['timestamp']!r}: {exc}") from exc
    if ts > now:
        raise ValueError(f"timestamp {format_timestamp(ts)} is in the future")
    return NewsArticle(
        id=raw["id"].strip(),
        timestamp=ts,
        ticker=raw["ticker"].strip(),
        headline=raw["headline"].strip(),
        body=(raw.get("body") or "").strip(),
        source=(raw.get("source") or "").strip(),
    )


def _iter_csv_rows(path: Path, column_map: dict[str, str]):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            return
        for row in reader:
            raw = {canon: row.get(column_map.get(canon, canon)) for canon in NEWS_COLUMNS}
            yield reader.line_num, raw


def _iter_jsonl_rows(path: Path, column_map: dict[str, str]):
    with open(path, encoding="utf-8") as fh:
        for line_num, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                yield line_num, ValueError(f"invalid JSON: {exc}")
                continue
            if not isinstance(obj, dict):
                yield line_num, ValueError("line is not a JSON object")
                continue
            raw = {}
            for canon in NEWS_COLUMNS:
                value = obj.get(column_map.get(canon, canon))
                raw[canon] = value if value is None else str(value)
            yield line_num, raw


def load_news(
    path: str | Path,
    format: str = "csv",
    column_map: Optional[dict[str, str]] = None,
    now: Optional[datetime] = None,
) -> IngestResult:
    """Load news articles from CSV or JSONL.

    Rows violating article invariants (missing fields, bad timestamps, future
    timestamps, duplicate ids) become rejection entries; the load only fails
    outright when the file is unreadable, the format is unknown, or no row
    survives. ``column_map`` maps canonical field names to source headers for
    datasets whose schemas differ from the documented one.
    """
    path = Path(path)
    if format not in ("csv", "jsonl"):
        raise IngestError(f"unknown news format {format!r} (expected 'csv' or 'jsonl')")
    if not path.is_file():
        raise IngestError(f"news file not readable: {path}")
    now = now or datetime.now(timezone.utc)
    column_map = column_map or {}

    rows = _iter_csv_rows(path, column_map) if format == "csv" else _iter_jsonl_rows(path, column_map)
    articles: list[NewsArticle] = []
    rejections: list[Rejection] = []
    seen_ids: set[str] = set()
    for row_number, raw in rows:
        if isinstance(raw, Exception):
            rejections.append(Rejection(row_number, str(raw)))
            continue
        try:
            article = _article_from_row(raw, now)
        except ValueError as exc:
            rejections.append(Rejection(row_number, str(exc)))
            continue
        if article.id in seen_ids:
            rejections.append(Rejection(row_number, f"duplicate id {article.id!r}"))
            continue
        seen_ids.add(article.id)
        articles.append(article)

    if not articles:
        raise IngestError(f"zero valid rows in {path} ({len(rejections)} rejected)")
    return IngestResult(articles=articles, rejections=rejections)


def load_prices(path: str | Path) -> PriceTable:
    """Load the daily price table. Any malformed row is an error, not a flag."""
    path = Path(path)
    if not path.is_file():
        raise IngestError(f"price file not readable: {path}")
    bars: list[PriceBar] = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in PRICE_COLUMNS if c not in header]
        if missing:
            raise IngestError(f"price file missing column(s): {', '.join(missing)}")
        for row in reader:
            try:
                bar = PriceBar(
                    ticker=row["ticker"].strip(),
                    date=date.fromisoformat(row["date"].strip()),
                    open=float(row["open"]),
                    close=float(row["close"]),
                )
            except (ValueError, AttributeError, TypeError) as exc:
                raise IngestError(f"bad price row {reader.line_num}: {exc}") from exc
            bars.append(bar)
    return PriceTable(bars)


def derive_direction(bar: PriceBar, threshold: float) -> DirectionLabel:
    """Same-day direction from the open->close relative return.

    Up when close/open - 1 >= threshold, Down when <= -threshold, Flat
    otherwise. Flat days are retained but excluded from evaluation.
    """
    if threshold < 0:
        raise ValidationError(f"threshold must be >= 0, got {threshold}")
    if bar.open <= 0 or bar.close <= 0:
        raise ValidationError(f"price bar violates positivity: {bar}")
    move = bar.close / bar.open - 1.0
    if move >= threshold:
        return DirectionLabel.UP
    if move <= -threshold:
        return DirectionLabel.DOWN
    return DirectionLabel.FLAT


def trading_day(
    ts: datetime,
    shift_after_close: bool = False,
    close_utc: time = DEFAULT_CLOSE_UTC,
) -> date:
    """Calendar date a timestamp joins to.

    Same-day by default; with ``shift_after_close`` articles published at or
    after the nominal close roll to the next calendar day.
    """
    ts = ts.astimezone(timezone.utc)
    day = ts.date()
    if shift_after_close and ts.time() >= close_utc:
        day = day + timedelta(days=1)
    return day


def attach_labels(
    articles: Iterable[NewsArticle],
    prices: PriceTable,
    threshold: float = DEFAULT_TICK_THRESHOLD,
    shift_after_close: bool = False,
    close_utc: time = DEFAULT_CLOSE_UTC,
) -> list[LabeledArticle]:
    """Join each article to its ticker's bar on the article's trading day.

    Articles with no matching bar are flagged unlabeled; sub-threshold moves
    are labeled Flat. Both are retained but excluded from evaluation.
    """
    labeled: list[LabeledArticle] = []
    for article in articles:
        day = trading_day(article.timestamp, shift_after_close, close_utc)
        bar = prices.get(article.ticker, day)
        if bar is None:
            labeled.append(LabeledArticle(article, direction=None, exclusion="unlabeled"))
            continue
        direction = derive_direction(bar, threshold)
        exclusion = "flat" if direction is DirectionLabel.FLAT else None
        labeled.append(LabeledArticle(article, direction=direction, exclusion=exclusion))
    return labeled


def temporal_split(labeled: Iterable[LabeledArticle], cutoff: datetime) -> SplitCorpus:
    """Split into dev (strictly before cutoff) and test (at or after cutoff).

    Ties go to test, the conservative side for leakage. Either side empty
    means the experiment cannot run.
    """
    if cutoff.tzinfo is None:
        raise ValidationError("cutoff must be timezone-aware")
    cutoff = cutoff.astimezone(timezone.utc)
    dev: list[LabeledArticle] = []
    test: list[LabeledArticle] = []
    for item in labeled:
        if item.article.timestamp < cutoff:
            dev.append(item)
        else:
            test.append(item)
    if not test:
        raise ValidationError(f"empty test side: no articles at or after cutoff {format_timestamp(cutoff)}")
    if not dev:
        raise ValidationError(f"empty dev side: no articles before cutoff {format_timestamp(cutoff)}")
    return SplitCorpus(dev=dev, test=test, cutoff=cutoff)


def write_rejections(rejections: Iterable[Rejection], path: str | Path) -> None:
    """Write the sidecar rejection report as JSONL of {row_number, reason}."""
    with open(path, "w", encoding="utf-8") as fh:
        for rej in rejections:
            fh.write(json.dumps(rej.to_dict(), ensure_ascii=False) + "\n")
