"""Benchmark harness for financial-news sentiment prompting strategies.

Builds prompts under five strategies (plus self-consistency sampling and
retrieval augmentation), runs them against any completion endpoint through
a caching gateway, and scores predictions against same-day price direction
under a strict no-look-ahead temporal protocol.
"""

from .corpus import (
    DirectionLabel,
    LabeledArticle,
    NewsArticle,
    PriceBar,
    PriceTable,
    SplitCorpus,
    attach_labels,
    derive_direction,
    load_news,
    load_prices,
    temporal_split,
)
from .errors import (
    BudgetExceededError,
    FinpromptError,
    IngestError,
    ProviderError,
    TemporalViolationError,
    ValidationError,
)
from .evalkit import (
    ConfusionCounts,
    MetricsFragment,
    MetricsReport,
    MutualInformation,
    build_metrics_report,
    entropy,
    metrics,
    mi_pairs,
    mutual_information,
    score,
)
from .gateway import CompletionCache, Gateway, GenerationParams, HttpProvider, StubProvider
from .harness import (
    AuditReport,
    ExperimentConfig,
    RunManifest,
    audit_leakage,
    load_config,
    report,
    run,
)
from .prompts import (
    Exemplar,
    KnowledgeBlock,
    PromptBundle,
    Sentiment,
    Strategy,
    build_ad_fcot,
    build_cot,
    build_dk_cot,
    build_few_shot,
    build_zero_shot,
    estimate_tokens,
    retrieve_context,
    select_exemplars,
)
from .verdict import ParseMethod, PredictionRecord, parse_sentiment, self_consistency_vote

__version__ = "0.1.0"
