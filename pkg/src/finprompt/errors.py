"""Exception hierarchy shared across the harness.

The CLI maps these onto exit codes: validation problems exit 1,
provider/runtime problems exit 2, leakage-audit failures exit 3.
"""


class FinpromptError(Exception):
    """Base class for all harness errors."""


class ValidationError(FinpromptError):
    """Bad input: malformed config, unreadable data, violated precondition."""


class IngestError(ValidationError):
    """Data file cannot be loaded (unreadable, unknown format, zero valid rows)."""


class BudgetExceededError(ValidationError):
    """A rendered prompt's token estimate reached the configured budget."""

    def __init__(self, estimate: int, budget: int):
        super().__init__(f"prompt estimate {estimate} tokens >= budget {budget}")
        self.estimate = estimate
        self.budget = budget


class TemporalViolationError(ValidationError):
    """An exemplar or history item does not strictly predate its target."""


class ProviderError(FinpromptError):
    """Completion provider failure: auth, exhausted retries, malformed response."""


class OfflineViolationError(ProviderError):
    """A network call was attempted while running in offline mode."""
