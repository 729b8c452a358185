"""Uniform completion client: providers, deterministic cache, retry.

The cache key is a SHA-256 over the canonical serialization of
(provider, model, params, prompt, sample_index), so a warm cache answers
repeat requests without any network traffic and self-consistency samples
stay distinct. The journal is append-only JSONL; on load, the last write
for a key wins.
"""

from __future__ import annotations

import json
import threading
import time as _time
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Optional, Protocol, Sequence

import httpx

from .canon import canonical_json, sha256_hex
from .corpus import format_timestamp, parse_timestamp
from .errors import IngestError, ProviderError

RETRY_BASE_SECONDS = 1.0
RETRY_FACTOR = 2.0
MAX_ATTEMPTS = 5


@dataclass(frozen=True)
class GenerationParams:
    model_name: str
    temperature: float = 0.0
    max_tokens: int = 256
    top_p: Optional[float] = None
    seed: Optional[int] = None

    def __post_init__(self):
        if self.temperature < 0:
            raise ProviderError(f"temperature must be >= 0, got {self.temperature}")
        if self.max_tokens < 1:
            raise ProviderError(f"max_tokens must be positive, got {self.max_tokens}")
        if self.top_p is not None and not (0.0 < self.top_p <= 1.0):
            raise ProviderError(f"top_p must be in (0, 1], got {self.top_p}")

    def to_dict(self) -> dict:
        return {
            "model_name": self.model_name,
            "temperature": self.temperature,
            "max_tokens": self.max_tokens,
            "top_p": self.top_p,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "GenerationParams":
        return cls(
            model_name=raw["model_name"],
            temperature=float(raw.get("temperature", 0.0)),
            max_tokens=int(raw.get("max_tokens", 256)),
            top_p=raw.get("top_p"),
            seed=raw.get("seed"),
        )


@dataclass(frozen=True)
class CompletionRecord:
    cache_key: str
    prompt_digest: str
    params: GenerationParams
    completion_text: str
    provider: str
    latency_ms: int
    created_at: datetime
    sample_index: int = 0

    def to_dict(self) -> dict:
        return {
            "cache_key": self.cache_key,
            "prompt_digest": self.prompt_digest,
            "params": self.params.to_dict(),
            "completion_text": self.completion_text,
            "provider": self.provider,
            "latency_ms": self.latency_ms,
            "created_at": format_timestamp(self.created_at),
            "sample_index": self.sample_index,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "CompletionRecord":
        return cls(
            cache_key=raw["cache_key"],
            prompt_digest=raw["prompt_digest"],
            params=GenerationParams.from_dict(raw["params"]),
            completion_text=raw["completion_text"],
            provider=raw["provider"],
            latency_ms=int(raw["latency_ms"]),
            created_at=parse_timestamp(raw["created_at"]),
            sample_index=int(raw.get("sample_index", 0)),
        )


def compute_cache_key(
    provider: str, params: GenerationParams, prompt: str, sample_index: int
) -> str:
    payload = {
        "provider": provider,
        "model_name": params.model_name,
        "temperature": params.temperature,
        "max_tokens": params.max_tokens,
        "top_p": params.top_p,
        "seed": params.seed,
        "prompt": prompt,
        "sample_index": sample_index,
    }
    return sha256_hex(canonical_json(payload))


class TransientProviderError(ProviderError):
    """Retryable failure: rate limit, 5xx, network hiccup, timeout."""


class AuthenticationError(ProviderError):
    """Non-retryable: the provider rejected our credentials."""


class Provider(Protocol):
    name: str

    def complete(self, prompt: str, params: GenerationParams) -> str: ...


class StubProvider:
    """Deterministic offline provider driven by an ordered substring rulebook.

    The first rule whose pattern occurs in the prompt wins; prompts matching
    no rule get the fallback completion. Makes zero network calls.
    """

    name = "stub"

    def __init__(self, rules: Sequence[tuple[str, str]], fallback: str):
        if not rules:
            raise IngestError("stub rulebook must contain at least one rule")
        if not fallback:
            raise IngestError("stub rulebook must include a fallback completion")
        self.rules = list(rules)
        self.fallback = fallback

    @classmethod
    def from_file(cls, path: str | Path) -> "StubProvider":
        path = Path(path)
        if not path.is_file():
            raise IngestError(f"rulebook file not readable: {path}")
        with open(path, encoding="utf-8") as fh:
            try:
                raw = json.load(fh)
            except json.JSONDecodeError as exc:
                raise IngestError(f"rulebook {path} is not valid JSON: {exc}") from exc
        try:
            rules = [(rule["pattern"], rule["completion"]) for rule in raw["rules"]]
            fallback = raw["fallback"]
        except (KeyError, TypeError) as exc:
            raise IngestError(f"rulebook {path} missing required structure: {exc}") from exc
        return cls(rules, fallback)

    def complete(self, prompt: str, params: GenerationParams) -> str:
        for pattern, completion in self.rules:
            if pattern in prompt:
                return completion
        return self.fallback


class HttpProvider:
    """OpenAI-compatible chat-completions client over HTTPS."""

    def __init__(
        self,
        base_url: str,
        api_key: str = "",
        timeout_ms: int = 30000,
        transport: Optional[httpx.BaseTransport] = None,
    ):
        self.base_url = base_url.rstrip("/")
        self.name = f"http:{self.base_url}"
        headers = {"Content-Type": "application/json"}
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        self._client = httpx.Client(
            headers=headers, timeout=timeout_ms / 1000.0, transport=transport
        )

    def complete(self, prompt: str, params: GenerationParams) -> str:
        body = {
            "model": params.model_name,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": params.temperature,
            "max_tokens": params.max_tokens,
        }
        if params.top_p is not None:
            body["top_p"] = params.top_p
        if params.seed is not None:
            body["seed"] = params.seed
        try:
            response = self._client.post(f"{self.base_url}/chat/completions", json=body)
        except httpx.TransportError as exc:
            raise TransientProviderError(f"network failure: {exc}") from exc
        if response.status_code in (401, 403):
            raise AuthenticationError(f"provider rejected credentials (HTTP {response.status_code})")
        if response.status_code == 429 or response.status_code >= 500:
            raise TransientProviderError(f"provider returned HTTP {response.status_code}")
        if response.status_code != 200:
            raise ProviderError(f"provider returned HTTP {response.status_code}: {response.text[:200]}")
        try:
            payload = response.json()
            text = payload["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise ProviderError(f"malformed provider response: {exc}") from exc
        if not isinstance(text, str):
            raise ProviderError("malformed provider response: completion is not text")
        return text

    def close(self) -> None:
        self._client.close()


class CompletionCache:
    """In-memory index over an append-only JSONL journal."""

    def __init__(self, journal_path: Optional[str | Path] = None):
        self.journal_path = Path(journal_path) if journal_path else None
        self._records: dict[str, CompletionRecord] = {}
        self._lock = threading.Lock()
        if self.journal_path and self.journal_path.is_file():
            with open(self.journal_path, encoding="utf-8") as fh:
                for line in fh:
                    if not line.strip():
                        continue
                    record = CompletionRecord.from_dict(json.loads(line))
                    self._records[record.cache_key] = record

    def get(self, key: str) -> Optional[CompletionRecord]:
        with self._lock:
            return self._records.get(key)

    def put(self, record: CompletionRecord) -> None:
        with self._lock:
            self._records[record.cache_key] = record
            if self.journal_path:
                self.journal_path.parent.mkdir(parents=True, exist_ok=True)
                with open(self.journal_path, "a", encoding="utf-8") as fh:
                    fh.write(json.dumps(record.to_dict(), ensure_ascii=False) + "\n")

    def __len__(self) -> int:
        with self._lock:
            return len(self._records)


class Gateway:
    """complete() with read-through caching and exponential-backoff retry.

    Safe for concurrent callers: the journal is written under a lock, and a
    per-key lock guarantees at most one provider charge per unique
    (prompt, params, sample_index).
    """

    def __init__(
        self,
        provider: Provider,
        cache: Optional[CompletionCache] = None,
        max_in_flight: int = 4,
        sleep: Callable[[float], None] = _time.sleep,
    ):
        self.provider = provider
        self.cache = cache if cache is not None else CompletionCache()
        self._sleep = sleep
        self._in_flight = threading.Semaphore(max_in_flight)
        self._stats_lock = threading.Lock()
        self._key_locks: dict[str, threading.Lock] = {}
        self.provider_calls = 0
        self.cache_hits = 0

    def _key_lock(self, key: str) -> threading.Lock:
        with self._stats_lock:
            lock = self._key_locks.get(key)
            if lock is None:
                lock = self._key_locks.setdefault(key, threading.Lock())
            return lock

    def _call_with_retry(self, prompt: str, params: GenerationParams) -> tuple[str, int]:
        delay = RETRY_BASE_SECONDS
        last_error: Optional[Exception] = None
        for attempt in range(MAX_ATTEMPTS):
            if attempt > 0:
                self._sleep(delay)
                delay *= RETRY_FACTOR
            started = _time.perf_counter()
            try:
                with self._in_flight:
                    text = self.provider.complete(prompt, params)
                latency_ms = int((_time.perf_counter() - started) * 1000)
                return text, latency_ms
            except TransientProviderError as exc:
                last_error = exc
        raise ProviderError(f"exhausted {MAX_ATTEMPTS} attempts: {last_error}")

    def complete(self, prompt: str, params: GenerationParams, sample_index: int = 0) -> str:
        if sample_index < 0:
            raise ProviderError(f"sample_index must be >= 0, got {sample_index}")
        key = compute_cache_key(self.provider.name, params, prompt, sample_index)
        cached = self.cache.get(key)
        if cached is not None:
            with self._stats_lock:
                self.cache_hits += 1
            return cached.completion_text

        with self._key_lock(key):
            cached = self.cache.get(key)
            if cached is not None:
                with self._stats_lock:
                    self.cache_hits += 1
                return cached.completion_text
            text, latency_ms = self._call_with_retry(prompt, params)
            with self._stats_lock:
                self.provider_calls += 1
            record = CompletionRecord(
                cache_key=key,
                prompt_digest=sha256_hex(prompt),
                params=params,
                completion_text=text,
                provider=self.provider.name,
                latency_ms=latency_ms,
                created_at=datetime.now(timezone.utc),
                sample_index=sample_index,
            )
            self.cache.put(record)
            return text
