"""
Uniform access to translation services.

Every service (real HTTP adapter or mock) implements `BaseTranslator` and is
registered with a `ProviderDescriptor`. `ProviderRegistry.translate` applies
the capability gate, cache, per-provider token bucket, global in-flight bound,
retries and response normalization, in that order.
"""
from __future__ import annotations
import logging
import re
import threading
import time
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterable, List, Optional, Sequence, TypeVar

from .cache import TranslationCache
from .errors import ConfigError, DuplicateProvider, ErrorKind, ProviderError
from .utils import collapse_ws, nfc, primary_subtag

log = logging.getLogger(__name__)

T = TypeVar("T")

# recommended order for primary services
DEFAULT_PRIORITY = [
    "lingvanex", "google", "modernmt", "microsoft", "yandex", "argos", "reverso", "pons",
]

DEFAULT_RATE_LIMIT = 5.0   # requests per second per provider
DEFAULT_TIMEOUT = 15.0     # seconds per HTTP request
DEFAULT_MAX_INFLIGHT = 8

_QUOTE_PAIRS = {'"': '"', "'": "'", "“": "”", "„": "“", "«": "»", "»": "«", "‚": "‘", "‘": "’", "`": "`"}


@dataclass(frozen=True)
class ProviderDescriptor:
    id: str
    priority: int
    supported_pairs: Callable[[str, str], bool] = field(default=lambda src, tgt: src != tgt, compare=False)
    requires_key: bool = False

    def supports(self, source: str, target: str) -> bool:
        return bool(self.supported_pairs(primary_subtag(source), primary_subtag(target)))


def language_set_pairs(languages: Iterable[str]) -> Callable[[str, str], bool]:
    """Pair predicate for a service that translates between any two of `languages`."""
    langs = frozenset(languages)
    return lambda src, tgt: src != tgt and src in langs and tgt in langs


@dataclass(frozen=True)
class TranslationCandidate:
    text: str
    provider_id: str
    source_text: str
    source_lang: str
    latency: float = 0.0

    def __post_init__(self) -> None:
        if not self.text.strip():
            raise ValueError("candidate text is empty")
        if self.latency < 0:
            raise ValueError("latency must be >= 0")


class BaseTranslator(ABC):
    """Contract shared by every translation service."""

    @abstractmethod
    def translate_text(self, text: str, source: str, target: str) -> str:
        """Return the raw translation or raise ProviderError."""


@dataclass(frozen=True)
class RetryPolicy:
    max_retries: int = 3
    backoff: float = 1.0
    sleep: Callable[[float], None] = field(default=time.sleep, compare=False)

    def delay(self, attempt: int, retry_after: Optional[float]) -> float:
        if retry_after is not None:
            return max(0.0, retry_after)
        return self.backoff * (2 ** attempt)


def call_with_retries(fn: Callable[[], T], policy: RetryPolicy, *, what: str = "") -> T:
    """Call `fn`, retrying retryable ProviderErrors up to `policy.max_retries` times."""
    attempt = 0
    while True:
        try:
            return fn()
        except ProviderError as exc:
            if not exc.retryable or attempt >= policy.max_retries:
                raise
            delay = policy.delay(attempt, exc.retry_after)
            log.info("Retrying %s after %s in %.1fs (%d/%d)",
                     what or exc.provider_id, exc.kind.value, delay, attempt + 1, policy.max_retries)
            policy.sleep(delay)
            attempt += 1


class TokenBucket:
    """Blocking token bucket; `rate` tokens per second, burst of `capacity`."""

    def __init__(self, rate: float, capacity: Optional[float] = None,
                 clock: Callable[[], float] = time.monotonic,
                 sleep: Callable[[float], None] = time.sleep) -> None:
        if rate <= 0:
            raise ValueError("rate must be > 0")
        self.rate = float(rate)
        self.capacity = float(capacity if capacity is not None else max(1.0, rate))
        self._tokens = self.capacity
        self._clock = clock
        self._sleep = sleep
        self._stamp = clock()
        self._lock = threading.Lock()

    def acquire(self) -> None:
        while True:
            with self._lock:
                now = self._clock()
                self._tokens = min(self.capacity, self._tokens + (now - self._stamp) * self.rate)
                self._stamp = now
                if self._tokens >= 1.0:
                    self._tokens -= 1.0
                    return
                wait = (1.0 - self._tokens) / self.rate
            self._sleep(wait)


def normalize_response(raw: Optional[str], provider_id: str) -> str:
    """Trim, drop matching quote pairs, collapse whitespace runs, NFC."""
    if raw is None:
        raise ProviderError(ErrorKind.MALFORMED_RESPONSE, provider_id, "empty response")
    text = collapse_ws(nfc(str(raw)))
    while len(text) >= 2 and _QUOTE_PAIRS.get(text[0]) == text[-1]:
        text = text[1:-1].strip()
    if not text:
        raise ProviderError(ErrorKind.MALFORMED_RESPONSE, provider_id, "empty response")
    return text


@dataclass
class ProviderStats:
    calls: int = 0
    errors: int = 0
    cache_hits: int = 0


@dataclass
class ProviderEntry:
    descriptor: ProviderDescriptor
    implementation: BaseTranslator
    bucket: Optional[TokenBucket] = None
    retry: Optional[RetryPolicy] = None
    stats: ProviderStats = field(default_factory=ProviderStats)


class ProviderRegistry:
    def __init__(self, *, cache: Optional[TranslationCache] = None,
                 retry: RetryPolicy = RetryPolicy(), max_inflight: int = DEFAULT_MAX_INFLIGHT) -> None:
        self.cache = cache
        self.retry = retry
        self.max_inflight = max_inflight
        self._entries: Dict[str, ProviderEntry] = {}
        self._inflight = threading.BoundedSemaphore(max_inflight)
        self._lock = threading.Lock()
        self.network_calls = 0

    def __contains__(self, provider_id: str) -> bool:
        return provider_id in self._entries

    def __len__(self) -> int:
        return len(self._entries)

    def register(self, descriptor: ProviderDescriptor, implementation: BaseTranslator,
                 *, rate_limit: Optional[float] = None, retry: Optional[RetryPolicy] = None) -> None:
        if descriptor.id in self._entries:
            raise DuplicateProvider(f"provider {descriptor.id!r} is already registered")
        bucket = TokenBucket(rate_limit) if rate_limit else None
        self._entries[descriptor.id] = ProviderEntry(descriptor, implementation, bucket, retry)

    def retry_policy(self, provider_id: str) -> RetryPolicy:
        """The provider's own policy, else the registry default."""
        return self.get(provider_id).retry or self.retry

    def get(self, provider_id: str) -> ProviderEntry:
        try:
            return self._entries[provider_id]
        except KeyError:
            raise ConfigError(f"unknown provider {provider_id!r}") from None

    def ids(self) -> List[str]:
        return [e.descriptor.id for e in sorted(self._entries.values(),
                                                key=lambda e: (e.descriptor.priority, e.descriptor.id))]

    def ordered(self, order: Optional[Sequence[str]] = None) -> List[ProviderDescriptor]:
        """Descriptors in effective priority order (`order` overrides registered ranks)."""
        ids = default_priority(order, known=self.ids()) if order else self.ids()
        return [self._entries[i].descriptor for i in ids]

    def inflight(self) -> threading.BoundedSemaphore:
        """Global bound on concurrent outbound requests, shared with the LLM stage."""
        return self._inflight

    def translate(self, provider: ProviderDescriptor | str, text: str, source: str, target: str
                  ) -> TranslationCandidate:
        entry = self.get(provider if isinstance(provider, str) else provider.id)
        desc = entry.descriptor
        src, tgt = primary_subtag(source), primary_subtag(target)
        if not desc.supports(src, tgt):
            raise ProviderError(ErrorKind.UNSUPPORTED_PAIR, desc.id, f"{src}->{tgt}")

        if self.cache is not None:
            cached = self.cache.get(desc.id, src, tgt, text)
            if cached is not None:
                with self._lock:
                    entry.stats.cache_hits += 1
                log.debug("Cache hit %s %s->%s %r", desc.id, src, tgt, text)
                return TranslationCandidate(cached, desc.id, text, source, 0.0)

        def attempt() -> str:
            if entry.bucket is not None:
                entry.bucket.acquire()
            with self._inflight:
                with self._lock:
                    self.network_calls += 1
                    entry.stats.calls += 1
                raw = entry.implementation.translate_text(text, src, tgt)
            return normalize_response(raw, desc.id)

        start = time.perf_counter()
        try:
            result = call_with_retries(attempt, entry.retry or self.retry, what=desc.id)
        except ProviderError:
            with self._lock:
                entry.stats.errors += 1
            raise
        latency = time.perf_counter() - start

        if self.cache is not None:
            self.cache.put(desc.id, src, tgt, text, result)
        return TranslationCandidate(result, desc.id, text, source, latency)

    def stats(self) -> Dict[str, Dict[str, int]]:
        return {pid: vars(e.stats).copy() for pid, e in sorted(self._entries.items())}


def register_provider(registry: ProviderRegistry, descriptor: ProviderDescriptor,
                      implementation: BaseTranslator, *, rate_limit: Optional[float] = None,
                      retry: Optional[RetryPolicy] = None) -> None:
    registry.register(descriptor, implementation, rate_limit=rate_limit, retry=retry)


def default_priority(override: Optional[Sequence[str]] = None,
                     known: Optional[Iterable[str]] = None) -> List[str]:
    """The recommended provider order, or `override` verbatim once its ids are checked."""
    if not override:
        return list(DEFAULT_PRIORITY)
    order = [p.strip() for p in override if p.strip()]
    if known is not None:
        known_ids = set(known)
        unknown = [p for p in order if p not in known_ids]
        if unknown:
            raise ConfigError(f"unknown provider id(s): {', '.join(unknown)}")
    if len(set(order)) != len(order):
        raise ConfigError(f"provider order lists an id twice: {', '.join(order)}")
    return order


def parse_provider_list(value: str) -> List[str]:
    return [p for p in re.split(r"[,\s]+", value) if p]
