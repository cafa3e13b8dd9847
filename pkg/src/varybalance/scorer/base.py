"""Scorer protocol, log-perplexity reduction and a caching wrapper."""

from __future__ import annotations

import math
from typing import Protocol, runtime_checkable

from ..cache import CacheKey, DiskCache
from ..errors import InvalidText, TooShort
from ..http import CallCounter
from ..types import TokenLogProbs


@runtime_checkable
class ScorerProvider(Protocol):
    """Anything that can turn text into per-token log-probabilities.

    ``provider_id`` and ``model_id`` must be stable across runs: they are
    part of the cache key.
    """

    provider_id: str
    model_id: str
    supports_batch: bool
    max_text_length: int | None
    calls: CallCounter

    @property
    def scorer_id(self) -> str: ...

    def token_logprobs(self, text: str) -> TokenLogProbs: ...


def score_tokens(text: str, provider: ScorerProvider, *, min_tokens: int = 1) -> TokenLogProbs:
    if not text or not text.strip():
        raise InvalidText("cannot score empty text")
    tlp = provider.token_logprobs(text)
    if len(tlp) < min_tokens:
        raise TooShort(f"{len(tlp)} scored tokens, need at least {min_tokens}")
    return tlp


def log_ppl(tlp: TokenLogProbs, *, min_tokens: int = 1) -> float:
    """Mean negative log-probability per scored token, in nats."""
    n = len(tlp.logprobs)
    if n < max(min_tokens, 1):
        raise TooShort(f"{n} scored tokens, need at least {max(min_tokens, 1)}")
    value = -math.fsum(tlp.logprobs) / n
    # fsum of values <= 0 is <= 0, but -0.0 should print as 0.0
    return value + 0.0


class CachedScorer:
    """Wraps a provider so repeated texts are served from a :class:`DiskCache`."""

    supports_batch = False

    def __init__(self, inner: ScorerProvider, cache: DiskCache) -> None:
        self.inner = inner
        self.cache = cache
        self.provider_id = inner.provider_id
        self.model_id = inner.model_id
        self.max_text_length = inner.max_text_length

    @property
    def calls(self) -> CallCounter:
        return self.inner.calls

    @property
    def scorer_id(self) -> str:
        return self.inner.scorer_id

    def token_logprobs(self, text: str) -> TokenLogProbs:
        key = CacheKey.for_score(self.provider_id, self.model_id, text)
        hit = self.cache.get(key)
        if hit is not None:
            return TokenLogProbs.from_record(hit)
        tlp = self.inner.token_logprobs(text)
        self.cache.put(key, tlp.to_record())
        return tlp
