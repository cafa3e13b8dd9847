"""Rewrite orchestration: k independent rewrites of one original, cache-aware."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Protocol, runtime_checkable

from ..cache import CacheKey, DiskCache
from ..errors import EmptyRewrite, InvalidText
from ..http import CallCounter
from ..types import DEFAULT_PROMPT, GenerationParams, RewriteBundle, TextSample


@runtime_checkable
class RewriteProvider(Protocol):
    provider_id: str
    model_id: str
    calls: CallCounter

    @property
    def rewriter_id(self) -> str: ...

    def rewrite(self, text: str, *, prompt: str, params: GenerationParams, index: int) -> str: ...

    def generate(self, question: str, *, params: GenerationParams, index: int = 0) -> str: ...


def rewrite_one(
    text: str,
    index: int,
    provider: RewriteProvider,
    *,
    prompt: str = DEFAULT_PROMPT,
    params: GenerationParams = GenerationParams(),
    cache: DiskCache | None = None,
    empty_retries: int = 2,
) -> str:
    """Rewrite number ``index`` of the original ``text`` (never of another rewrite)."""
    key = None
    if cache is not None:
        key = CacheKey.for_rewrite(provider.provider_id, provider.model_id, prompt, params.to_record(), text, index)
        hit = cache.get(key)
        if hit is not None:
            return hit["text"]
    for _ in range(empty_retries + 1):
        out = provider.rewrite(text, prompt=prompt, params=params, index=index)
        if out and out.strip():
            break
    else:
        raise EmptyRewrite(f"rewrite {index} came back empty {empty_retries + 1} times", attempts=empty_retries + 1)
    if key is not None:
        cache.put(key, {"text": out})
    return out


def rewrite_k(
    sample: TextSample,
    k: int,
    provider: RewriteProvider,
    prompt: str = DEFAULT_PROMPT,
    params: GenerationParams = GenerationParams(),
    *,
    cache: DiskCache | None = None,
    empty_retries: int = 2,
    max_workers: int = 1,
) -> RewriteBundle:
    if k < 1:
        raise ValueError("k must be >= 1")
    if not sample.content.strip():
        raise InvalidText(f"sample {sample.id!r} is empty")

    def one(i: int) -> str:
        return rewrite_one(sample.content, i, provider, prompt=prompt, params=params, cache=cache, empty_retries=empty_retries)

    indices = range(1, k + 1)
    if max_workers > 1 and k > 1:
        with ThreadPoolExecutor(max_workers=min(max_workers, k)) as pool:
            texts = list(pool.map(one, indices))
    else:
        texts = [one(i) for i in indices]
    return RewriteBundle(
        sample_id=sample.id,
        rewriter_id=provider.rewriter_id,
        prompt=prompt,
        params=params,
        rewrites=tuple(zip(indices, texts)),
    )
