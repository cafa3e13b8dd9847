"""Scorer backed by an OpenAI-compatible ``/completions`` endpoint.

The request echoes the prompt and asks for token log-probabilities
without generating anything::

    POST {base_url}/completions
    {"model": ..., "prompt": text, "max_tokens": 0, "echo": true,
     "logprobs": 0, "temperature": 0}

and reads ``choices[0].logprobs.tokens`` / ``token_logprobs`` /
``text_offset`` from the response. Leading ``null`` log-probabilities
(servers cannot condition the first token) are dropped and counted in
``skipped_prefix``. If the server generates tokens anyway, anything whose
``text_offset`` lies past the end of the prompt is discarded.
"""

from __future__ import annotations

import math

import httpx

from ..errors import ProviderError
from ..http import CallCounter, InflightLimiter, auth_headers, post_json
from ..types import TokenLogProbs


class OpenAICompletionsScorer:
    provider_id = "openai-completions"
    supports_batch = False

    def __init__(
        self,
        model: str,
        *,
        base_url: str = "http://localhost:8000/v1",
        api_key_env: str = "VARYBALANCE_SCORER_API_KEY",
        timeout: float = 60.0,
        max_retries: int = 4,
        max_tokens: int = 0,
        max_text_length: int | None = None,
        limiter: InflightLimiter | None = None,
        client: httpx.Client | None = None,
    ) -> None:
        self.model_id = model
        self.base_url = base_url.rstrip("/")
        self.api_key_env = api_key_env
        self.max_retries = max_retries
        self.max_tokens = max_tokens
        self.max_text_length = max_text_length
        self.limiter = limiter
        self.client = client or httpx.Client(timeout=timeout)
        self.calls = CallCounter()

    @property
    def scorer_id(self) -> str:
        return f"{self.provider_id}/{self.model_id}"

    def request_body(self, text: str) -> dict:
        return {
            "model": self.model_id,
            "prompt": text,
            "max_tokens": self.max_tokens,
            "echo": True,
            "logprobs": 0,
            "temperature": 0,
        }

    def token_logprobs(self, text: str) -> TokenLogProbs:
        if self.max_text_length is not None and len(text) > self.max_text_length:
            raise ProviderError(f"text of {len(text)} chars exceeds max_text_length {self.max_text_length}")
        self.calls.incr()
        body = post_json(
            self.client,
            f"{self.base_url}/completions",
            self.request_body(text),
            headers=auth_headers(self.api_key_env),
            max_retries=self.max_retries,
            limiter=self.limiter,
        )
        return parse_completion_logprobs(body, text, self.scorer_id)


def parse_completion_logprobs(body: dict, prompt: str, scorer_id: str) -> TokenLogProbs:
    try:
        lp = body["choices"][0]["logprobs"]
        tokens = list(lp["tokens"])
        values = list(lp["token_logprobs"])
    except (KeyError, IndexError, TypeError) as exc:
        raise ProviderError(f"malformed completions response: missing {exc}") from exc
    if len(tokens) != len(values):
        raise ProviderError("tokens and token_logprobs differ in length")
    offsets = lp.get("text_offset")
    if offsets is not None and len(offsets) == len(tokens):
        keep = sum(1 for off in offsets if off < len(prompt))
        tokens, values = tokens[:keep], values[:keep]

    skipped = 0
    while skipped < len(values) and values[skipped] is None:
        skipped += 1
    tokens, values = tokens[skipped:], values[skipped:]
    out = []
    for tok, v in zip(tokens, values):
        if v is None:
            raise ProviderError(f"missing log-probability for token {tok!r} after the prefix")
        v = float(v)
        if math.isnan(v) or v == math.inf:
            raise ProviderError(f"invalid log-probability {v!r} for token {tok!r}")
        if v == -math.inf:
            raise ProviderError(f"token {tok!r} has zero probability")
        out.append(min(v, 0.0))
    return TokenLogProbs(scorer_id, tuple(tokens), tuple(out), skipped)
