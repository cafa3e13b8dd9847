"""Rewriter/generator backed by an OpenAI-compatible ``/chat/completions`` endpoint.

Only a single user message is sent, with no system message::

    {"model": ..., "messages": [{"role": "user", "content": "<prompt>\n\n<text>"}],
     "max_tokens": ..., "temperature": ..., "seed": ...}

``temperature`` and ``seed`` are omitted when unset so the provider
default applies. With a seed, rewrite ``i`` is requested with
``seed + i - 1`` so the k rewrites are distinct draws.
"""

from __future__ import annotations

import httpx

from ..errors import ProviderError
from ..http import CallCounter, InflightLimiter, auth_headers, post_json
from ..types import GenerationParams


class OpenAIChatRewriter:
    provider_id = "openai-chat"

    def __init__(
        self,
        model: str,
        *,
        base_url: str = "https://api.openai.com/v1",
        api_key_env: str = "OPENAI_API_KEY",
        timeout: float = 60.0,
        max_retries: int = 4,
        limiter: InflightLimiter | None = None,
        client: httpx.Client | None = None,
    ) -> None:
        self.model_id = model
        self.base_url = base_url.rstrip("/")
        self.api_key_env = api_key_env
        self.max_retries = max_retries
        self.limiter = limiter
        self.client = client or httpx.Client(timeout=timeout)
        self.calls = CallCounter()

    @property
    def rewriter_id(self) -> str:
        return f"{self.provider_id}/{self.model_id}"

    def request_body(self, content: str, params: GenerationParams, index: int) -> dict:
        body: dict = {
            "model": self.model_id,
            "messages": [{"role": "user", "content": content}],
            "max_tokens": params.max_tokens,
        }
        if params.temperature is not None:
            body["temperature"] = params.temperature
        if params.seed is not None:
            body["seed"] = params.seed + max(index - 1, 0)
        return body

    def _chat(self, content: str, params: GenerationParams, index: int) -> str:
        self.calls.incr()
        body = post_json(
            self.client,
            f"{self.base_url}/chat/completions",
            self.request_body(content, params, index),
            headers=auth_headers(self.api_key_env),
            max_retries=self.max_retries,
            limiter=self.limiter,
        )
        try:
            text = body["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise ProviderError(f"malformed chat response: missing {exc}") from exc
        return text or ""

    def rewrite(self, text: str, *, prompt: str, params: GenerationParams, index: int) -> str:
        return self._chat(f"{prompt}\n\n{text}", params, index)

    def generate(self, question: str, *, params: GenerationParams, index: int = 0) -> str:
        return self._chat(question, params, index)
