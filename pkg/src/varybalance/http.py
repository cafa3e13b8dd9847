"""Shared plumbing for the OpenAI-compatible HTTP providers."""

from __future__ import annotations

import logging
import os
import random
import threading
import time
from contextlib import contextmanager
from typing import Any, Iterator

import httpx

from .errors import ProviderError

logger = logging.getLogger(__name__)

RETRY_STATUSES = frozenset({408, 409, 425, 429, 500, 502, 503, 504})


class InflightLimiter:
    """Caps the number of provider requests in flight across all threads."""

    def __init__(self, limit: int = 8) -> None:
        if limit < 1:
            raise ValueError("limit must be >= 1")
        self.limit = limit
        self._sem = threading.BoundedSemaphore(limit)

    @contextmanager
    def slot(self) -> Iterator[None]:
        with self._sem:
            yield


class CallCounter:
    """Thread-safe counter of provider invocations."""

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self.value = 0

    def incr(self) -> None:
        with self._lock:
            self.value += 1


def auth_headers(api_key_env: str) -> dict[str, str]:
    token = os.environ.get(api_key_env)
    return {"Authorization": f"Bearer {token}"} if token else {}


def post_json(
    client: httpx.Client,
    url: str,
    payload: dict[str, Any],
    *,
    headers: dict[str, str] | None = None,
    max_retries: int = 4,
    backoff: float = 0.5,
    limiter: InflightLimiter | None = None,
    sleep=time.sleep,
) -> dict[str, Any]:
    """POST ``payload`` and return the decoded JSON body.

    Transport errors and retryable statuses are retried with exponential
    backoff plus jitter; anything else raises :class:`ProviderError`
    immediately.
    """
    last_status: int | None = None
    last_error = "no attempt made"
    for attempt in range(1, max_retries + 2):
        try:
            if limiter is None:
                resp = client.post(url, json=payload, headers=headers)
            else:
                with limiter.slot():
                    resp = client.post(url, json=payload, headers=headers)
        except httpx.TransportError as exc:
            last_status, last_error = None, f"{type(exc).__name__}: {exc}"
        else:
            if resp.status_code < 400:
                try:
                    return resp.json()
                except ValueError as exc:
                    raise ProviderError(f"{url}: response is not JSON", attempts=attempt, status=resp.status_code) from exc
            last_status, last_error = resp.status_code, resp.text[:200]
            if resp.status_code not in RETRY_STATUSES:
                raise ProviderError(f"{url}: HTTP {resp.status_code}: {last_error}", attempts=attempt, status=resp.status_code)
        if attempt <= max_retries:
            delay = backoff * 2 ** (attempt - 1) * (1 + random.random() / 4)
            logger.debug("retrying %s in %.2fs after: %s", url, delay, last_error)
            sleep(delay)
    raise ProviderError(
        f"{url}: giving up after {max_retries + 1} attempts: {last_error}",
        attempts=max_retries + 1,
        status=last_status,
        retryable=True,
    )
