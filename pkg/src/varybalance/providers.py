"""Build providers from short spec strings.

Scorers:   ``ngram:builtin``, ``ngram:<model.json>``, ``openai:<model>``, ``table:<fixture.json>``
Rewriters: ``mock``, ``identity``, ``openai:<model>``, ``table:<fixture.json>``
"""

from __future__ import annotations

from .http import InflightLimiter
from .rewriter import IdentityRewriter, MockRewriter, OpenAIChatRewriter
from .rewriter.base import RewriteProvider
from .scorer import NGramScorerModel, OpenAICompletionsScorer, builtin_model
from .scorer.base import ScorerProvider
from .synthetic import FixtureTable, TableRewriter, TableScorer
from .types import DetectorConfig

_tables: dict[str, FixtureTable] = {}


def _table(path: str) -> FixtureTable:
    if path not in _tables:
        _tables[path] = FixtureTable.load(path)
    return _tables[path]


def _split(spec: str) -> tuple[str, str]:
    kind, _, arg = spec.partition(":")
    return kind.strip().lower(), arg.strip()


def build_scorer(cfg: DetectorConfig, limiter: InflightLimiter | None = None) -> ScorerProvider:
    s = cfg.scorer
    kind, arg = _split(s.spec)
    if kind == "ngram":
        if arg in ("", "builtin"):
            return builtin_model()
        return NGramScorerModel.load(arg)
    if kind == "openai":
        if not arg:
            raise ValueError("openai scorer needs a model name, e.g. openai:Qwen/Qwen3-0.6B")
        return OpenAICompletionsScorer(
            arg,
            base_url=s.base_url,
            api_key_env=s.api_key_env,
            timeout=s.timeout,
            max_retries=s.max_retries,
            limiter=limiter,
        )
    if kind == "table":
        return TableScorer(_table(arg))
    raise ValueError(f"unknown scorer spec {s.spec!r}")


def build_rewriter(cfg: DetectorConfig, limiter: InflightLimiter | None = None) -> RewriteProvider:
    r = cfg.rewriter
    kind, arg = _split(r.spec)
    if kind == "mock":
        return MockRewriter(seed=cfg.seed)
    if kind == "identity":
        return IdentityRewriter()
    if kind == "openai":
        if not arg:
            raise ValueError("openai rewriter needs a model name, e.g. openai:gpt-4o-mini")
        return OpenAIChatRewriter(
            arg,
            base_url=r.base_url,
            api_key_env=r.api_key_env,
            timeout=r.timeout,
            max_retries=r.max_retries,
            limiter=limiter,
        )
    if kind == "table":
        return TableRewriter(_table(arg))
    raise ValueError(f"unknown rewriter spec {r.spec!r}")
