"""Detect LLM-generated text from how much its log-perplexity moves under LLM rewrites."""

from .detector import (
    base_score,
    calibrate_threshold,
    classify,
    detect,
    detect_corpus,
    expansion_score,
    msd,
    sign_term,
)
from .types import (
    DEFAULT_PROMPT,
    DetectorConfig,
    GenerationParams,
    Label,
    RewriteBundle,
    TextSample,
    TokenLogProbs,
    VaryBalanceScore,
    Variant,
)

__version__ = "0.1.0"

__all__ = [
    "DEFAULT_PROMPT",
    "DetectorConfig",
    "GenerationParams",
    "Label",
    "RewriteBundle",
    "TextSample",
    "TokenLogProbs",
    "VaryBalanceScore",
    "Variant",
    "base_score",
    "calibrate_threshold",
    "classify",
    "detect",
    "detect_corpus",
    "expansion_score",
    "msd",
    "sign_term",
]
