from .base import CachedScorer, ScorerProvider, log_ppl, score_tokens
from .ngram import NGramScorerModel, builtin_model, fit_ngram, tokenize
from .remote import OpenAICompletionsScorer, parse_completion_logprobs

__all__ = [
    "CachedScorer",
    "NGramScorerModel",
    "OpenAICompletionsScorer",
    "ScorerProvider",
    "builtin_model",
    "fit_ngram",
    "log_ppl",
    "parse_completion_logprobs",
    "score_tokens",
    "tokenize",
]
