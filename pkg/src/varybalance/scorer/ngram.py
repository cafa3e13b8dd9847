"""Add-k smoothed n-gram language model used as an offline, deterministic scorer."""

from __future__ import annotations

import hashlib
import json
import math
from collections import Counter
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Literal

from ..errors import EmptyCorpus
from ..http import CallCounter
from ..types import TokenLogProbs

NGRAM_FORMAT_VERSION = 1
BOS = "<s>"

TokenizerMode = Literal["whitespace", "character"]


def tokenize(text: str, mode: TokenizerMode) -> list[str]:
    if mode == "whitespace":
        return text.split()
    if mode == "character":
        return list(text)
    raise ValueError(f"unknown tokenizer mode {mode!r}")


@dataclass(frozen=True)
class NGramScorerModel:
    """Fitted counts for an order-1..3 model.

    ``ngrams`` maps full n-gram tuples (left-padded with ``<s>``) to counts;
    ``contexts`` maps the (n-1)-token prefixes to how often they were
    followed by anything. For order 1 ``contexts`` holds the single empty
    tuple with the total token count.

    Tokens never seen in training get ``k / (c(ctx) + k|V|)``, so every
    probability is strictly positive and at most one.
    """

    order: int
    smoothing: float
    tokenizer: TokenizerMode
    vocabulary: dict[str, int]
    ngrams: dict[tuple[str, ...], int]
    contexts: dict[tuple[str, ...], int]
    calls: CallCounter = field(default_factory=CallCounter, compare=False, repr=False)

    provider_id = "ngram"
    supports_batch = True
    max_text_length = None

    def __post_init__(self) -> None:
        if self.order not in (1, 2, 3):
            raise ValueError("order must be 1, 2 or 3")
        if not self.smoothing > 0:
            raise ValueError("smoothing must be > 0")

    @property
    def model_id(self) -> str:
        return hashlib.sha256(self.dumps().encode("utf-8")).hexdigest()[:16]

    @property
    def scorer_id(self) -> str:
        return f"{self.provider_id}/{self.model_id}"

    def prob(self, context: tuple[str, ...], token: str) -> float:
        k = self.smoothing
        v = len(self.vocabulary)
        return (self.ngrams.get(context + (token,), 0) + k) / (self.contexts.get(context, 0) + k * v)

    def token_logprobs(self, text: str) -> TokenLogProbs:
        self.calls.incr()
        tokens = tokenize(text, self.tokenizer)
        padded = [BOS] * (self.order - 1) + tokens
        logprobs = []
        for i, tok in enumerate(tokens):
            ctx = tuple(padded[i : i + self.order - 1])
            logprobs.append(min(math.log(self.prob(ctx, tok)), 0.0))
        return TokenLogProbs(self.scorer_id, tuple(tokens), tuple(logprobs), 0)

    # -- persistence ----------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "format_version": NGRAM_FORMAT_VERSION,
            "order": self.order,
            "smoothing": self.smoothing,
            "tokenizer": self.tokenizer,
            "vocabulary": dict(sorted(self.vocabulary.items())),
            "ngrams": sorted([list(g), c] for g, c in self.ngrams.items()),
            "contexts": sorted([list(g), c] for g, c in self.contexts.items()),
        }

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, ensure_ascii=False, separators=(",", ":"))

    @classmethod
    def from_dict(cls, data: dict) -> NGramScorerModel:
        version = data.get("format_version")
        if version != NGRAM_FORMAT_VERSION:
            raise ValueError(f"unsupported n-gram format version {version!r}")
        return cls(
            order=int(data["order"]),
            smoothing=float(data["smoothing"]),
            tokenizer=data["tokenizer"],
            vocabulary={str(k): int(v) for k, v in data["vocabulary"].items()},
            ngrams={tuple(g): int(c) for g, c in data["ngrams"]},
            contexts={tuple(g): int(c) for g, c in data["contexts"]},
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.dumps(), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> NGramScorerModel:
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def fit_ngram(
    corpus: Iterable[str],
    order: int = 2,
    smoothing: float = 1.0,
    tokenizer: TokenizerMode = "whitespace",
) -> NGramScorerModel:
    texts = list(corpus)
    if not texts:
        raise EmptyCorpus("cannot fit an n-gram model on an empty corpus")
    vocab: Counter[str] = Counter()
    grams: Counter[tuple[str, ...]] = Counter()
    ctxs: Counter[tuple[str, ...]] = Counter()
    for text in texts:
        tokens = tokenize(text, tokenizer)
        vocab.update(tokens)
        padded = [BOS] * (order - 1) + tokens
        for i in range(len(tokens)):
            gram = tuple(padded[i : i + order])
            grams[gram] += 1
            ctxs[gram[:-1]] += 1
    if not vocab:
        raise EmptyCorpus("corpus contains no tokens")
    return NGramScorerModel(
        order=order,
        smoothing=float(smoothing),
        tokenizer=tokenizer,
        vocabulary=dict(vocab),
        ngrams=dict(grams),
        contexts=dict(ctxs),
    )


def builtin_model() -> NGramScorerModel:
    """Bigram model over the small English reference text shipped with the package."""
    text = resources.files("varybalance.data").joinpath("reference_corpus.txt").read_text(encoding="utf-8")
    lines = [ln for ln in text.splitlines() if ln.strip()]
    return fit_ngram(lines, order=2, smoothing=0.5, tokenizer="whitespace")
