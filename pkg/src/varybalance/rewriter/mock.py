"""Offline rewrite/generation providers for tests and reproducible demos."""

from __future__ import annotations

import hashlib
import random
import re

from ..http import CallCounter
from ..types import GenerationParams, text_digest

_SENTENCE_SPLIT = re.compile(r"(?<=[.!?])\s+")
_WORD = re.compile(r"[A-Za-z]+")

_SYNONYM_PAIRS = [
    ("big", "large"),
    ("small", "little"),
    ("quick", "fast"),
    ("begin", "start"),
    ("help", "assist"),
    ("show", "demonstrate"),
    ("use", "employ"),
    ("get", "obtain"),
    ("make", "create"),
    ("buy", "purchase"),
    ("often", "frequently"),
    ("maybe", "perhaps"),
    ("very", "really"),
    ("good", "fine"),
    ("bad", "poor"),
    ("important", "significant"),
    ("idea", "notion"),
    ("problem", "issue"),
    ("answer", "response"),
    ("think", "believe"),
    ("many", "numerous"),
    ("also", "additionally"),
    ("however", "nevertheless"),
    ("because", "since"),
    ("easy", "simple"),
    ("hard", "difficult"),
    ("people", "individuals"),
    ("need", "require"),
    ("enough", "sufficient"),
    ("about", "roughly"),
]
SYNONYMS: dict[str, str] = {}
for _a, _b in _SYNONYM_PAIRS:
    SYNONYMS[_a] = _b
    SYNONYMS[_b] = _a


def _rng(*parts: object) -> random.Random:
    seed = hashlib.sha256(":".join(map(str, parts)).encode("utf-8")).digest()
    return random.Random(int.from_bytes(seed[:8], "big"))


def _match_case(src: str, word: str) -> str:
    if src.isupper() and len(src) > 1:
        return word.upper()
    if src[0].isupper():
        return word[0].upper() + word[1:]
    return word


def _substitute(sentence: str, rng: random.Random, rate: float) -> str:
    def repl(m: re.Match[str]) -> str:
        w = m.group(0)
        alt = SYNONYMS.get(w.lower())
        if alt is not None and rng.random() < rate:
            return _match_case(w, alt)
        return w

    return _WORD.sub(repl, sentence)


def perturbable_units(text: str) -> int:
    sentences = [s for s in _SENTENCE_SPLIT.split(text.strip()) if s]
    swappable = sum(1 for w in _WORD.findall(text) if w.lower() in SYNONYMS)
    return (len(sentences) if len(sentences) >= 2 else 0) + swappable


def mock_rewrite(text: str, index: int, seed: int = 0) -> str:
    """Deterministic stand-in for an LLM rewrite.

    Swaps words through a small synonym table and shuffles sentence
    order, driven by a PRNG seeded from ``(sha256(text), index, seed)``.
    Texts with fewer than two perturbable units come back unchanged.
    """
    if perturbable_units(text) < 2:
        return text
    rng = _rng(text_digest(text), index, seed)
    sentences = [s for s in _SENTENCE_SPLIT.split(text.strip()) if s]
    out = [_substitute(s, rng, 0.5) for s in sentences]
    if len(out) >= 2:
        rng.shuffle(out)
    result = " ".join(out)
    if result == text.strip():
        # the draw happened to be a no-op; force a visible change
        if len(sentences) >= 2:
            shift = 1 + (index - 1) % (len(sentences) - 1)
            out = sentences[shift:] + sentences[:shift]
            result = " ".join(out)
        if result == text.strip():
            result = _substitute(text.strip(), rng, 1.0)
    return result


_ANSWER_OPENERS = [
    "That is a good question.",
    "There are a few things to consider here.",
    "Generally speaking, the answer depends on the context.",
    "In most cases the short answer is yes, with some caveats.",
]
_ANSWER_BODY = [
    "It is important to look at the underlying causes before drawing conclusions.",
    "Many people find that a simple approach works best in practice.",
    "The main idea is to break the problem into smaller parts.",
    "You may also want to consult a reliable source for more details.",
    "This is often a matter of balancing costs and benefits.",
    "Experts usually recommend starting with the basics.",
    "Keep in mind that individual situations can vary a lot.",
    "It can help to think about the long term effects as well.",
]
_ANSWER_CLOSERS = [
    "I hope this helps.",
    "Overall, it is best to take a careful and informed approach.",
    "In summary, there is no single answer that fits every case.",
]


def mock_generate(question: str, index: int = 0, seed: int = 0) -> str:
    """Deterministic machine-style answer for ``question``."""
    rng = _rng("generate", text_digest(question), index, seed)
    body = rng.sample(_ANSWER_BODY, 3)
    return " ".join([rng.choice(_ANSWER_OPENERS), *body, rng.choice(_ANSWER_CLOSERS)])


class MockRewriter:
    provider_id = "mock"

    def __init__(self, seed: int = 0) -> None:
        self.seed = seed
        self.model_id = f"synonym-shuffle-v1-seed{seed}"
        self.calls = CallCounter()

    @property
    def rewriter_id(self) -> str:
        return f"{self.provider_id}/{self.model_id}"

    def rewrite(self, text: str, *, prompt: str, params: GenerationParams, index: int) -> str:
        self.calls.incr()
        return mock_rewrite(text, index, self.seed)

    def generate(self, question: str, *, params: GenerationParams, index: int = 0) -> str:
        self.calls.incr()
        return mock_generate(question, index, self.seed)


class IdentityRewriter:
    """Returns the input unchanged; every MSD computed through it is zero."""

    provider_id = "identity"
    model_id = "identity"

    def __init__(self) -> None:
        self.calls = CallCounter()

    @property
    def rewriter_id(self) -> str:
        return f"{self.provider_id}/{self.model_id}"

    def rewrite(self, text: str, *, prompt: str, params: GenerationParams, index: int) -> str:
        self.calls.incr()
        return text

    def generate(self, question: str, *, params: GenerationParams, index: int = 0) -> str:
        self.calls.incr()
        return question
