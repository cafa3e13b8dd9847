"""Synthetic paired corpora with planted log-perplexity structure.

The generator draws, for every pair, a human and a machine answer plus k
rewrites of each, and records the log-PPL each text should receive in a
:class:`FixtureTable`. :class:`TableRewriter` and :class:`TableScorer`
replay that table through the ordinary provider interfaces, so the full
pipeline (rewrite, score, predict, evaluate) runs unchanged on it.

Default parameters put the class means of MSD near 0.34 (human) and
0.009 (machine). Human rewrites sit consistently below the original
(the rewriter smooths the text), machine rewrites scatter around it.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dataset import PairedSample
from .errors import ProviderError
from .http import CallCounter
from .types import GenerationParams, Label, TextSample, TokenLogProbs, text_digest

FIXTURE_FORMAT_VERSION = 1

_WORDS = (
    "time year people way day man thing woman life child world school state family student group country "
    "problem hand part place case week company system program question work government number night point "
    "home water room mother area money story fact month lot right study book eye job word business issue "
    "side kind head house service friend father power hour game line end member law car city community name"
).split()


@dataclass
class FixtureTable:
    log_ppls: dict[str, float] = field(default_factory=dict)
    rewrites: dict[str, list[str]] = field(default_factory=dict)

    def set_log_ppl(self, text: str, value: float) -> None:
        self.log_ppls[text_digest(text)] = float(value)

    def to_dict(self) -> dict:
        return {
            "format_version": FIXTURE_FORMAT_VERSION,
            "log_ppls": dict(sorted(self.log_ppls.items())),
            "rewrites": dict(sorted(self.rewrites.items())),
        }

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), sort_keys=True), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> FixtureTable:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        if data.get("format_version") != FIXTURE_FORMAT_VERSION:
            raise ValueError(f"unsupported fixture table version {data.get('format_version')!r}")
        return cls(log_ppls={k: float(v) for k, v in data["log_ppls"].items()}, rewrites=data["rewrites"])

    @property
    def digest(self) -> str:
        return text_digest(json.dumps(self.to_dict(), sort_keys=True))[:16]


class TableScorer:
    """Scores whitespace tokens so that the text's log-PPL equals the planted value."""

    provider_id = "table"
    supports_batch = True
    max_text_length = None

    def __init__(self, table: FixtureTable) -> None:
        self.table = table
        self.model_id = table.digest
        self.calls = CallCounter()

    @property
    def scorer_id(self) -> str:
        return f"{self.provider_id}/{self.model_id}"

    def token_logprobs(self, text: str) -> TokenLogProbs:
        self.calls.incr()
        try:
            value = self.table.log_ppls[text_digest(text)]
        except KeyError:
            raise ProviderError(f"text not in fixture table: {text[:40]!r}") from None
        tokens = tuple(text.split())
        return TokenLogProbs(self.scorer_id, tokens, tuple(-value for _ in tokens), 0)


class TableRewriter:
    provider_id = "table"

    def __init__(self, table: FixtureTable) -> None:
        self.table = table
        self.model_id = table.digest
        self.calls = CallCounter()

    @property
    def rewriter_id(self) -> str:
        return f"{self.provider_id}/{self.model_id}"

    def rewrite(self, text: str, *, prompt: str, params: GenerationParams, index: int) -> str:
        self.calls.incr()
        options = self.table.rewrites.get(text_digest(text))
        if options is None or not 1 <= index <= len(options):
            raise ProviderError(f"no planted rewrite {index} for text {text[:40]!r}")
        return options[index - 1]

    def generate(self, question: str, *, params: GenerationParams, index: int = 0) -> str:
        raise ProviderError("the fixture table cannot generate answers")


@dataclass(frozen=True)
class ClassProfile:
    """Distribution of planted log-PPLs for one class.

    Original log-PPL ~ N(log_ppl_mean, log_ppl_sd). Each rewrite equals
    ``original - shift + noise`` where the per-text shift ~
    N(shift_mean, shift_sd) and the per-rewrite noise ~ N(0, noise_sd).
    The expected MSD is ``shift_mean**2 + shift_sd**2 + noise_sd**2``.
    """

    log_ppl_mean: float
    log_ppl_sd: float
    shift_mean: float
    shift_sd: float
    noise_sd: float

    @property
    def expected_msd(self) -> float:
        return self.shift_mean**2 + self.shift_sd**2 + self.noise_sd**2


HUMAN_PROFILE = ClassProfile(log_ppl_mean=3.0, log_ppl_sd=0.35, shift_mean=0.57, shift_sd=0.12, noise_sd=0.08)
MACHINE_PROFILE = ClassProfile(log_ppl_mean=2.5, log_ppl_sd=0.35, shift_mean=0.0, shift_sd=0.05, noise_sd=0.08)


@dataclass
class SyntheticStudy:
    pairs: list[PairedSample]
    table: FixtureTable
    k: int

    @property
    def samples(self) -> list[TextSample]:
        return [s for p in self.pairs for s in (p.human_answer, p.machine_answer)]


def _sentence(rng: np.random.Generator, n_words: int) -> str:
    return " ".join(rng.choice(_WORDS, size=n_words))


def make_synthetic_study(
    n_pairs: int = 400,
    k: int = 3,
    seed: int = 0,
    human: ClassProfile = HUMAN_PROFILE,
    machine: ClassProfile = MACHINE_PROFILE,
    n_words: int = 16,
) -> SyntheticStudy:
    if n_pairs < 1 or k < 1:
        raise ValueError("n_pairs and k must be >= 1")
    rng = np.random.default_rng(seed)
    table = FixtureTable()
    pairs = []

    def plant(prefix: str, profile: ClassProfile) -> str:
        text = f"{prefix} {_sentence(rng, n_words)}"
        l0 = max(float(rng.normal(profile.log_ppl_mean, profile.log_ppl_sd)), 0.05)
        shift = float(rng.normal(profile.shift_mean, profile.shift_sd))
        table.set_log_ppl(text, l0)
        rewrites = []
        for i in range(1, k + 1):
            rw = f"{prefix} rewrite {i} {_sentence(rng, n_words)}"
            value = max(l0 - shift + float(rng.normal(0.0, profile.noise_sd)), 0.0)
            table.set_log_ppl(rw, value)
            rewrites.append(rw)
        table.rewrites[text_digest(text)] = rewrites
        return text

    for p in range(n_pairs):
        pid = f"p{p:04d}"
        question = f"question {pid} {_sentence(rng, 8)}?"
        htext = plant(f"human {pid}", human)
        mtext = plant(f"machine {pid}", machine)
        pairs.append(
            PairedSample(
                pair_id=pid,
                question=question,
                human_answer=TextSample(f"{pid}-h", htext, Label.HUMAN, source="synthetic"),
                machine_answer=TextSample(f"{pid}-m", mtext, Label.MACHINE, source="synthetic"),
            )
        )
    return SyntheticStudy(pairs, table, k)


def planted_msd(table: FixtureTable, text: str) -> float:
    l0 = table.log_ppls[text_digest(text)]
    rws = [table.log_ppls[text_digest(r)] for r in table.rewrites[text_digest(text)]]
    return math.fsum((r - l0) ** 2 for r in rws) / len(rws)
