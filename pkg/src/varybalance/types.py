"""Domain records shared across the detector, providers, cache and evaluation.

Every record is an immutable dataclass with a ``to_record``/``from_record``
pair that maps it to a flat JSON-compatible dict.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field, fields, replace
from enum import Enum
from typing import Any

from .errors import InvalidText

DEFAULT_PROMPT = "Revise this text."


class Label(str, Enum):
    HUMAN = "human"
    MACHINE = "machine"
    UNKNOWN = "unknown"

    @classmethod
    def parse(cls, value: str | None) -> Label:
        if value is None:
            return cls.UNKNOWN
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            raise ValueError(f"unknown label {value!r}") from None

    def to_record(self) -> str | None:
        return None if self is Label.UNKNOWN else self.value


class Variant(str, Enum):
    BASE = "base"
    EXPANSION = "expansion"


def text_digest(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


@dataclass(frozen=True, eq=False)
class TextSample:
    """One document under analysis.

    Equality and hashing use the id plus a digest of the content, so two
    samples loaded from different files compare equal when they carry the
    same text under the same id.
    """

    id: str
    content: str
    label: Label = Label.UNKNOWN
    language: str = "en"
    source: str = ""

    def __post_init__(self) -> None:
        if not self.id:
            raise ValueError("sample id must be non-empty")
        if not self.content.strip():
            raise InvalidText(f"sample {self.id!r} has empty content")

    @property
    def digest(self) -> str:
        return text_digest(self.content)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, TextSample):
            return NotImplemented
        return self.id == other.id and self.digest == other.digest

    def __hash__(self) -> int:
        return hash((self.id, self.digest))

    def to_record(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "text": self.content,
            "label": self.label.to_record(),
            "lang": self.language,
            "source": self.source,
        }

    @classmethod
    def from_record(cls, rec: dict[str, Any]) -> TextSample:
        return cls(
            id=str(rec["id"]),
            content=rec["text"],
            label=Label.parse(rec.get("label")),
            language=rec.get("lang") or "en",
            source=rec.get("source") or "",
        )


@dataclass(frozen=True)
class GenerationParams:
    temperature: float | None = None
    max_tokens: int = 1024
    seed: int | None = None

    def to_record(self) -> dict[str, Any]:
        return {"temperature": self.temperature, "max_tokens": self.max_tokens, "seed": self.seed}

    @classmethod
    def from_record(cls, rec: dict[str, Any]) -> GenerationParams:
        return cls(temperature=rec.get("temperature"), max_tokens=int(rec.get("max_tokens", 1024)), seed=rec.get("seed"))


@dataclass(frozen=True)
class RewriteBundle:
    sample_id: str
    rewriter_id: str
    rewrites: tuple[tuple[int, str], ...]
    prompt: str = DEFAULT_PROMPT
    params: GenerationParams = field(default_factory=GenerationParams)

    def __post_init__(self) -> None:
        if not self.rewrites:
            raise ValueError("a bundle needs at least one rewrite")
        indices = [i for i, _ in self.rewrites]
        if indices != list(range(1, len(indices) + 1)):
            raise ValueError(f"rewrite indices must be 1..k contiguous, got {indices}")
        for i, text in self.rewrites:
            if not text.strip():
                raise InvalidText(f"rewrite {i} of sample {self.sample_id!r} is empty")

    @property
    def k(self) -> int:
        return len(self.rewrites)

    @property
    def texts(self) -> list[str]:
        return [t for _, t in self.rewrites]

    def to_record(self) -> dict[str, Any]:
        return {
            "sample_id": self.sample_id,
            "rewriter_id": self.rewriter_id,
            "prompt": self.prompt,
            "params": self.params.to_record(),
            "rewrites": [{"index": i, "text": t} for i, t in self.rewrites],
        }

    @classmethod
    def from_record(cls, rec: dict[str, Any]) -> RewriteBundle:
        return cls(
            sample_id=rec["sample_id"],
            rewriter_id=rec["rewriter_id"],
            prompt=rec["prompt"],
            params=GenerationParams.from_record(rec.get("params") or {}),
            rewrites=tuple((int(r["index"]), r["text"]) for r in rec["rewrites"]),
        )


@dataclass(frozen=True)
class TokenLogProbs:
    """Per-token natural-log probabilities returned by a scorer."""

    scorer_id: str
    tokens: tuple[str, ...]
    logprobs: tuple[float, ...]
    skipped_prefix: int = 0

    def __post_init__(self) -> None:
        if len(self.tokens) != len(self.logprobs):
            raise ValueError(f"{len(self.tokens)} tokens but {len(self.logprobs)} logprobs")
        for lp in self.logprobs:
            if not math.isfinite(lp) or lp > 0:
                raise ValueError(f"invalid log-probability {lp!r}")
        if self.skipped_prefix < 0:
            raise ValueError("skipped_prefix must be >= 0")

    def __len__(self) -> int:
        return len(self.logprobs)

    def to_record(self) -> dict[str, Any]:
        return {
            "scorer_id": self.scorer_id,
            "tokens": list(self.tokens),
            "logprobs": list(self.logprobs),
            "skipped_prefix": self.skipped_prefix,
        }

    @classmethod
    def from_record(cls, rec: dict[str, Any]) -> TokenLogProbs:
        return cls(
            scorer_id=rec["scorer_id"],
            tokens=tuple(rec["tokens"]),
            logprobs=tuple(float(x) for x in rec["logprobs"]),
            skipped_prefix=int(rec.get("skipped_prefix", 0)),
        )


@dataclass(frozen=True)
class VaryBalanceScore:
    """Every intermediate quantity of one detection, plus the final scores."""

    sample_id: str
    log_ppl_0: float
    rewrite_log_ppls: tuple[float, ...]
    msd: float
    sign: int
    score: float
    variant: Variant = Variant.BASE
    rho: float | None = None
    score_e: float | None = None

    def __post_init__(self) -> None:
        if not self.rewrite_log_ppls:
            raise ValueError("at least one rewrite log-PPL is required")
        if self.sign not in (-1, 0, 1):
            raise ValueError(f"sign must be -1, 0 or +1, got {self.sign}")
        for name in ("score", "score_e", "log_ppl_0", "msd"):
            value = getattr(self, name)
            if value is not None and not math.isfinite(value):
                raise ValueError(f"{name} is not finite: {value}")
        if self.msd < 0:
            raise ValueError("msd must be >= 0")

    @property
    def n_rewrites(self) -> int:
        return len(self.rewrite_log_ppls)

    def to_record(self) -> dict[str, Any]:
        return {
            "sample_id": self.sample_id,
            "variant": self.variant.value,
            "log_ppl_0": self.log_ppl_0,
            "rewrite_log_ppls": list(self.rewrite_log_ppls),
            "msd": self.msd,
            "sign": self.sign,
            "rho": self.rho,
            "score": self.score,
            "score_e": self.score_e,
        }

    @classmethod
    def from_record(cls, rec: dict[str, Any]) -> VaryBalanceScore:
        return cls(
            sample_id=rec["sample_id"],
            variant=Variant(rec.get("variant", "base")),
            log_ppl_0=float(rec["log_ppl_0"]),
            rewrite_log_ppls=tuple(float(x) for x in rec["rewrite_log_ppls"]),
            msd=float(rec["msd"]),
            sign=int(rec["sign"]),
            rho=None if rec.get("rho") is None else float(rec["rho"]),
            score=float(rec["score"]),
            score_e=None if rec.get("score_e") is None else float(rec["score_e"]),
        )


# -- configuration ----------------------------------------------------------


@dataclass(frozen=True)
class RewriterSettings:
    spec: str = "mock"
    prompt: str = DEFAULT_PROMPT
    temperature: float | None = None
    max_tokens: int = 1024
    seed: int | None = None
    base_url: str = "https://api.openai.com/v1"
    api_key_env: str = "OPENAI_API_KEY"
    timeout: float = 60.0
    max_retries: int = 4
    empty_retries: int = 2

    @property
    def params(self) -> GenerationParams:
        return GenerationParams(temperature=self.temperature, max_tokens=self.max_tokens, seed=self.seed)


@dataclass(frozen=True)
class ScorerSettings:
    spec: str = "ngram:builtin"
    base_url: str = "http://localhost:8000/v1"
    api_key_env: str = "VARYBALANCE_SCORER_API_KEY"
    timeout: float = 60.0
    max_retries: int = 4


@dataclass(frozen=True)
class CacheSettings:
    directory: str | None = None
    enabled: bool = True


@dataclass(frozen=True)
class DetectorConfig:
    n_rewrites: int = 3
    variant: Variant = Variant.BASE
    rho_cap: float = 1000.0
    min_tokens: int = 8
    threshold: float | None = None
    max_inflight: int = 8
    seed: int = 0
    rewriter: RewriterSettings = field(default_factory=RewriterSettings)
    scorer: ScorerSettings = field(default_factory=ScorerSettings)
    cache: CacheSettings = field(default_factory=CacheSettings)

    def __post_init__(self) -> None:
        if isinstance(self.variant, str) and not isinstance(self.variant, Variant):
            object.__setattr__(self, "variant", Variant(self.variant))
        if self.n_rewrites < 1:
            raise ValueError("n_rewrites must be >= 1")
        if self.variant is Variant.EXPANSION and self.n_rewrites < 2:
            raise ValueError("the expansion variant needs n_rewrites >= 2")
        if not self.rho_cap > 0:
            raise ValueError("rho_cap must be > 0")
        if self.min_tokens < 1:
            raise ValueError("min_tokens must be >= 1")
        if self.max_inflight < 1:
            raise ValueError("max_inflight must be >= 1")
        if self.threshold is not None and not math.isfinite(self.threshold):
            raise ValueError("threshold must be finite")

    def to_record(self) -> dict[str, Any]:
        out: dict[str, Any] = {}
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, Variant):
                value = value.value
            elif f.name in ("rewriter", "scorer", "cache"):
                value = {sf.name: getattr(value, sf.name) for sf in fields(value)}
            out[f.name] = value
        return out

    @classmethod
    def from_record(cls, rec: dict[str, Any]) -> DetectorConfig:
        rec = dict(rec)
        nested = {"rewriter": RewriterSettings, "scorer": ScorerSettings, "cache": CacheSettings}
        for key, typ in nested.items():
            if key in rec:
                known = {f.name for f in fields(typ)}
                unknown = set(rec[key]) - known
                if unknown:
                    raise ValueError(f"unknown {key} settings: {sorted(unknown)}")
                rec[key] = typ(**rec[key])
        known = {f.name for f in fields(cls)}
        unknown = set(rec) - known
        if unknown:
            raise ValueError(f"unknown config fields: {sorted(unknown)}")
        return cls(**rec)

    def merged(self, **changes: Any) -> DetectorConfig:
        return replace(self, **changes)
