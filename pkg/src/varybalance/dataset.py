"""Corpus I/O, paired (question, human answer, machine answer) data, splits and generation."""

from __future__ import annotations

import json
import os
import random
import tempfile
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable, Sequence

from .cache import CacheKey, DiskCache
from .errors import DuplicateId, InvalidText, ParseError, ProviderError, TooFewSamples
from .rewriter.base import RewriteProvider
from .types import GenerationParams, Label, TextSample

REQUIRED_FIELDS = ("id", "text")


def _parse_line(line: str, lineno: int) -> dict[str, Any]:
    try:
        rec = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg}", line=lineno) from exc
    if not isinstance(rec, dict):
        raise ParseError("record is not an object", line=lineno)
    for name in REQUIRED_FIELDS:
        if name not in rec or rec[name] is None:
            raise ParseError(f"missing field {name!r}", line=lineno)
    return rec


def read_records(path: str | os.PathLike[str]) -> list[tuple[int, dict[str, Any]]]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if line.strip():
                out.append((lineno, _parse_line(line, lineno)))
    return out


def load_corpus(path: str | os.PathLike[str]) -> list[TextSample]:
    samples: list[TextSample] = []
    seen: dict[str, int] = {}
    for lineno, rec in read_records(path):
        try:
            sample = TextSample.from_record(rec)
        except (ValueError, InvalidText) as exc:
            raise ParseError(str(exc), line=lineno) from exc
        if sample.id in seen:
            raise DuplicateId(f"line {lineno}: id {sample.id!r} already used on line {seen[sample.id]}")
        seen[sample.id] = lineno
        samples.append(sample)
    return samples


def write_jsonl(path: str | os.PathLike[str], records: Iterable[dict[str, Any]]) -> None:
    """Write records atomically (temporary file + rename)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            for rec in records:
                fh.write(json.dumps(rec, ensure_ascii=False, sort_keys=True) + "\n")
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def save_corpus(path: str | os.PathLike[str], samples: Iterable[TextSample]) -> None:
    write_jsonl(path, (s.to_record() for s in samples))


# -- paired corpora ---------------------------------------------------------


@dataclass(frozen=True)
class PairedSample:
    pair_id: str
    question: str
    human_answer: TextSample
    machine_answer: TextSample

    def __post_init__(self) -> None:
        if not self.question.strip():
            raise InvalidText(f"pair {self.pair_id!r} has an empty question")
        if self.human_answer.label is not Label.HUMAN or self.machine_answer.label is not Label.MACHINE:
            raise ValueError(f"pair {self.pair_id!r} answers must be labeled human and machine")

    def records(self) -> list[dict[str, Any]]:
        out = []
        for role, sample in (("human", self.human_answer), ("machine", self.machine_answer)):
            rec = sample.to_record()
            rec.update(pair_id=self.pair_id, question=self.question, role=role)
            out.append(rec)
        return out


def load_paired(path: str | os.PathLike[str]) -> list[PairedSample]:
    """Read a paired corpus: corpus records plus ``pair_id``, ``question`` and ``role``."""
    groups: dict[str, dict[str, tuple[int, dict[str, Any]]]] = defaultdict(dict)
    order: list[str] = []
    ids: dict[str, int] = {}
    for lineno, rec in read_records(path):
        for name in ("pair_id", "question", "role"):
            if not rec.get(name):
                raise ParseError(f"missing field {name!r}", line=lineno)
        role = rec["role"]
        if role not in ("human", "machine"):
            raise ParseError(f"role must be 'human' or 'machine', got {role!r}", line=lineno)
        if rec["id"] in ids:
            raise DuplicateId(f"line {lineno}: id {rec['id']!r} already used on line {ids[rec['id']]}")
        ids[rec["id"]] = lineno
        pid = str(rec["pair_id"])
        if role in groups[pid]:
            raise ParseError(f"pair {pid!r} has two {role} answers", line=lineno)
        if pid not in groups or not groups[pid]:
            order.append(pid)
        rec = {**rec, "label": role}
        groups[pid][role] = (lineno, rec)

    pairs = []
    for pid in order:
        g = groups[pid]
        if set(g) != {"human", "machine"}:
            missing = {"human", "machine"} - set(g)
            line = next(iter(g.values()))[0]
            raise ParseError(f"pair {pid!r} lacks a {missing.pop()} answer", line=line)
        (hl, hrec), (_, mrec) = g["human"], g["machine"]
        try:
            pairs.append(
                PairedSample(pid, hrec["question"], TextSample.from_record(hrec), TextSample.from_record(mrec))
            )
        except (ValueError, InvalidText) as exc:
            raise ParseError(str(exc), line=hl) from exc
    return pairs


def save_paired(path: str | os.PathLike[str], pairs: Iterable[PairedSample]) -> None:
    write_jsonl(path, (rec for p in pairs for rec in p.records()))


# -- splits -----------------------------------------------------------------


def split(samples: Sequence[TextSample], calibration_fraction: float, seed: int = 0) -> tuple[list[TextSample], list[TextSample]]:
    """Label-stratified, seed-deterministic calibration/test split.

    Membership depends only on the seed, the fraction and the sorted ids
    of each label group; each group contributes ``round(fraction * n)``.
    """
    if not 0 < calibration_fraction < 1:
        raise ValueError(f"calibration_fraction must be in (0, 1), got {calibration_fraction}")
    by_label: dict[Label, list[TextSample]] = defaultdict(list)
    for s in samples:
        by_label[s.label].append(s)
    calib_ids: set[str] = set()
    for label in sorted(by_label, key=lambda lb: lb.value):
        group = sorted(by_label[label], key=lambda s: s.id)
        n_cal = round(calibration_fraction * len(group))
        if n_cal == 0 or n_cal == len(group):
            raise TooFewSamples(f"{len(group)} {label.value} samples cannot fill both splits at fraction {calibration_fraction}")
        rng = random.Random(f"{seed}:{label.value}")
        calib_ids.update(s.id for s in rng.sample(group, n_cal))
    calibration = [s for s in samples if s.id in calib_ids]
    test = [s for s in samples if s.id not in calib_ids]
    return calibration, test


# -- machine answer generation -----------------------------------------------


def generate_machine_answers(
    questions: Sequence[str],
    provider: RewriteProvider,
    params: GenerationParams = GenerationParams(),
    *,
    cache: DiskCache | None = None,
    id_prefix: str = "gen",
) -> list[TextSample]:
    """One machine-labeled answer per question, generated (or replayed from cache) in order."""
    out = []
    source = json.dumps({"generator": provider.rewriter_id, "params": params.to_record()}, sort_keys=True)
    for i, question in enumerate(questions):
        if not question.strip():
            raise InvalidText(f"question {i} is empty")
        key = None
        text = None
        if cache is not None:
            key = CacheKey.for_generation(provider.provider_id, provider.model_id, params.to_record(), question)
            hit = cache.get(key)
            text = hit["text"] if hit is not None else None
        if text is None:
            text = provider.generate(question, params=params, index=0)
            if not text or not text.strip():
                raise ProviderError(f"generator returned an empty answer for question {i}")
            if key is not None:
                cache.put(key, {"text": text})
        out.append(TextSample(id=f"{id_prefix}-{i:05d}", content=text, label=Label.MACHINE, source=source))
    return out
