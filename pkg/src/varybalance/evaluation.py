"""AUROC, ROC curves, per-class score statistics and MSD separation."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

import numpy as np
from scipy.stats import rankdata

from .errors import EmptyClass, UnlabeledSample
from .types import Label, VaryBalanceScore

HISTOGRAM_BINS = 30
SCORE_FIELDS = ("score", "score_e", "log_ppl_0", "msd")


def _validate(pos: Sequence[float], neg: Sequence[float]) -> None:
    if len(pos) == 0 or len(neg) == 0:
        raise EmptyClass(f"need both classes, got {len(pos)} positive and {len(neg)} negative scores")
    for x in (*pos, *neg):
        if not math.isfinite(x):
            raise ValueError(f"non-finite score {x!r}")


def auroc(pos_scores: Sequence[float], neg_scores: Sequence[float]) -> float:
    """Mann-Whitney estimate of P(pos > neg) + P(pos = neg) / 2, using midranks for ties."""
    _validate(pos_scores, neg_scores)
    n_pos, n_neg = len(pos_scores), len(neg_scores)
    ranks = rankdata(np.concatenate([np.asarray(pos_scores, float), np.asarray(neg_scores, float)]), method="average")
    u = float(ranks[:n_pos].sum()) - n_pos * (n_pos + 1) / 2
    return u / (n_pos * n_neg)


def roc_table(pos_scores: Sequence[float], neg_scores: Sequence[float]) -> list[tuple[float, float, float]]:
    """``(threshold, fpr, tpr)`` rows for ``score >= threshold`` predictions.

    The first row uses ``+inf`` (nothing predicted positive); thresholds
    then sweep the distinct scores from high to low, ending at (1, 1).
    """
    _validate(pos_scores, neg_scores)
    pos = np.sort(np.asarray(pos_scores, float))
    neg = np.sort(np.asarray(neg_scores, float))
    thresholds = np.unique(np.concatenate([pos, neg]))[::-1]
    # count of scores >= t
    tp = len(pos) - np.searchsorted(pos, thresholds, side="left")
    fp = len(neg) - np.searchsorted(neg, thresholds, side="left")
    rows = [(math.inf, 0.0, 0.0)]
    for t, f, p in zip(thresholds, fp, tp):
        point = (float(f) / len(neg), float(p) / len(pos))
        if point != rows[-1][1:]:
            rows.append((float(t), *point))
    return rows


def roc_curve(pos_scores: Sequence[float], neg_scores: Sequence[float]) -> list[tuple[float, float]]:
    return [(fpr, tpr) for _, fpr, tpr in roc_table(pos_scores, neg_scores)]


def trapezoid_area(points: Sequence[tuple[float, float]]) -> float:
    area = 0.0
    for (x0, y0), (x1, y1) in zip(points, points[1:]):
        area += (x1 - x0) * (y0 + y1) / 2
    return area


@dataclass(frozen=True)
class ClassStats:
    count: int
    # None when the value overflows float range (possible for expansion scores)
    mean: float | None
    variance: float | None
    min: float
    max: float
    histogram: list[int]

    def to_record(self) -> dict[str, Any]:
        return {
            "count": self.count,
            "mean": self.mean,
            "variance": self.variance,
            "min": self.min,
            "max": self.max,
            "histogram": self.histogram,
        }


@dataclass(frozen=True)
class MsdSeparation:
    mean_msd_human: float
    mean_msd_machine: float
    pair_fraction: float
    n_pairs: int
    paired: bool

    def to_record(self) -> dict[str, Any]:
        return {
            "mean_msd_human": self.mean_msd_human,
            "mean_msd_machine": self.mean_msd_machine,
            "pair_fraction": self.pair_fraction,
            "n_pairs": self.n_pairs,
            "paired": self.paired,
        }


def msd_separation(
    human_scores: Sequence[VaryBalanceScore],
    machine_scores: Sequence[VaryBalanceScore],
    pairs: Sequence[tuple[str, str]] | None = None,
) -> MsdSeparation:
    """Mean MSD per class and the share of (human, machine) pairs where the human MSD is strictly larger.

    With ``pairs`` (human id, machine id) only those aligned pairs are
    compared; otherwise every cross pair is.
    """
    if not human_scores or not machine_scores:
        raise EmptyClass("msd separation needs both human and machine scores")
    h = np.array([s.msd for s in human_scores])
    m = np.array([s.msd for s in machine_scores])
    if pairs:
        by_id = {s.sample_id: s.msd for s in (*human_scores, *machine_scores)}
        wins = sum(1 for hid, mid in pairs if by_id[hid] > by_id[mid])
        n_pairs = len(pairs)
    else:
        ms = np.sort(m)
        wins = int(np.searchsorted(ms, h, side="left").sum())
        n_pairs = len(h) * len(m)
    return MsdSeparation(float(h.mean()), float(m.mean()), wins / n_pairs, n_pairs, bool(pairs))


@dataclass(frozen=True)
class EvalOptions:
    positive: Label = Label.HUMAN
    score_field: str = "score"
    threshold: float | None = None
    bins: int = HISTOGRAM_BINS


@dataclass(frozen=True)
class EvalReport:
    auroc: float
    roc_points: list[tuple[float, float]]
    roc_thresholds: list[float]
    positive: Label
    score_field: str
    class_stats: dict[str, ClassStats]
    histogram_edges: list[float]
    msd_separation: MsdSeparation
    threshold: float | None = None
    accuracy_at_threshold: float | None = None
    extra: dict[str, Any] = field(default_factory=dict)

    def to_record(self) -> dict[str, Any]:
        return {
            "auroc": self.auroc,
            "positive_class": self.positive.value,
            "score_field": self.score_field,
            "orientation": f"{self.positive.value} is the positive class; "
            + "raw score, higher = more human-like"
            + ("" if self.positive is Label.HUMAN else "; auroc is 1 - the human-positive value"),
            "roc_points": [list(p) for p in self.roc_points],
            "threshold": self.threshold,
            "accuracy_at_threshold": self.accuracy_at_threshold,
            "class_stats": {k: v.to_record() for k, v in self.class_stats.items()},
            "histogram_edges": self.histogram_edges,
            "msd_separation": self.msd_separation.to_record(),
            **self.extra,
        }

    def roc_rows(self) -> list[tuple[float, float, float]]:
        return [(t, f, p) for t, (f, p) in zip(self.roc_thresholds, self.roc_points)]


def score_value(s: VaryBalanceScore, score_field: str) -> float:
    if score_field not in SCORE_FIELDS:
        raise ValueError(f"unknown score field {score_field!r}; choose from {SCORE_FIELDS}")
    value = getattr(s, score_field)
    if value is None:
        raise ValueError(f"sample {s.sample_id!r} has no {score_field} (was it scored with the expansion variant?)")
    return float(value)


def class_stats(values: Sequence[float], edges: np.ndarray) -> ClassStats:
    arr = np.asarray(values, float)
    counts, _ = np.histogram(arr, bins=edges)
    with np.errstate(over="ignore", invalid="ignore"):
        mean, var = float(arr.mean()), float(arr.var())
    return ClassStats(
        count=len(arr),
        mean=mean if math.isfinite(mean) else None,
        variance=var if math.isfinite(var) else None,
        min=float(arr.min()),
        max=float(arr.max()),
        histogram=[int(c) for c in counts],
    )


def evaluate(
    scores: Sequence[VaryBalanceScore],
    labels: Mapping[str, Label],
    opts: EvalOptions = EvalOptions(),
    pairs: Sequence[tuple[str, str]] | None = None,
) -> EvalReport:
    """Score-level evaluation with human as the default positive class.

    Choosing machine as positive keeps the raw score (higher = more human),
    so the AUROC becomes ``1 - auroc`` of the human-positive view.
    """
    human: list[VaryBalanceScore] = []
    machine: list[VaryBalanceScore] = []
    for s in scores:
        label = labels.get(s.sample_id, Label.UNKNOWN)
        if label is Label.HUMAN:
            human.append(s)
        elif label is Label.MACHINE:
            machine.append(s)
        else:
            raise UnlabeledSample(s.sample_id)
    if not human or not machine:
        raise EmptyClass(f"need both classes, got {len(human)} human and {len(machine)} machine")

    hv = [score_value(s, opts.score_field) for s in human]
    mv = [score_value(s, opts.score_field) for s in machine]
    if opts.positive is Label.HUMAN:
        pos, neg = hv, mv
    elif opts.positive is Label.MACHINE:
        pos, neg = mv, hv
    else:
        raise ValueError("positive class must be human or machine")
    table = roc_table(pos, neg)
    thresholds = [t for t, _, _ in table]

    all_values = np.asarray(hv + mv, float)
    lo, hi = float(all_values.min()), float(all_values.max())
    if lo == hi:
        lo, hi = lo - 0.5, hi + 0.5
    edges = np.linspace(lo, hi, opts.bins + 1)

    accuracy = None
    if opts.threshold is not None:
        correct = sum(1 for x in hv if x >= opts.threshold) + sum(1 for x in mv if x < opts.threshold)
        accuracy = correct / (len(hv) + len(mv))

    return EvalReport(
        auroc=auroc(pos, neg),
        roc_points=[(f, p) for _, f, p in table],
        roc_thresholds=thresholds,
        positive=opts.positive,
        score_field=opts.score_field,
        class_stats={"human": class_stats(hv, edges), "machine": class_stats(mv, edges)},
        histogram_edges=[float(e) for e in edges],
        msd_separation=msd_separation(human, machine, pairs),
        threshold=opts.threshold,
        accuracy_at_threshold=accuracy,
    )
