"""Scoring math and the rewrite -> score -> predict pipeline.

The base score is ``exp(sign * msd) * log_ppl_0`` and the expansion score
``exp(sign * rho * msd) * log_ppl_0`` with ``rho = msd / var(rewrites)``.
Here ``msd`` is the mean squared deviation of the rewrites' log-PPLs from
the original's log-PPL (the original is the center, not the rewrite mean),
``sign`` says whether the original sits above or below the rewrites' mean,
and ``var`` is the population variance over the rewrites only. Higher
scores point to human authorship.
"""

from __future__ import annotations

import bisect
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from typing import Sequence

from .cache import DiskCache
from .errors import EmptyRewrites, NonFinite, StageError, TooFewRewrites
from .rewriter.base import RewriteProvider, rewrite_one
from .scorer.base import CachedScorer, ScorerProvider, log_ppl, score_tokens
from .types import DetectorConfig, Label, TextSample, VaryBalanceScore, Variant

logger = logging.getLogger(__name__)


def _check(rewrite_log_ppls: Sequence[float]) -> int:
    n = len(rewrite_log_ppls)
    if n == 0:
        raise EmptyRewrites("need at least one rewrite log-PPL")
    return n


def msd(log_ppl_0: float, rewrite_log_ppls: Sequence[float]) -> float:
    n = _check(rewrite_log_ppls)
    value = math.fsum((r - log_ppl_0) ** 2 for r in rewrite_log_ppls) / n
    if value == 0.0 and any(r != log_ppl_0 for r in rewrite_log_ppls):
        # squares underflowed; keep msd == 0 reserved for exact equality
        return math.ulp(0.0)
    return value


def sign_term(log_ppl_0: float, rewrite_log_ppls: Sequence[float]) -> int:
    n = _check(rewrite_log_ppls)
    diff = log_ppl_0 - math.fsum(rewrite_log_ppls) / n
    return (diff > 0) - (diff < 0)


def _scaled(exponent: float, log_ppl_0: float) -> float:
    try:
        value = math.exp(exponent) * log_ppl_0
    except OverflowError:
        raise NonFinite(f"exp({exponent}) overflows") from None
    if not math.isfinite(value):
        raise NonFinite(f"score is not finite (exponent {exponent})")
    return value


def base_score(log_ppl_0: float, rewrite_log_ppls: Sequence[float]) -> float:
    return _scaled(sign_term(log_ppl_0, rewrite_log_ppls) * msd(log_ppl_0, rewrite_log_ppls), log_ppl_0)


def expansion_coefficient(log_ppl_0: float, rewrite_log_ppls: Sequence[float], rho_cap: float = 1000.0) -> float:
    """``msd / var`` clamped to ``[0, rho_cap]``; zero variance maps to the cap."""
    n = len(rewrite_log_ppls)
    if n < 2:
        raise TooFewRewrites(f"expansion needs >= 2 rewrites, got {n}")
    mean = math.fsum(rewrite_log_ppls) / n
    var = math.fsum((r - mean) ** 2 for r in rewrite_log_ppls) / n
    if var == 0:
        return rho_cap
    return min(msd(log_ppl_0, rewrite_log_ppls) / var, rho_cap)


def expansion_score(log_ppl_0: float, rewrite_log_ppls: Sequence[float], rho_cap: float = 1000.0) -> tuple[float, float]:
    """Return ``(score_e, rho)``."""
    rho = expansion_coefficient(log_ppl_0, rewrite_log_ppls, rho_cap)
    m = msd(log_ppl_0, rewrite_log_ppls)
    s = sign_term(log_ppl_0, rewrite_log_ppls)
    return _scaled(s * rho * m, log_ppl_0), rho


def score_from_log_ppls(
    sample_id: str,
    log_ppl_0: float,
    rewrite_log_ppls: Sequence[float],
    variant: Variant = Variant.BASE,
    rho_cap: float = 1000.0,
) -> VaryBalanceScore:
    rewrites = tuple(float(x) for x in rewrite_log_ppls)
    rho = score_e = None
    if variant is Variant.EXPANSION:
        score_e, rho = expansion_score(log_ppl_0, rewrites, rho_cap)
    return VaryBalanceScore(
        sample_id=sample_id,
        log_ppl_0=log_ppl_0,
        rewrite_log_ppls=rewrites,
        msd=msd(log_ppl_0, rewrites),
        sign=sign_term(log_ppl_0, rewrites),
        score=base_score(log_ppl_0, rewrites),
        variant=variant,
        rho=rho,
        score_e=score_e,
    )


def classify(score: float, threshold: float) -> Label:
    return Label.HUMAN if score >= threshold else Label.MACHINE


def calibrate_threshold(human_scores: Sequence[float], machine_scores: Sequence[float]) -> float:
    """Threshold maximizing balanced accuracy under ``score >= t -> human``.

    Candidates are the observed scores; ties go to the smallest threshold.
    """
    if not human_scores or not machine_scores:
        raise ValueError("calibration needs scores from both classes")
    hs = sorted(human_scores)
    ms = sorted(machine_scores)
    best_t, best_bacc = None, -1.0
    for t in sorted(set(hs) | set(ms)):
        tpr = (len(hs) - bisect.bisect_left(hs, t)) / len(hs)
        tnr = bisect.bisect_left(ms, t) / len(ms)
        bacc = (tpr + tnr) / 2
        if bacc > best_bacc:
            best_t, best_bacc = t, bacc
    return float(best_t)


# -- pipeline ---------------------------------------------------------------


def _scorer_with_cache(scorer: ScorerProvider, cache: DiskCache | None) -> ScorerProvider:
    if cache is None or isinstance(scorer, CachedScorer):
        return scorer
    return CachedScorer(scorer, cache)


def detect_corpus(
    samples: Sequence[TextSample],
    cfg: DetectorConfig,
    rewriter: RewriteProvider,
    scorer: ScorerProvider,
    cache: DiskCache | None = None,
) -> list[VaryBalanceScore]:
    """Detect every sample, fanning provider calls out over ``cfg.max_inflight`` threads.

    All rewrites are fetched first, then every distinct text is scored
    once, then the math runs. Failures surface as :class:`StageError` for
    the first failing sample in input order.
    """
    scorer = _scorer_with_cache(scorer, cache)
    k = cfg.n_rewrites
    params = cfg.rewriter.params
    jobs = [(s, i) for s in samples for i in range(1, k + 1)]

    def do_rewrite(job: tuple[TextSample, int]) -> str | BaseException:
        sample, i = job
        try:
            return rewrite_one(
                sample.content, i, rewriter,
                prompt=cfg.rewriter.prompt, params=params, cache=cache,
                empty_retries=cfg.rewriter.empty_retries,
            )
        except Exception as exc:  # collected and re-raised in sample order
            return exc

    def do_score(text: str) -> float | BaseException:
        try:
            return log_ppl(score_tokens(text, scorer, min_tokens=cfg.min_tokens), min_tokens=cfg.min_tokens)
        except Exception as exc:
            return exc

    with ThreadPoolExecutor(max_workers=cfg.max_inflight) as pool:
        rewritten = dict(zip([(s.id, i) for s, i in jobs], pool.map(do_rewrite, jobs)))
        texts: list[str] = []
        seen: set[str] = set()
        for s in samples:
            for t in [s.content] + [rewritten[(s.id, i)] for i in range(1, k + 1)]:
                if isinstance(t, str) and t not in seen:
                    seen.add(t)
                    texts.append(t)
        scored = dict(zip(texts, pool.map(do_score, texts)))

    results = []
    for s in samples:
        for i in range(1, k + 1):
            r = rewritten[(s.id, i)]
            if isinstance(r, BaseException):
                raise StageError(s.id, f"rewrite {i}", r) from r
        l0 = scored[s.content]
        if isinstance(l0, BaseException):
            raise StageError(s.id, "score original", l0) from l0
        rewrite_lps = []
        for i in range(1, k + 1):
            v = scored[rewritten[(s.id, i)]]
            if isinstance(v, BaseException):
                raise StageError(s.id, f"score rewrite {i}", v) from v
            rewrite_lps.append(v)
        try:
            results.append(score_from_log_ppls(s.id, l0, rewrite_lps, cfg.variant, cfg.rho_cap))
        except Exception as exc:
            raise StageError(s.id, "predict", exc) from exc
    return results


def detect(
    sample: TextSample,
    cfg: DetectorConfig,
    rewriter: RewriteProvider,
    scorer: ScorerProvider,
    cache: DiskCache | None = None,
) -> VaryBalanceScore:
    return detect_corpus([sample], cfg, rewriter, scorer, cache)[0]
