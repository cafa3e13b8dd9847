"""Command-line entry point: ``varybalance {detect,eval,study,rewrite,score,cache,fit-ngram,synth}``.

Configuration is resolved as flags > environment (``VARYBALANCE_*``) >
``--config`` JSON file > built-in defaults. Every command writes its
outputs into a fresh run directory (``<out-dir>/<UTC timestamp>-<digest>``)
together with ``manifest.json``; stdout carries only a short summary.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import os
import sys
import time
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Callable, Mapping, Sequence

from . import __version__
from .cache import CACHE_DIR_ENV, DiskCache, default_cache_dir
from .dataset import generate_machine_answers, load_corpus, load_paired, split, write_jsonl
from .detector import calibrate_threshold, classify, detect_corpus
from .errors import StageError, UnlabeledSample, VaryBalanceError
from .evaluation import EvalOptions, evaluate, score_value
from .http import InflightLimiter
from .providers import build_rewriter, build_scorer
from .rewriter import rewrite_k
from .scorer import fit_ngram, log_ppl, score_tokens
from .scorer.base import CachedScorer
from .synthetic import make_synthetic_study
from .types import DetectorConfig, Label, TextSample, VaryBalanceScore, Variant

logger = logging.getLogger("varybalance")

REFERENCE_STUDY = {"mean_msd_human": 0.34, "mean_msd_machine": 0.009, "pair_fraction": 0.96}

# flag dest -> (config path, parser) ; env var is VARYBALANCE_<DEST upper>
_SETTINGS: dict[str, tuple[tuple[str, ...], Callable[[str], Any]]] = {
    "k": (("n_rewrites",), int),
    "variant": (("variant",), str),
    "rho_cap": (("rho_cap",), float),
    "min_tokens": (("min_tokens",), int),
    "threshold": (("threshold",), float),
    "seed": (("seed",), int),
    "max_inflight": (("max_inflight",), int),
    "scorer": (("scorer", "spec"), str),
    "scorer_base_url": (("scorer", "base_url"), str),
    "rewriter": (("rewriter", "spec"), str),
    "rewriter_base_url": (("rewriter", "base_url"), str),
    "prompt": (("rewriter", "prompt"), str),
    "temperature": (("rewriter", "temperature"), float),
    "max_tokens": (("rewriter", "max_tokens"), int),
    "cache_dir": (("cache", "directory"), str),
}
_ENV_OVERRIDES = {"cache_dir": CACHE_DIR_ENV}


def _assign(rec: dict[str, Any], path: tuple[str, ...], value: Any) -> None:
    for part in path[:-1]:
        rec = rec.setdefault(part, {})
    rec[path[-1]] = value


def resolve_config(args: argparse.Namespace, environ: Mapping[str, str] | None = None) -> DetectorConfig:
    environ = os.environ if environ is None else environ
    rec = DetectorConfig().to_record()
    if getattr(args, "config", None):
        file_rec = json.loads(Path(args.config).read_text(encoding="utf-8"))
        for key, value in file_rec.items():
            if isinstance(value, dict) and isinstance(rec.get(key), dict):
                rec[key].update(value)
            else:
                rec[key] = value
    for dest, (path, parse) in _SETTINGS.items():
        env_name = _ENV_OVERRIDES.get(dest, f"VARYBALANCE_{dest.upper()}")
        if env_name in environ and environ[env_name] != "":
            _assign(rec, path, parse(environ[env_name]))
    for dest, (path, _) in _SETTINGS.items():
        value = getattr(args, dest, None)
        if value is not None:
            _assign(rec, path, value)
    if getattr(args, "no_cache", False):
        rec["cache"]["enabled"] = False
    return DetectorConfig.from_record(rec)


# -- run bookkeeping --------------------------------------------------------


def file_digest(path: str | os.PathLike[str]) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _now() -> str:
    return datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%S.%fZ")


@dataclass
class Run:
    command: str
    cfg: DetectorConfig
    out_dir: Path
    inputs: dict[str, str]
    run_dir: Path | None = None
    started_at: str = field(default_factory=_now)
    providers: dict[str, str] = field(default_factory=dict)
    counters: dict[str, int] = field(default_factory=dict)

    def open(self, explicit: str | None = None) -> Path:
        if explicit:
            self.run_dir = Path(explicit)
        else:
            blob = json.dumps({"command": self.command, "config": self.cfg.to_record(), "inputs": self.inputs}, sort_keys=True)
            digest = hashlib.sha256(blob.encode("utf-8")).hexdigest()[:8]
            stamp = datetime.now(timezone.utc).strftime("%Y%m%dT%H%M%SZ")
            base = self.out_dir / f"{stamp}-{digest}"
            candidate, n = base, 1
            while candidate.exists():
                candidate = base.with_name(f"{base.name}-{n}")
                n += 1
            self.run_dir = candidate
        self.run_dir.mkdir(parents=True, exist_ok=True)
        return self.run_dir

    def manifest(self, status: str, error: str | None = None, outputs: Sequence[str] = ()) -> dict[str, Any]:
        return {
            "tool": "varybalance",
            "tool_version": __version__,
            "command": self.command,
            "status": status,
            "error": error,
            "config": self.cfg.to_record(),
            "providers": self.providers,
            "inputs": self.inputs,
            "outputs": list(outputs),
            "counters": self.counters,
            "started_at": self.started_at,
            "finished_at": _now(),
        }

    def write_manifest(self, status: str, error: str | None = None, outputs: Sequence[str] = ()) -> None:
        assert self.run_dir is not None
        _write_text(self.run_dir / "manifest.json", json.dumps(self.manifest(status, error, outputs), indent=2, sort_keys=True) + "\n")


def _write_text(path: Path, text: str) -> None:
    tmp = path.with_name(f".{path.name}.tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


class Session:
    """Providers, cache and counters for one command invocation."""

    def __init__(self, cfg: DetectorConfig) -> None:
        self.cfg = cfg
        self.limiter = InflightLimiter(cfg.max_inflight)
        self.cache = None
        if cfg.cache.enabled:
            self.cache = DiskCache(cfg.cache.directory or default_cache_dir())
        self._rewriter = None
        self._scorer = None

    @property
    def rewriter(self):
        if self._rewriter is None:
            self._rewriter = build_rewriter(self.cfg, self.limiter)
        return self._rewriter

    @property
    def scorer(self):
        if self._scorer is None:
            self._scorer = build_scorer(self.cfg, self.limiter)
        return self._scorer

    def describe(self, run: Run) -> None:
        if self._rewriter is not None:
            run.providers["rewriter"] = self._rewriter.rewriter_id
            run.counters["rewriter_calls"] = self._rewriter.calls.value
        if self._scorer is not None:
            run.providers["scorer"] = self._scorer.scorer_id
            run.counters["scorer_calls"] = self._scorer.calls.value
        if self.cache is not None:
            run.providers["cache_dir"] = str(self.cache.root)
            run.counters["cache_hits"] = self.cache.hits
            run.counters["cache_misses"] = self.cache.misses

    def close(self) -> None:
        if self.cache is not None:
            self.cache.flush_stats()


def _score_records(scores: Sequence[VaryBalanceScore], threshold: float | None, field_name: str = "score") -> list[dict]:
    out = []
    for s in scores:
        rec = s.to_record()
        if threshold is not None:
            rec["prediction"] = classify(score_value(s, field_name), threshold).value
        out.append(rec)
    return out


def _run_command(args: argparse.Namespace, command: str, inputs: dict[str, str], body: Callable[[Run, Session], list[str]]) -> int:
    cfg = resolve_config(args)
    run = Run(command, cfg, Path(args.out_dir), inputs)
    run.open(args.run_dir)
    session = Session(cfg)
    try:
        outputs = body(run, session)
    except (VaryBalanceError, ValueError, OSError) as exc:
        session.describe(run)
        stage = exc.stage if isinstance(exc, StageError) else command
        run.write_manifest("failed", f"{type(exc).__name__}: {exc}")
        print(f"error [{stage}]: {exc}", file=sys.stderr)
        print(f"manifest: {run.run_dir / 'manifest.json'}", file=sys.stderr)
        return 1
    else:
        session.describe(run)
        run.write_manifest("ok", outputs=outputs)
        print(f"run dir: {run.run_dir}")
        return 0
    finally:
        session.close()


# -- commands ---------------------------------------------------------------


def cmd_detect(args: argparse.Namespace) -> int:
    def body(run: Run, session: Session) -> list[str]:
        samples = load_corpus(args.corpus)
        scores = detect_corpus(samples, run.cfg, session.rewriter, session.scorer, session.cache)
        field_name = "score_e" if run.cfg.variant is Variant.EXPANSION else "score"
        write_jsonl(run.run_dir / "scores.jsonl", _score_records(scores, run.cfg.threshold, field_name))
        print(f"scored {len(scores)} samples ({run.cfg.variant.value}, k={run.cfg.n_rewrites})")
        return ["scores.jsonl"]

    return _run_command(args, "detect", {"corpus": file_digest(args.corpus)}, body)


def _load_scores(path: str) -> list[VaryBalanceScore]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                out.append(VaryBalanceScore.from_record(json.loads(line)))
    return out


def roc_csv(rows: Sequence[tuple[float, float, float]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["threshold", "fpr", "tpr"])
    for t, f, p in rows:
        w.writerow([repr(t), repr(f), repr(p)])
    return buf.getvalue()


def cmd_eval(args: argparse.Namespace) -> int:
    def body(run: Run, session: Session) -> list[str]:
        scores = _load_scores(args.scores)
        labels = {s.id: s.label for s in load_corpus(args.labels)}
        for s in scores:
            if labels.get(s.sample_id, Label.UNKNOWN) is Label.UNKNOWN:
                raise UnlabeledSample(s.sample_id)
        positive = Label(args.positive)
        threshold = run.cfg.threshold
        extra: dict[str, Any] = {}
        eval_scores = scores
        if args.calibration_fraction is not None:
            by_id = {s.sample_id: s for s in scores}
            labeled = [TextSample(sid, "x", labels[sid]) for sid in by_id]
            calib, test = split(labeled, args.calibration_fraction, run.cfg.seed)
            threshold = calibrate_threshold(
                [score_value(by_id[s.id], args.score_field) for s in calib if s.label is Label.HUMAN],
                [score_value(by_id[s.id], args.score_field) for s in calib if s.label is Label.MACHINE],
            )
            eval_scores = [by_id[s.id] for s in test]
            extra = {"calibration_size": len(calib), "test_size": len(test)}
        report = evaluate(eval_scores, labels, EvalOptions(positive=positive, score_field=args.score_field, threshold=threshold))
        rec = report.to_record()
        rec.update(extra)
        _write_text(run.run_dir / "report.json", json.dumps(rec, indent=2, sort_keys=True) + "\n")
        _write_text(run.run_dir / "roc.csv", roc_csv(report.roc_rows()))
        print(f"AUROC: {report.auroc!r}")
        if report.accuracy_at_threshold is not None:
            print(f"accuracy at threshold {threshold!r}: {report.accuracy_at_threshold!r}")
        return ["report.json", "roc.csv"]

    inputs = {"scores": file_digest(args.scores), "labels": file_digest(args.labels)}
    return _run_command(args, "eval", inputs, body)


def study_summary(report: dict[str, Any]) -> str:
    sep = report["msd_separation"]
    ref = REFERENCE_STUDY
    lines = [
        f"{'':24}{'observed':>12}{'reference':>12}",
        f"{'mean MSD (human)':24}{sep['mean_msd_human']:>12.4f}{ref['mean_msd_human']:>12}",
        f"{'mean MSD (machine)':24}{sep['mean_msd_machine']:>12.4f}{ref['mean_msd_machine']:>12}",
        f"{'pairs human > machine':24}{sep['pair_fraction']:>12.2%}{ref['pair_fraction']:>12.0%}",
        f"AUROC base: {report['auroc_base']:.4f}",
    ]
    if report.get("auroc_expansion") is not None:
        lines.append(f"AUROC expansion: {report['auroc_expansion']:.4f}")
    return "\n".join(lines)


def cmd_study(args: argparse.Namespace) -> int:
    def body(run: Run, session: Session) -> list[str]:
        pairs = load_paired(args.paired)
        humans = [p.human_answer for p in pairs]
        if args.generator:
            gen_cfg = run.cfg.merged(rewriter=replace(run.cfg.rewriter, spec=args.generator))
            generator = build_rewriter(gen_cfg, session.limiter)
            machines = generate_machine_answers([p.question for p in pairs], generator, gen_cfg.rewriter.params, cache=session.cache)
            machines = [TextSample(f"{p.pair_id}-gen", m.content, Label.MACHINE, m.language, m.source) for p, m in zip(pairs, machines)]
            run.providers["generator"] = generator.rewriter_id
            run.counters["generator_calls"] = generator.calls.value
        else:
            machines = [p.machine_answer for p in pairs]
        samples = humans + machines
        scores = detect_corpus(samples, run.cfg, session.rewriter, session.scorer, session.cache)
        labels = {s.id: s.label for s in samples}
        aligned = [(h.id, m.id) for h, m in zip(humans, machines)]
        base = evaluate(scores, labels, EvalOptions(score_field="score"), pairs=aligned)
        report = {
            "n_pairs": len(pairs),
            "k": run.cfg.n_rewrites,
            "msd_separation": base.msd_separation.to_record(),
            "reference": REFERENCE_STUDY,
            "auroc_base": base.auroc,
            "auroc_expansion": None,
            "class_stats_base": {k: v.to_record() for k, v in base.class_stats.items()},
        }
        if run.cfg.variant is Variant.EXPANSION:
            report["auroc_expansion"] = evaluate(scores, labels, EvalOptions(score_field="score_e"), pairs=aligned).auroc
        write_jsonl(run.run_dir / "scores.jsonl", _score_records(scores, None))
        _write_text(run.run_dir / "study.json", json.dumps(report, indent=2, sort_keys=True) + "\n")
        print(study_summary(report))
        return ["scores.jsonl", "study.json"]

    return _run_command(args, "study", {"paired": file_digest(args.paired)}, body)


def cmd_rewrite(args: argparse.Namespace) -> int:
    def body(run: Run, session: Session) -> list[str]:
        samples = load_corpus(args.corpus)
        bundles = [
            rewrite_k(s, run.cfg.n_rewrites, session.rewriter, run.cfg.rewriter.prompt, run.cfg.rewriter.params,
                      cache=session.cache, empty_retries=run.cfg.rewriter.empty_retries,
                      max_workers=run.cfg.max_inflight)
            for s in samples
        ]
        write_jsonl(run.run_dir / "rewrites.jsonl", (b.to_record() for b in bundles))
        print(f"rewrote {len(bundles)} samples x {run.cfg.n_rewrites}")
        return ["rewrites.jsonl"]

    return _run_command(args, "rewrite", {"corpus": file_digest(args.corpus)}, body)


def cmd_score(args: argparse.Namespace) -> int:
    def body(run: Run, session: Session) -> list[str]:
        samples = load_corpus(args.corpus)
        scorer = session.scorer if session.cache is None else CachedScorer(session.scorer, session.cache)
        out = []
        for s in samples:
            try:
                tlp = score_tokens(s.content, scorer, min_tokens=run.cfg.min_tokens)
            except VaryBalanceError as exc:
                raise StageError(s.id, "score", exc) from exc
            out.append({
                "id": s.id,
                "scorer_id": tlp.scorer_id,
                "n_tokens": len(tlp),
                "skipped_prefix": tlp.skipped_prefix,
                "log_ppl": log_ppl(tlp, min_tokens=run.cfg.min_tokens),
            })
        write_jsonl(run.run_dir / "log_ppl.jsonl", out)
        print(f"scored {len(out)} samples")
        return ["log_ppl.jsonl"]

    return _run_command(args, "score", {"corpus": file_digest(args.corpus)}, body)


def cmd_cache_stats(args: argparse.Namespace) -> int:
    cfg = resolve_config(args)
    cache = DiskCache(cfg.cache.directory or default_cache_dir())
    print(json.dumps(cache.stats(), indent=2, sort_keys=True))
    return 0


def cmd_fit_ngram(args: argparse.Namespace) -> int:
    samples = load_corpus(args.corpus)
    model = fit_ngram([s.content for s in samples], order=args.order, smoothing=args.smoothing, tokenizer=args.tokenizer)
    model.save(args.output)
    print(f"wrote {args.output} ({model.scorer_id}, |V|={len(model.vocabulary)})")
    return 0


def cmd_synth(args: argparse.Namespace) -> int:
    from .dataset import save_paired

    study = make_synthetic_study(n_pairs=args.pairs, k=args.k, seed=args.seed)
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    save_paired(out / "paired.jsonl", study.pairs)
    write_jsonl(out / "corpus.jsonl", (s.to_record() for s in study.samples))
    study.table.save(out / "table.json")
    print(f"wrote {len(study.pairs)} pairs to {out} (use --rewriter table:{out / 'table.json'} --scorer table:{out / 'table.json'})")
    return 0


# -- parser -----------------------------------------------------------------


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("configuration")
    g.add_argument("--config", help="JSON config file")
    g.add_argument("--scorer", help="ngram:builtin | ngram:<model.json> | openai:<model> | table:<fixture.json>")
    g.add_argument("--scorer-base-url")
    g.add_argument("--rewriter", help="mock | identity | openai:<model> | table:<fixture.json>")
    g.add_argument("--rewriter-base-url")
    g.add_argument("--prompt", help="rewrite instruction (default: 'Revise this text.')")
    g.add_argument("--temperature", type=float)
    g.add_argument("--max-tokens", type=int)
    g.add_argument("--k", type=int, help="rewrites per text")
    g.add_argument("--variant", choices=[v.value for v in Variant])
    g.add_argument("--rho-cap", type=float)
    g.add_argument("--min-tokens", type=int)
    g.add_argument("--threshold", type=float)
    g.add_argument("--seed", type=int)
    g.add_argument("--max-inflight", type=int)
    g.add_argument("--cache-dir")
    g.add_argument("--no-cache", action="store_true")
    g.add_argument("--out-dir", default="runs", help="parent directory for run directories")
    g.add_argument("--run-dir", help="write into this exact directory instead of a fresh one")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="varybalance", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("detect", help="score every sample of a corpus")
    p.add_argument("corpus")
    _add_run_flags(p)
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("eval", help="AUROC, ROC CSV and class statistics for a scores file")
    p.add_argument("scores")
    p.add_argument("--labels", required=True, help="corpus file providing labels by id")
    p.add_argument("--positive", choices=["human", "machine"], default="human")
    p.add_argument("--score-field", default="score", choices=["score", "score_e", "log_ppl_0", "msd"])
    p.add_argument("--calibration-fraction", type=float, help="calibrate a threshold on this share of samples, evaluate on the rest")
    _add_run_flags(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("study", help="MSD separation study on a paired corpus")
    p.add_argument("paired")
    p.add_argument("--generator", help="regenerate machine answers from the questions with this provider spec")
    _add_run_flags(p)
    p.set_defaults(func=cmd_study)

    p = sub.add_parser("rewrite", help="produce k rewrites per sample")
    p.add_argument("corpus")
    _add_run_flags(p)
    p.set_defaults(func=cmd_rewrite)

    p = sub.add_parser("score", help="log-perplexity of every sample")
    p.add_argument("corpus")
    _add_run_flags(p)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("cache", help="cache maintenance")
    csub = p.add_subparsers(dest="cache_command", required=True)
    c = csub.add_parser("stats", help="entry counts and hit rates")
    c.add_argument("--cache-dir")
    c.add_argument("--config")
    c.set_defaults(func=cmd_cache_stats)

    p = sub.add_parser("fit-ngram", help="fit an n-gram scorer on a corpus")
    p.add_argument("corpus")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--order", type=int, default=2, choices=[1, 2, 3])
    p.add_argument("--smoothing", type=float, default=1.0)
    p.add_argument("--tokenizer", choices=["whitespace", "character"], default="whitespace")
    p.set_defaults(func=cmd_fit_ngram)

    p = sub.add_parser("synth", help="write a synthetic paired corpus with planted log-PPLs")
    p.add_argument("output")
    p.add_argument("--pairs", type=int, default=400)
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    start = time.perf_counter()
    try:
        return args.func(args)
    except (VaryBalanceError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    finally:
        logger.debug("finished in %.2fs", time.perf_counter() - start)


if __name__ == "__main__":
    sys.exit(main())
