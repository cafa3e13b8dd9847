import json
import random
from pathlib import Path

import pytest

from varybalance.cli import build_parser, main, resolve_config
from varybalance.dataset import load_corpus, save_corpus
from varybalance.types import Label, TextSample, Variant

import oracles
from conftest import DATA, GOLDEN

PAIRED = DATA / "paired_small.jsonl"
MOCK = ["--rewriter", "mock", "--scorer", "ngram:builtin", "--k", "3", "--seed", "0"]


def run(argv, capsys=None):
    code = main([str(a) for a in argv])
    out = capsys.readouterr() if capsys is not None else None
    return code, out


def read_jsonl(path):
    return [json.loads(line) for line in Path(path).read_text().splitlines() if line.strip()]


def test_detect_matches_golden(tmp_path, fixture_corpus_path):
    code, _ = run(["detect", fixture_corpus_path, *MOCK, "--no-cache", "--run-dir", tmp_path / "r"])
    assert code == 0
    assert (tmp_path / "r" / "scores.jsonl").read_bytes() == (GOLDEN / "detect_fixture_scores.jsonl").read_bytes()
    manifest = json.loads((tmp_path / "r" / "manifest.json").read_text())
    assert manifest["status"] == "ok" and manifest["outputs"] == ["scores.jsonl"]
    assert set(manifest["inputs"]) == {"corpus"}


def test_detect_expansion_fields(tmp_path, fixture_corpus_path):
    code, _ = run(["detect", fixture_corpus_path, *MOCK, "--variant", "expansion", "--no-cache", "--run-dir", tmp_path / "r"])
    assert code == 0
    recs = read_jsonl(tmp_path / "r" / "scores.jsonl")
    assert len(recs) == 10
    for rec in recs:
        assert rec["variant"] == "expansion"
        assert rec["rho"] is not None and rec["score_e"] is not None


def test_detect_threshold_adds_prediction(tmp_path, fixture_corpus_path):
    code, _ = run(["detect", fixture_corpus_path, *MOCK, "--threshold", "6.0", "--no-cache", "--run-dir", tmp_path / "r"])
    assert code == 0
    for rec in read_jsonl(tmp_path / "r" / "scores.jsonl"):
        assert rec["prediction"] == ("human" if rec["score"] >= 6.0 else "machine")


def test_detect_warm_cache_no_calls(tmp_path, fixture_corpus_path):
    args = ["detect", fixture_corpus_path, *MOCK, "--cache-dir", tmp_path / "cache"]
    assert run([*args, "--run-dir", tmp_path / "a"])[0] == 0
    assert run([*args, "--run-dir", tmp_path / "b"])[0] == 0
    assert (tmp_path / "a" / "scores.jsonl").read_bytes() == (tmp_path / "b" / "scores.jsonl").read_bytes()
    counters = json.loads((tmp_path / "b" / "manifest.json").read_text())["counters"]
    assert counters["rewriter_calls"] == 0 and counters["scorer_calls"] == 0


def test_unreachable_provider_fails_cleanly(tmp_path, fixture_corpus_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"rewriter": {"max_retries": 0, "timeout": 2.0}}))
    code, out = run(
        [
            "detect", fixture_corpus_path, "--config", cfg, "--rewriter", "openai:some-model",
            "--rewriter-base-url", "http://127.0.0.1:9/v1", "--cache-dir", tmp_path / "cache",
            "--run-dir", tmp_path / "r",
        ],
        capsys,
    )
    assert code != 0
    assert not (tmp_path / "r" / "scores.jsonl").exists()
    assert "rewrite" in out.err
    manifest = json.loads((tmp_path / "r" / "manifest.json").read_text())
    assert manifest["status"] == "failed" and manifest["error"]


def make_scored(tmp_path, n=40, seed=3):
    rnd = random.Random(seed)
    samples, recs = [], []
    for i in range(n):
        label = Label.HUMAN if i % 2 == 0 else Label.MACHINE
        sid = f"s{i:03d}"
        samples.append(TextSample(sid, f"text {i}", label))
        score = round(rnd.gauss(1.0 if label is Label.HUMAN else 0.6, 0.4), 2)  # rounding creates ties
        recs.append({"sample_id": sid, "log_ppl_0": 1.0, "rewrite_log_ppls": [1.0], "msd": 0.0, "sign": 0,
                     "score": score, "variant": "base", "rho": None, "score_e": None})
    corpus = tmp_path / "labels.jsonl"
    save_corpus(corpus, samples)
    scores = tmp_path / "scores.jsonl"
    scores.write_text("".join(json.dumps(r) + "\n" for r in recs))
    pos = [r["score"] for r, s in zip(recs, samples) if s.label is Label.HUMAN]
    neg = [r["score"] for r, s in zip(recs, samples) if s.label is Label.MACHINE]
    return scores, corpus, oracles.pairwise_auroc(pos, neg)


def auroc_line(out):
    [line] = [ln for ln in out.splitlines() if ln.startswith("AUROC:")]
    return float(line.split(":", 1)[1])


def test_eval_auroc_matches_oracle(tmp_path, capsys):
    scores, labels, expected = make_scored(tmp_path)
    code, out = run(["eval", scores, "--labels", labels, "--run-dir", tmp_path / "r"], capsys)
    assert code == 0
    human = auroc_line(out.out)
    assert human == pytest.approx(expected, abs=1e-9)
    report = json.loads((tmp_path / "r" / "report.json").read_text())
    assert report["auroc"] == human and report["positive_class"] == "human"
    assert (tmp_path / "r" / "roc.csv").read_text().startswith("threshold,fpr,tpr\ninf,0.0,0.0\n")

    code, out = run(["eval", scores, "--labels", labels, "--positive", "machine", "--run-dir", tmp_path / "m"], capsys)
    assert code == 0
    assert auroc_line(out.out) == pytest.approx(1 - human, abs=1e-12)


def test_eval_calibration_split(tmp_path, capsys):
    scores, labels, _ = make_scored(tmp_path)
    code, out = run(["eval", scores, "--labels", labels, "--calibration-fraction", "0.25", "--run-dir", tmp_path / "r"], capsys)
    assert code == 0
    report = json.loads((tmp_path / "r" / "report.json").read_text())
    assert report["calibration_size"] == 10 and report["test_size"] == 30
    assert report["threshold"] is not None and "accuracy at threshold" in out.out


def test_eval_missing_label_names_id(tmp_path, capsys):
    scores, labels, _ = make_scored(tmp_path)
    save_corpus(labels, [s for s in load_corpus(labels) if s.id != "s007"])
    code, out = run(["eval", scores, "--labels", labels, "--run-dir", tmp_path / "r"], capsys)
    assert code != 0 and "s007" in out.err
    assert not (tmp_path / "r" / "report.json").exists()


def test_study_planted_fixture(tmp_path, capsys):
    assert run(["synth", tmp_path / "syn", "--pairs", "60", "--seed", "1"])[0] == 0
    table = tmp_path / "syn" / "table.json"
    code, out = run(
        ["study", tmp_path / "syn" / "paired.jsonl", "--rewriter", f"table:{table}", "--scorer", f"table:{table}",
         "--min-tokens", "1", "--variant", "expansion", "--no-cache", "--run-dir", tmp_path / "r"],
        capsys,
    )
    assert code == 0
    report = json.loads((tmp_path / "r" / "study.json").read_text())
    sep = report["msd_separation"]
    assert sep["pair_fraction"] == 1.0 and sep["paired"] and sep["n_pairs"] == 60
    assert sep["mean_msd_human"] > 0.2 > 0.05 > sep["mean_msd_machine"]
    assert report["auroc_expansion"] >= report["auroc_base"]
    assert "reference" in out.out


def test_study_identity_rewriter(tmp_path):
    code, _ = run(["study", PAIRED, "--rewriter", "identity", "--scorer", "ngram:builtin", "--no-cache", "--run-dir", tmp_path / "r"])
    assert code == 0
    report = json.loads((tmp_path / "r" / "study.json").read_text())
    assert report["msd_separation"]["pair_fraction"] == 0.0
    assert all(r["msd"] == 0.0 for r in read_jsonl(tmp_path / "r" / "scores.jsonl"))


def test_study_matches_golden(tmp_path):
    code, _ = run(["study", PAIRED, *MOCK, "--variant", "expansion", "--no-cache", "--run-dir", tmp_path / "r"])
    assert code == 0
    assert (tmp_path / "r" / "study.json").read_bytes() == (GOLDEN / "study_paired_small.json").read_bytes()


def test_study_with_generator(tmp_path):
    code, _ = run(["study", PAIRED, *MOCK, "--generator", "mock", "--cache-dir", tmp_path / "c", "--run-dir", tmp_path / "r"])
    assert code == 0
    ids = [r["sample_id"] for r in read_jsonl(tmp_path / "r" / "scores.jsonl")]
    assert ids[4:] == ["q1-gen", "q2-gen", "q3-gen", "q4-gen"]


def test_inputs_not_mutated(tmp_path, fixture_corpus_path):
    corpus = tmp_path / "corpus.jsonl"
    corpus.write_bytes(Path(fixture_corpus_path).read_bytes())
    before = corpus.read_bytes()
    assert run(["detect", corpus, *MOCK, "--no-cache", "--run-dir", tmp_path / "r"])[0] == 0
    assert corpus.read_bytes() == before


def test_fresh_run_dirs(tmp_path, fixture_corpus_path):
    for _ in range(2):
        assert run(["score", fixture_corpus_path, "--no-cache", "--out-dir", tmp_path / "runs"])[0] == 0
    dirs = sorted((tmp_path / "runs").iterdir())
    assert len(dirs) == 2
    assert all((d / "log_ppl.jsonl").exists() for d in dirs)


def test_rewrite_command(tmp_path, fixture_corpus_path):
    assert run(["rewrite", fixture_corpus_path, "--rewriter", "mock", "--k", "2", "--no-cache", "--run-dir", tmp_path / "r"])[0] == 0
    recs = read_jsonl(tmp_path / "r" / "rewrites.jsonl")
    assert len(recs) == 10


def parse(argv):
    return build_parser().parse_args(["detect", "corpus.jsonl", *argv])


def test_config_precedence(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"n_rewrites": 5, "variant": "expansion", "rho_cap": 50.0, "seed": 4}))
    env = {"VARYBALANCE_K": "7", "VARYBALANCE_RHO_CAP": "20", "VARYBALANCE_CACHE_DIR": str(tmp_path / "envcache")}
    resolved = resolve_config(parse(["--config", str(cfg), "--k", "9"]), env)
    assert resolved.n_rewrites == 9  # flag beats env and file
    assert resolved.rho_cap == 20.0  # env beats file
    assert resolved.variant is Variant.EXPANSION and resolved.seed == 4  # file beats defaults
    assert resolved.cache.directory == str(tmp_path / "envcache")
    assert resolve_config(parse([]), {}).n_rewrites == 3


def test_config_rejects_unknown_keys(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"n_rewritez": 5}))
    with pytest.raises(ValueError):
        resolve_config(parse(["--config", str(cfg)]), {})


def test_cache_stats(tmp_path, fixture_corpus_path, capsys):
    cache_dir = tmp_path / "cache"
    run(["detect", fixture_corpus_path, *MOCK, "--cache-dir", cache_dir, "--run-dir", tmp_path / "r"])
    capsys.readouterr()
    code, out = run(["cache", "stats", "--cache-dir", cache_dir], capsys)
    assert code == 0
    stats = json.loads(out.out)
    assert stats["entries"]["rewrite"] == 30
    assert stats["entries"]["score"] > 0 and stats["misses"] > 0
