import pytest
from hypothesis import given, strategies as st

from varybalance.errors import InvalidText
from varybalance.types import (
    DEFAULT_PROMPT,
    DetectorConfig,
    GenerationParams,
    Label,
    RewriteBundle,
    TextSample,
    TokenLogProbs,
    VaryBalanceScore,
    Variant,
)

nonblank = st.text(min_size=1).filter(lambda s: s.strip())
finite = st.floats(min_value=0, max_value=50, allow_nan=False)


@given(nonblank, nonblank, st.sampled_from(list(Label)), st.text(max_size=8), st.text(max_size=20))
def test_text_sample_round_trip(sid, content, label, lang, source):
    s = TextSample(sid, content, label, lang or "en", source)
    back = TextSample.from_record(s.to_record())
    assert back == s
    assert (back.label, back.language, back.source) == (s.label, s.language, s.source)


def test_text_sample_equality_is_id_plus_content():
    a = TextSample("x", "hello world", Label.HUMAN, source="a")
    b = TextSample("x", "hello world", Label.MACHINE, source="b")
    assert a == b and hash(a) == hash(b)
    assert a != TextSample("x", "hello there")
    assert a != TextSample("y", "hello world")


@pytest.mark.parametrize("content", ["", "   ", "\n\t"])
def test_text_sample_rejects_blank(content):
    with pytest.raises(InvalidText):
        TextSample("a", content)


def test_text_sample_rejects_empty_id():
    with pytest.raises(ValueError):
        TextSample("", "text")


def test_label_record_form():
    assert Label.parse(None) is Label.UNKNOWN
    assert Label.parse("Human") is Label.HUMAN
    assert Label.UNKNOWN.to_record() is None
    with pytest.raises(ValueError):
        Label.parse("robot")


@given(st.lists(nonblank, min_size=1, max_size=6), st.one_of(st.none(), st.floats(0, 2)), st.one_of(st.none(), st.integers(0, 99)))
def test_bundle_round_trip(texts, temperature, seed):
    b = RewriteBundle("s1", "mock/x", tuple(enumerate(texts, start=1)), params=GenerationParams(temperature, 256, seed))
    assert b.prompt == DEFAULT_PROMPT
    assert RewriteBundle.from_record(b.to_record()) == b


def test_bundle_invariants():
    with pytest.raises(ValueError):
        RewriteBundle("s", "r", ())
    with pytest.raises(ValueError):
        RewriteBundle("s", "r", ((2, "a"),))
    with pytest.raises(InvalidText):
        RewriteBundle("s", "r", ((1, "a"), (2, " ")))


def test_default_prompt_is_exact():
    assert DEFAULT_PROMPT == "Revise this text."


@given(st.lists(st.tuples(nonblank, st.floats(max_value=0, allow_nan=False, allow_infinity=False)), min_size=1), st.integers(0, 3))
def test_token_logprobs_round_trip(pairs, skipped):
    t = TokenLogProbs("ngram/abc", tuple(p[0] for p in pairs), tuple(p[1] for p in pairs), skipped)
    assert TokenLogProbs.from_record(t.to_record()) == t


@pytest.mark.parametrize("bad", [0.1, float("nan"), float("-inf")])
def test_token_logprobs_rejects_invalid(bad):
    with pytest.raises(ValueError):
        TokenLogProbs("s", ("a",), (bad,))


def test_token_logprobs_length_mismatch():
    with pytest.raises(ValueError):
        TokenLogProbs("s", ("a", "b"), (-1.0,))


@given(finite, st.lists(finite, min_size=1, max_size=8), st.sampled_from([-1, 0, 1]), st.booleans())
def test_score_round_trip(l0, rws, sign, expansion):
    s = VaryBalanceScore(
        "id", l0, tuple(rws), msd=0.5, sign=sign, score=1.0,
        variant=Variant.EXPANSION if expansion else Variant.BASE,
        rho=2.0 if expansion else None, score_e=3.0 if expansion else None,
    )
    assert VaryBalanceScore.from_record(s.to_record()) == s


def test_score_rejects_non_finite():
    with pytest.raises(ValueError):
        VaryBalanceScore("id", 1.0, (1.0,), 0.0, 0, float("inf"))
    with pytest.raises(ValueError):
        VaryBalanceScore("id", 1.0, (1.0,), 0.0, 2, 1.0)


def test_config_defaults_and_bounds():
    cfg = DetectorConfig()
    assert (cfg.n_rewrites, cfg.variant, cfg.rho_cap, cfg.min_tokens) == (3, Variant.BASE, 1000.0, 8)
    for bad in [dict(n_rewrites=0), dict(rho_cap=0), dict(min_tokens=0), dict(max_inflight=0),
                dict(variant="expansion", n_rewrites=1), dict(threshold=float("nan"))]:
        with pytest.raises(ValueError):
            DetectorConfig(**bad)


def test_config_round_trip():
    cfg = DetectorConfig(n_rewrites=5, variant="expansion", threshold=2.5)
    assert cfg.variant is Variant.EXPANSION
    assert DetectorConfig.from_record(cfg.to_record()) == cfg
    with pytest.raises(ValueError):
        DetectorConfig.from_record({"nope": 1})
