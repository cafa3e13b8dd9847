import json

import pytest
from hypothesis import given, settings, strategies as st

from varybalance.dataset import (
    PairedSample,
    generate_machine_answers,
    load_corpus,
    load_paired,
    save_corpus,
    save_paired,
    split,
)
from varybalance.errors import DuplicateId, ParseError, TooFewSamples
from varybalance.rewriter import MockRewriter
from varybalance.types import GenerationParams, Label, TextSample


def write_lines(path, lines):
    path.write_text("".join(line + "\n" for line in lines), encoding="utf-8")
    return path


def test_empty_file(tmp_path):
    assert load_corpus(write_lines(tmp_path / "c.jsonl", [])) == []


def test_singleton(tmp_path):
    p = write_lines(tmp_path / "c.jsonl", ['{"id": "a", "text": "hello there", "label": "human"}'])
    [s] = load_corpus(p)
    assert (s.id, s.content, s.label, s.language) == ("a", "hello there", Label.HUMAN, "en")


def test_missing_text_names_line(tmp_path):
    p = write_lines(tmp_path / "c.jsonl", ['{"id": "a", "text": "ok"}', '{"id": "b"}'])
    with pytest.raises(ParseError) as err:
        load_corpus(p)
    assert err.value.line == 2 and "line 2" in str(err.value)


def test_bad_json_names_line(tmp_path):
    p = write_lines(tmp_path / "c.jsonl", ['{"id": "a", "text": "ok"}', "", "{nope"])
    with pytest.raises(ParseError) as err:
        load_corpus(p)
    assert err.value.line == 3


def test_bad_label(tmp_path):
    p = write_lines(tmp_path / "c.jsonl", ['{"id": "a", "text": "ok", "label": "robot"}'])
    with pytest.raises(ParseError):
        load_corpus(p)


def test_duplicate_id(tmp_path):
    p = write_lines(tmp_path / "c.jsonl", ['{"id": "a", "text": "x"}', '{"id": "a", "text": "y"}'])
    with pytest.raises(DuplicateId, match="'a'"):
        load_corpus(p)


def test_unlabeled_loads_as_unknown(tmp_path):
    p = write_lines(tmp_path / "c.jsonl", ['{"id": "a", "text": "x", "label": null}'])
    assert load_corpus(p)[0].label is Label.UNKNOWN


texts = st.text(min_size=1, max_size=40).filter(lambda t: t.strip())
labels = st.sampled_from(list(Label))


@settings(max_examples=50)
@given(st.lists(st.tuples(texts, labels, st.sampled_from(["en", "zh"])), max_size=12))
def test_round_trip(tmp_path_factory, rows):
    samples = [TextSample(f"s{i}", t, lb, lang, "src") for i, (t, lb, lang) in enumerate(rows)]
    p = tmp_path_factory.mktemp("rt") / "c.jsonl"
    save_corpus(p, samples)
    loaded = load_corpus(p)
    assert [s.to_record() for s in loaded] == [s.to_record() for s in samples]
    save_corpus(p, loaded)
    assert [s.to_record() for s in load_corpus(p)] == [s.to_record() for s in samples]


def test_bundled_fixture(fixture_corpus_path):
    samples = load_corpus(fixture_corpus_path)
    assert len(samples) == 10
    assert sum(s.label is Label.HUMAN for s in samples) == 5


def corpus(n_h, n_m):
    return [TextSample(f"h{i:03d}", f"human {i}", Label.HUMAN) for i in range(n_h)] + [
        TextSample(f"m{i:03d}", f"machine {i}", Label.MACHINE) for i in range(n_m)
    ]


def test_split_sizes_and_stratification():
    cal, test = split(corpus(50, 50), 0.2, seed=7)
    assert len(cal) == 20 and len(test) == 80
    assert sum(s.label is Label.HUMAN for s in cal) == 10
    assert {s.id for s in cal}.isdisjoint(s.id for s in test)


def test_split_deterministic_and_order_free():
    data = corpus(30, 20)
    a = split(data, 0.3, seed=1)
    b = split(list(reversed(data)), 0.3, seed=1)
    assert {s.id for s in a[0]} == {s.id for s in b[0]}
    c = split(data, 0.3, seed=2)
    assert {s.id for s in a[0]} != {s.id for s in c[0]}


@pytest.mark.parametrize("fraction", [0.0, 1.0, -0.1, 1.5])
def test_split_bad_fraction(fraction):
    with pytest.raises(ValueError):
        split(corpus(10, 10), fraction)


def test_split_too_few():
    with pytest.raises(TooFewSamples):
        split(corpus(1, 10), 0.2)


def test_generate_deterministic_and_cached(cache):
    qs = ["What is rain?", "Why do cats purr?", "How do tides work?"]
    gen = MockRewriter(seed=3)
    first = generate_machine_answers(qs, gen, GenerationParams(seed=3), cache=cache)
    assert len({s.id for s in first}) == 3
    assert all(s.label is Label.MACHINE and s.content.strip() for s in first)
    calls = gen.calls.value
    again = MockRewriter(seed=3)
    second = generate_machine_answers(qs, again, GenerationParams(seed=3), cache=cache)
    assert again.calls.value == 0 and calls == 3
    assert [s.content for s in second] == [s.content for s in first]
    third = generate_machine_answers(qs, MockRewriter(seed=3), GenerationParams(seed=3))
    assert [s.content for s in third] == [s.content for s in first]


def test_paired_round_trip(tmp_path):
    pairs = [
        PairedSample(
            f"q{i}",
            f"question {i}?",
            TextSample(f"q{i}-h", f"human answer {i}", Label.HUMAN),
            TextSample(f"q{i}-m", f"machine answer {i}", Label.MACHINE),
        )
        for i in range(3)
    ]
    p = tmp_path / "paired.jsonl"
    save_paired(p, pairs)
    assert load_paired(p) == pairs


def test_paired_missing_partner(tmp_path):
    rec = {"id": "a", "text": "t", "pair_id": "p1", "question": "q?", "role": "human"}
    p = write_lines(tmp_path / "p.jsonl", [json.dumps(rec)])
    with pytest.raises(ParseError, match="machine"):
        load_paired(p)
