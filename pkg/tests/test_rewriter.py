import json

import httpx
import pytest

from varybalance.cache import DiskCache
from varybalance.errors import EmptyRewrite
from varybalance.rewriter import (
    IdentityRewriter,
    MockRewriter,
    OpenAIChatRewriter,
    mock_generate,
    mock_rewrite,
    rewrite_k,
)
from varybalance.types import DEFAULT_PROMPT, GenerationParams, TextSample

THREE = "The big dog ran home. It was very quick about it. People often think dogs are good."


def test_mock_rewrite_degenerate_input():
    assert mock_rewrite("a.", 1, 0) == "a."


def test_mock_rewrite_deterministic():
    assert mock_rewrite(THREE, 1, 0) == mock_rewrite(THREE, 1, 0)


def test_mock_rewrite_indices_differ():
    outs = {mock_rewrite(THREE, i, 0) for i in (1, 2)}
    assert len(outs) == 2


@pytest.mark.parametrize("index", range(1, 8))
def test_mock_rewrite_changes_perturbable_text(index):
    out = mock_rewrite(THREE, index, 3)
    assert out.strip() and out != THREE


def test_mock_rewrite_seed_matters():
    assert {mock_rewrite(THREE, 1, s) for s in range(5)} != {mock_rewrite(THREE, 1, 0)}


def test_mock_generate_deterministic():
    q = "Why is the sky blue?"
    assert mock_generate(q) == mock_generate(q)
    assert len(mock_generate(q).split()) >= 8


def sample(text=THREE):
    return TextSample("s1", text)


def test_rewrite_k_identity():
    b = rewrite_k(sample(), 1, IdentityRewriter())
    assert b.rewrites == ((1, THREE),)
    assert b.prompt == DEFAULT_PROMPT


def test_rewrite_k_mock_three_distinct():
    a = rewrite_k(sample(), 3, MockRewriter(seed=0))
    b = rewrite_k(sample(), 3, MockRewriter(seed=0))
    assert a == b
    assert len(set(a.texts)) == 3
    assert [i for i, _ in a.rewrites] == [1, 2, 3]


def test_rewrites_are_of_the_original_not_chained():
    class Recorder(MockRewriter):
        def __init__(self):
            super().__init__()
            self.inputs = []

        def rewrite(self, text, **kw):
            self.inputs.append(text)
            return super().rewrite(text, **kw)

    r = Recorder()
    rewrite_k(sample(), 4, r)
    assert r.inputs == [THREE] * 4


def test_rewrite_k_cache_extends(tmp_path):
    cache = DiskCache(tmp_path)
    p1 = MockRewriter(seed=0)
    small = rewrite_k(sample(), 3, p1, cache=cache)
    p2 = MockRewriter(seed=0)
    large = rewrite_k(sample(), 5, p2, cache=cache)
    assert large.rewrites[:3] == small.rewrites
    assert p2.calls.value == 2  # only indices 4 and 5 were new


def test_rewrite_k_warm_cache_zero_calls(tmp_path):
    cache = DiskCache(tmp_path)
    rewrite_k(sample(), 3, MockRewriter(), cache=cache)
    again = MockRewriter()
    rewrite_k(sample(), 3, again, cache=cache)
    assert again.calls.value == 0


def test_cache_key_includes_params_and_prompt(tmp_path):
    cache = DiskCache(tmp_path)
    rewrite_k(sample(), 2, MockRewriter(), cache=cache)
    p = MockRewriter()
    rewrite_k(sample(), 2, p, params=GenerationParams(temperature=0.7), cache=cache)
    rewrite_k(sample(), 2, p, prompt="Paraphrase this.", cache=cache)
    assert p.calls.value == 4


def test_rewrite_k_concurrent_matches_serial():
    a = rewrite_k(sample(), 6, MockRewriter(), max_workers=4)
    b = rewrite_k(sample(), 6, MockRewriter(), max_workers=1)
    assert a == b


class Blank(IdentityRewriter):
    def __init__(self, blanks):
        super().__init__()
        self.blanks = blanks

    def rewrite(self, text, **kw):
        self.calls.incr()
        if self.calls.value <= self.blanks:
            return "  "
        return text


def test_empty_rewrite_retried():
    p = Blank(blanks=2)
    assert rewrite_k(sample(), 1, p, empty_retries=2).texts == [THREE]
    assert p.calls.value == 3


def test_empty_rewrite_gives_up():
    with pytest.raises(EmptyRewrite):
        rewrite_k(sample(), 1, Blank(blanks=10), empty_retries=2)


def test_rewrite_k_rejects_bad_k():
    with pytest.raises(ValueError):
        rewrite_k(sample(), 0, IdentityRewriter())


def test_chat_rewriter_wire_format():
    bodies = []

    def handler(request):
        assert str(request.url) == "http://llm/v1/chat/completions"
        bodies.append(json.loads(request.content))
        return httpx.Response(200, json={"choices": [{"message": {"role": "assistant", "content": f"rewrite {len(bodies)}"}}]})

    p = OpenAIChatRewriter("gpt-x", base_url="http://llm/v1", client=httpx.Client(transport=httpx.MockTransport(handler)))
    b = rewrite_k(sample("Some text here."), 2, p, params=GenerationParams(temperature=0.5, max_tokens=64, seed=10))
    assert b.texts == ["rewrite 1", "rewrite 2"]
    assert bodies[0] == {
        "model": "gpt-x",
        "messages": [{"role": "user", "content": "Revise this text.\n\nSome text here."}],
        "max_tokens": 64,
        "temperature": 0.5,
        "seed": 10,
    }
    assert bodies[1]["seed"] == 11
    assert b.rewriter_id == "openai-chat/gpt-x"


def test_chat_rewriter_omits_unset_params():
    p = OpenAIChatRewriter("m")
    body = p.request_body("x", GenerationParams(), 1)
    assert "temperature" not in body and "seed" not in body
    assert all(m["role"] != "system" for m in body["messages"])
