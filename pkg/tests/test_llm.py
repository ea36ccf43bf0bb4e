import json
import re
import socket
import threading
import time

import pytest

from llmtime_bench import llm
from llmtime_bench.errors import InvalidArgument, ProtocolError, ProviderUnavailable, RateLimited
from llmtime_bench.llm import CachingProvider, CompletionRequest, HttpProvider, MockProvider, cache_key


@pytest.fixture
def no_network(monkeypatch):
    def refuse(*a, **k):
        raise AssertionError("network used")
    monkeypatch.setattr(socket.socket, "connect", refuse)
    monkeypatch.setattr(socket, "create_connection", refuse)


# --- request / key ------------------------------------------------------------

def test_request_validation():
    with pytest.raises(InvalidArgument):
        CompletionRequest("")
    with pytest.raises(InvalidArgument):
        CompletionRequest("x", num_samples=21)
    with pytest.raises(InvalidArgument):
        CompletionRequest("x", max_tokens=0)


def test_cache_key_contract():
    a = CompletionRequest("1 , 2 ,", temperature=0.7)
    assert cache_key(a) == cache_key(CompletionRequest("1 , 2 ,", temperature=0.7))
    assert cache_key(a) != cache_key(CompletionRequest("1 , 2 ,", temperature=0.8))
    assert re.fullmatch(r"[0-9a-f]{64}", cache_key(a))


@pytest.mark.parametrize("field,value", [
    ("model_name", "other"), ("max_tokens", 7), ("num_samples", 2),
    ("stop_sequences", ("\n",)), ("want_logprobs", True), ("prompt", "1 , 3 ,"),
])
def test_cache_key_sensitive_to_every_field(field, value):
    base = CompletionRequest("1 , 2 ,")
    changed = CompletionRequest(**{**base.to_dict(), field: value})
    assert cache_key(base) != cache_key(changed)


# --- mock ---------------------------------------------------------------------

def test_mock_repeats_last_period(no_network):
    batch = MockProvider().complete(CompletionRequest("1 , 2 , 3 , 1 , 2 , 3 ,", max_tokens=12))
    assert batch.texts[0].startswith(" 1 , 2 , 3 , 1")
    assert batch.provider_id == "mock" and not batch.cached


def test_mock_period_with_partial_block():
    text = llm.repeat_last_period("5 , 6 , 7 , 5 , 6 , 7 , 5 ,", 12)
    assert text.startswith(" 6 , 7 , 5 , 6")


def test_mock_respects_token_budget():
    text = llm.repeat_last_period("1 2 , 3 4 , 1 2 , 3 4 ,", 5)
    assert sum(not c.isspace() for c in text) == 5


def test_mock_canned_answers(no_network):
    m = MockProvider(rule=None, canned={"promptX": ["a", "b"]})
    assert m.complete(CompletionRequest("promptX", num_samples=2)).texts == ("a", "b")
    with pytest.raises(ProtocolError):
        m.complete(CompletionRequest("other"))


def test_mock_stop_sequences_and_logprobs():
    m = MockProvider(rule=None, canned={"p": ["1 , 2 | 3"]})
    b = m.complete(CompletionRequest("p", stop_sequences=("|",), want_logprobs=True))
    assert b.texts == ("1 , 2 ",)
    assert b.logprob_sums is not None and len(b.logprob_sums) == 1


def test_mock_continuation_logprob_prefers_rule():
    m = MockProvider()
    good = m.continuation_logprob("1 , 2 , 1 , 2 ,", " 1 , 2")
    bad = m.continuation_logprob("1 , 2 , 1 , 2 ,", " 9 , 9")
    assert good > bad


def test_echo_tail_rule():
    assert llm.echo_tail(2)("1 , 2 , 3 ,", 100) == " 2 , 3"


# --- cache --------------------------------------------------------------------

def test_cache_miss_then_hit(tmp_path, no_network):
    inner = MockProvider()
    cache = CachingProvider(inner, tmp_path)
    req = CompletionRequest("1 , 2 , 1 , 2 ,", max_tokens=8, num_samples=3)
    first = cache.complete(req)
    second = cache.complete(req)
    assert (first.cached, second.cached) == (False, True)
    assert first.texts == second.texts
    assert inner.calls == 1


def test_cache_file_schema(tmp_path):
    cache = CachingProvider(MockProvider(), tmp_path)
    req = CompletionRequest("1 , 2 ,", want_logprobs=True)
    cache.complete(req)
    doc = json.loads(cache.path_for(cache_key(req)).read_text())
    assert set(doc) == {"key", "request", "response", "created_at"}
    assert doc["key"] == cache_key(req)
    assert doc["request"] == req.to_dict()
    assert set(doc["response"]) == {"texts", "logprob_sums"}
    assert CompletionRequest.from_dict(doc["request"]) == req


def test_replay_only_miss(tmp_path):
    with pytest.raises(ProviderUnavailable):
        CachingProvider(None, tmp_path).complete(CompletionRequest("x"))


def test_cache_concurrent_same_key(tmp_path):
    class Slow(MockProvider):
        def complete(self, request):
            time.sleep(0.02)
            return super().complete(request)

    inner = Slow()
    cache = CachingProvider(inner, tmp_path)
    req = CompletionRequest("1 , 1 ,")
    threads = [threading.Thread(target=cache.complete, args=(req,)) for _ in range(6)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert inner.calls == 1


# --- http ---------------------------------------------------------------------

class FakeTransport:
    def __init__(self, responses):
        self.responses = list(responses)
        self.calls = []

    def __call__(self, url, headers, body, timeout):
        self.calls.append((url, headers, json.loads(body)))
        r = self.responses.pop(0)
        if isinstance(r, Exception):
            raise r
        return r


def ok(texts, logprobs=None):
    choices = []
    for i, t in enumerate(texts):
        c = {"index": i, "text": t}
        if logprobs:
            c["logprobs"] = {"token_logprobs": logprobs[i]}
        choices.append(c)
    return 200, {}, json.dumps({"choices": choices}).encode()


def test_http_payload_and_parse(monkeypatch):
    monkeypatch.setenv("TEST_KEY", "sk-test")
    t = FakeTransport([ok([" 1 , 2", " 3 , 4"], [[-0.5, -0.25], [None, -1.0]])])
    p = HttpProvider("http://x/v1", api_key_env="TEST_KEY", transport=t, sleep=lambda s: None)
    req = CompletionRequest("1 ,", max_tokens=9, num_samples=2, want_logprobs=True, temperature=0.5)
    b = p.complete(req)
    url, headers, payload = t.calls[0]
    assert url == "http://x/v1/completions"
    assert headers["Authorization"] == "Bearer sk-test"
    assert payload == {"model": llm.DEFAULT_MODEL, "prompt": "1 ,", "max_tokens": 9,
                       "temperature": 0.5, "n": 2, "stop": None, "logprobs": 1}
    assert b.texts == (" 1 , 2", " 3 , 4")
    assert b.logprob_sums == (-0.75, -1.0)
    assert b.provider_id.endswith("#attempts=1")


def test_http_retries_then_succeeds():
    sleeps = []
    t = FakeTransport([OSError("reset"), (503, {}, b""), ok(["1"])])
    p = HttpProvider("http://x", transport=t, sleep=sleeps.append, backoff=0.5)
    b = p.complete(CompletionRequest("p"))
    assert b.provider_id.endswith("#attempts=3")
    assert sleeps == [0.5, 1.0]


def test_http_gives_up_after_attempts():
    t = FakeTransport([OSError("down")] * 3)
    with pytest.raises(ProviderUnavailable):
        HttpProvider("http://x", transport=t, sleep=lambda s: None).complete(CompletionRequest("p"))
    assert len(t.calls) == 3


def test_http_rate_limit_honours_retry_after():
    sleeps = []
    t = FakeTransport([(429, {"Retry-After": "7"}, b""), (429, {"retry-after": "2"}, b""), (429, {}, b"")])
    p = HttpProvider("http://x", transport=t, sleep=sleeps.append, backoff=1.0)
    with pytest.raises(RateLimited) as info:
        p.complete(CompletionRequest("p"))
    assert sleeps == [7.0, 2.0]
    assert info.value.retry_after is None


def test_http_refusal_not_retried():
    t = FakeTransport([(403, {"Retry-After": "30"}, b"quota")])
    with pytest.raises(RateLimited) as info:
        HttpProvider("http://x", transport=t, sleep=lambda s: None).complete(CompletionRequest("p"))
    assert info.value.retry_after == 30.0 and len(t.calls) == 1


@pytest.mark.parametrize("resp", [
    (200, {}, b"not json"), (200, {}, b'{"choices": [{"index": 0}]}'), (200, {}, b'{"choices": []}'),
    (400, {}, b"bad request"),
])
def test_http_protocol_errors(resp):
    with pytest.raises(ProtocolError):
        HttpProvider("http://x", transport=FakeTransport([resp]), sleep=lambda s: None).complete(
            CompletionRequest("p"))


def test_http_concurrency_cap():
    active, peak = [0], [0]
    lock = threading.Lock()

    def transport(url, headers, body, timeout):
        with lock:
            active[0] += 1
            peak[0] = max(peak[0], active[0])
        time.sleep(0.02)
        with lock:
            active[0] -= 1
        return ok(["1"])

    p = HttpProvider("http://x", transport=transport, max_concurrency=2)
    threads = [threading.Thread(target=p.complete, args=(CompletionRequest("p"),)) for _ in range(8)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert peak[0] == 2


def test_build_provider(tmp_path):
    assert isinstance(llm.build_provider(llm.ProviderSettings()), MockProvider)
    assert isinstance(llm.build_provider(llm.ProviderSettings(kind="http")), HttpProvider)
    assert isinstance(llm.build_provider(llm.ProviderSettings(kind="replay"), tmp_path), CachingProvider)
    with pytest.raises(InvalidArgument):
        llm.build_provider(llm.ProviderSettings(kind="replay"))
