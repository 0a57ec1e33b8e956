from __future__ import annotations

import json

import httpx
import pytest

from toolweave.gateway import (
    ChatMessage,
    ChatRequest,
    Gateway,
    RemoteBackend,
    ScriptedBackend,
    ScriptedEntry,
    ScriptedExhaustedError,
    StructureError,
    TransportError,
)


def make_request(user="hello", system="sys", **kw):
    return ChatRequest(
        model_id="test-model",
        messages=(ChatMessage("system", system), ChatMessage("user", user)),
        **kw,
    )


class TestChatTypes:
    def test_empty_user_content_rejected(self):
        with pytest.raises(ValueError):
            ChatMessage("user", "")

    def test_assistant_content_may_be_empty(self):
        assert ChatMessage("assistant", "").content == ""

    def test_request_validation(self):
        with pytest.raises(ValueError):
            ChatRequest(model_id="m", messages=())
        with pytest.raises(ValueError):
            make_request(temperature=-1)
        with pytest.raises(ValueError):
            make_request(max_tokens=0)

    def test_fingerprint_ignores_max_tokens_but_not_seed(self):
        a = make_request(seed=1, max_tokens=10)
        b = make_request(seed=1, max_tokens=99)
        c = make_request(seed=2, max_tokens=10)
        assert a.fingerprint() == b.fingerprint()
        assert a.fingerprint() != c.fingerprint()


class TestScriptedBackend:
    def test_echo_entry(self):
        backend = ScriptedBackend([ScriptedEntry("hello", "OK")])
        assert backend.complete(make_request("hello")) == "OK"

    def test_exhausted_raises(self):
        backend = ScriptedBackend([])
        with pytest.raises(ScriptedExhaustedError):
            backend.complete(make_request())

    def test_one_shot_entries_consume_in_order(self):
        backend = ScriptedBackend(
            [ScriptedEntry("hello", "first"), ScriptedEntry("hello", "second")]
        )
        assert backend.complete(make_request()) == "first"
        assert backend.complete(make_request()) == "second"
        with pytest.raises(ScriptedExhaustedError):
            backend.complete(make_request())

    def test_repeat_entry_never_exhausts(self):
        backend = ScriptedBackend([ScriptedEntry("hello", "again", repeat=True)])
        for _ in range(5):
            assert backend.complete(make_request()) == "again"

    def test_callable_matcher_and_responder(self):
        backend = ScriptedBackend(
            [
                ScriptedEntry(
                    lambda req: req.temperature == 0.0,
                    lambda req: req.messages[-1].content.upper(),
                    repeat=True,
                )
            ]
        )
        assert backend.complete(make_request("judge this", temperature=0.0)) == "JUDGE THIS"
        with pytest.raises(ScriptedExhaustedError):
            backend.complete(make_request("judge this", temperature=0.7))


class TestCache:
    def test_second_call_served_from_cache(self, tmp_path):
        backend = ScriptedBackend([ScriptedEntry("hello", "OK")])  # one-shot
        gw = Gateway(backend, cache_dir=tmp_path / "cache")
        req = make_request()
        assert gw.complete(req) == "OK"
        # the scripted entry is consumed; only the cache can answer now
        assert gw.complete(req) == "OK"
        assert backend.calls == 1

    def test_cache_distinguishes_requests(self, tmp_path):
        backend = ScriptedBackend(
            [ScriptedEntry("one", "1"), ScriptedEntry("two", "2")]
        )
        gw = Gateway(backend, cache_dir=tmp_path)
        assert gw.complete(make_request("one")) == "1"
        assert gw.complete(make_request("two")) == "2"
        assert gw.complete(make_request("one")) == "1"
        assert backend.calls == 2


class TestStructured:
    def shape_list_of_text(self):
        return {"type": "array", "items": {"type": "string"}}

    def test_conforming_first_try(self):
        backend = ScriptedBackend([ScriptedEntry("go", '["a","b"]')])
        gw = Gateway(backend)
        assert gw.complete_structured(make_request("go"), self.shape_list_of_text()) == ["a", "b"]

    def test_fenced_json_accepted(self):
        backend = ScriptedBackend([ScriptedEntry("go", '```json\n["a"]\n```')])
        gw = Gateway(backend)
        assert gw.complete_structured(make_request("go"), self.shape_list_of_text()) == ["a"]

    def test_repair_loop_recovers(self):
        backend = ScriptedBackend(
            [ScriptedEntry("go", "not json"), ScriptedEntry("go", '{"k": 1}')]
        )
        gw = Gateway(backend)
        shape = {"type": "object", "properties": {"k": {"type": "integer"}}}
        assert gw.complete_structured(make_request("go"), shape, repair_budget=1) == {"k": 1}
        assert backend.calls == 2

    def test_budget_zero_fails_fast(self):
        backend = ScriptedBackend([ScriptedEntry("go", "not json")])
        gw = Gateway(backend)
        with pytest.raises(StructureError):
            gw.complete_structured(make_request("go"), {"type": "object"}, repair_budget=0)

    def test_schema_violation_consumes_budget(self):
        backend = ScriptedBackend(
            [ScriptedEntry("go", '"just text"'), ScriptedEntry("go", "[1]")]
        )
        gw = Gateway(backend)
        with pytest.raises(StructureError):
            gw.complete_structured(
                make_request("go"), self.shape_list_of_text(), repair_budget=1
            )


class FakeTransport:
    """Sequence of canned HTTP outcomes; an Exception instance means raise."""

    def __init__(self, outcomes):
        self.outcomes = list(outcomes)
        self.requests = []

    def __call__(self, url, headers, payload):
        self.requests.append((url, headers, payload))
        outcome = self.outcomes.pop(0)
        if isinstance(outcome, Exception):
            raise outcome
        status, text = outcome
        return httpx.Response(status, text=text)


def ok_body(content="fine"):
    return json.dumps({"choices": [{"message": {"content": content}}]})


class TestRemoteBackend:
    def test_success_and_payload_shape(self, monkeypatch):
        monkeypatch.setenv("PTOOL_API_KEY", "secret-key")
        transport = FakeTransport([(200, ok_body("answer"))])
        backend = RemoteBackend("http://llm.local", transport=transport, sleep=lambda s: None)
        got = backend.complete(make_request("question", seed=7))
        assert got == "answer"
        url, headers, payload = transport.requests[0]
        assert url == "http://llm.local/v1/chat/completions"
        assert headers["Authorization"] == "Bearer secret-key"
        assert payload["model"] == "test-model"
        assert payload["seed"] == 7
        assert payload["messages"][0] == {"role": "system", "content": "sys"}

    def test_retries_transient_then_succeeds(self):
        transport = FakeTransport(
            [httpx.ConnectError("boom"), (500, "oops"), (429, "slow"), (200, ok_body())]
        )
        sleeps = []
        backend = RemoteBackend(
            "http://llm.local", max_retries=3, backoff_base=0.5,
            transport=transport, sleep=sleeps.append,
        )
        assert backend.complete(make_request()) == "fine"
        assert sleeps == [0.5, 1.0, 2.0]

    def test_retries_exhausted(self):
        transport = FakeTransport([(500, "a"), (500, "b")])
        backend = RemoteBackend(
            "http://llm.local", max_retries=1, transport=transport, sleep=lambda s: None
        )
        with pytest.raises(TransportError):
            backend.complete(make_request())

    def test_non_transient_error_raises_immediately(self):
        transport = FakeTransport([(401, "denied")])
        backend = RemoteBackend(
            "http://llm.local", max_retries=5, transport=transport, sleep=lambda s: None
        )
        with pytest.raises(TransportError):
            backend.complete(make_request())
        assert len(transport.requests) == 1
