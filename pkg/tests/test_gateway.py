from __future__ import annotations

import json

import pytest

from tabqa.core import TabqaError
from tabqa.gateway import (
    CassetteError,
    CassetteMiss,
    ChatRequest,
    EndpointUnreachable,
    LiveGateway,
    RateLimited,
    RecordingGateway,
    ReplayGateway,
    fingerprint,
    write_cassette,
)

from .helpers import StubEndpoint, chat_payload


def _req(prompt: str = "hello", model: str = "m1", **kwargs) -> ChatRequest:
    return ChatRequest.user(model, prompt, **kwargs)


def test_request_validation():
    with pytest.raises(TabqaError):
        ChatRequest(model="m", messages=())
    with pytest.raises(TabqaError):
        ChatRequest(model="m", messages=(("user", "x"),), temperature=-0.1)
    with pytest.raises(TabqaError):
        ChatRequest(model="m", messages=(("robot", "x"),))
    with pytest.raises(TabqaError):
        ChatRequest(model="m", messages=(("user", "x"),), max_tokens=0)


def test_fingerprint_ignores_sampling_params():
    base = _req()
    assert fingerprint(base) == fingerprint(_req(seed=7))
    assert fingerprint(base) == fingerprint(ChatRequest.user("m1", "hello", temperature=0.9))
    assert fingerprint(base) != fingerprint(_req(model="m2"))
    assert fingerprint(base) != fingerprint(_req(prompt="other"))


def test_replay_hit_and_miss(tmp_path):
    cassette = tmp_path / "c.jsonl"
    write_cassette(cassette, [(fingerprint(_req()), "recorded!")])
    gw = ReplayGateway(cassette)
    assert gw.complete(_req()).content == "recorded!"
    # Same fingerprint under different sampling params still replays.
    assert gw.complete(_req(seed=3)).content == "recorded!"
    with pytest.raises(CassetteMiss):
        gw.complete(_req(prompt="unknown"))


def test_replay_strict_duplicate_fingerprints(tmp_path):
    cassette = tmp_path / "c.jsonl"
    fp = fingerprint(_req())
    write_cassette(cassette, [(fp, "one"), (fp, "two")])
    with pytest.raises(CassetteError):
        ReplayGateway(cassette)
    assert ReplayGateway(cassette, strict=False).complete(_req()).content == "two"


def test_replay_missing_cassette(tmp_path):
    with pytest.raises(CassetteError):
        ReplayGateway(tmp_path / "absent.jsonl")


def test_replay_determinism(tmp_path):
    cassette = tmp_path / "c.jsonl"
    write_cassette(cassette, [(fingerprint(_req(prompt=f"p{i}")), f"r{i}") for i in range(20)])
    first = [ReplayGateway(cassette).complete(_req(prompt=f"p{i}")) for i in range(20)]
    second = [ReplayGateway(cassette).complete(_req(prompt=f"p{i}")) for i in range(20)]
    assert first == second


def test_live_happy_path():
    with StubEndpoint(lambda path, body: (200, chat_payload(f"echo:{body['messages'][0]['content']}"))) as stub:
        gw = LiveGateway(endpoint=stub.url)
        response = gw.complete(_req(prompt="ping"))
    assert response.content == "echo:ping"
    assert response.finish_reason == "stop"


def test_live_sends_seed_and_auth():
    seen = {}

    def behavior(path, body):
        seen["path"] = path
        seen["body"] = body
        return 200, chat_payload("ok")

    with StubEndpoint(behavior) as stub:
        LiveGateway(endpoint=stub.url, api_key="k").complete(_req(seed=5))
    assert seen["path"] == "/v1/chat/completions"
    assert seen["body"]["seed"] == 5
    assert seen["body"]["model"] == "m1"


def test_live_rate_limited_after_budget():
    with StubEndpoint(lambda path, body: (429, {})) as stub:
        gw = LiveGateway(endpoint=stub.url, backoff_s=0.0)
        with pytest.raises(RateLimited):
            gw.complete(_req())
        assert stub.hits == 3


def test_live_endpoint_down_after_retries():
    # Grab a port that is closed by binding and releasing it.
    import socket

    sock = socket.socket()
    sock.bind(("127.0.0.1", 0))
    port = sock.getsockname()[1]
    sock.close()
    gw = LiveGateway(endpoint=f"http://127.0.0.1:{port}", backoff_s=0.0)
    with pytest.raises(EndpointUnreachable):
        gw.complete(_req())


def test_live_retries_transient_5xx():
    state = {"n": 0}

    def behavior(path, body):
        state["n"] += 1
        if state["n"] < 3:
            return 503, {}
        return 200, chat_payload("finally")

    with StubEndpoint(behavior) as stub:
        gw = LiveGateway(endpoint=stub.url, backoff_s=0.0)
        assert gw.complete(_req()).content == "finally"


def test_record_then_replay(tmp_path):
    cassette = tmp_path / "rec.jsonl"
    with StubEndpoint(lambda path, body: (200, chat_payload("live answer"))) as stub:
        recording = RecordingGateway(LiveGateway(endpoint=stub.url), cassette)
        live_response = recording.complete(_req())
        recording.complete(_req())  # identical request is recorded once
    lines = [json.loads(l) for l in cassette.read_text().splitlines()]
    assert len(lines) == 1
    replay = ReplayGateway(cassette)
    assert replay.complete(_req()).content == live_response.content
