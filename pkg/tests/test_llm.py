"""Backends: fenced-block extraction, fixtures, transcripts, HTTP retries."""

import json

import httpx
import pytest

import microcurr.llm as llm
from microcurr.llm import (
    BackendError,
    ChatRequest,
    RecordingBackend,
    ReplayBackend,
    Role,
    ScriptedBackend,
    extract_fenced_block,
    load_transcript,
)


def req(role=Role.DESIGNER, content="hello", temperature=0.7, max_tokens=2048):
    return ChatRequest(
        role_id=role,
        messages=(("system", "sys"), ("user", content)),
        temperature=temperature,
        max_tokens=max_tokens,
    )


# --- roles and errors ---------------------------------------------------------

def test_roles_are_their_wire_names():
    assert Role.DESIGNER == "Designer"
    assert Role.PLANNER == "Planner"
    assert Role.CODER == "Coder"
    assert Role.CRITIC == "Critic"
    assert Role("Critic") is Role.CRITIC


def test_backend_error_carries_kind():
    err = BackendError("Timeout", "request timed out")
    assert err.kind == "Timeout"
    assert str(err) == "Timeout: request timed out"


# --- request digests ------------------------------------------------------------

def test_digest_is_stable():
    assert req().digest() == req().digest()
    assert len(req().digest()) == 64
    assert all(c in "0123456789abcdef" for c in req().digest())


@pytest.mark.parametrize("other", [
    req(role=Role.CODER),
    req(content="other prompt"),
    req(temperature=0.2),
    req(max_tokens=999),
])
def test_digest_covers_every_field(other):
    assert other.digest() != req().digest()


def test_digest_covers_speaker_labels():
    flipped = ChatRequest(
        role_id=Role.DESIGNER,
        messages=(("user", "sys"), ("system", "hello")),
        temperature=0.7,
    )
    assert flipped.digest() != req().digest()


# --- fenced block extraction ----------------------------------------------------

@pytest.mark.parametrize("text,expected", [
    ("```bt\n(tree)\n```", "(tree)"),
    ("```\ncode\n```", "code"),
    ("prose before\n```json\n{\"a\": 1}\n```\nprose after", '{"a": 1}'),
    ("```bt\nfirst\n```\n```bt\nsecond\n```", "first"),
    ("  ```bt\n  indented\n  ```", "indented"),
    ("```bt\n```", ""),
    ("no fences at all\n", "no fences at all"),
    ("```bt\nnever closed", "```bt\nnever closed"),
])
def test_extract_fenced_block(text, expected):
    assert extract_fenced_block(text) == expected


# --- scripted fixtures --------------------------------------------------------------

def test_scripted_serves_per_role_in_order():
    backend = ScriptedBackend({"Designer": ["d1", "d2"], "Planner": ["p1"]})
    assert backend.complete(req(Role.DESIGNER)) == "d1"
    assert backend.complete(req(Role.PLANNER)) == "p1"
    assert backend.complete(req(Role.DESIGNER)) == "d2"
    assert backend.cursors == {"Designer": 2, "Planner": 1}


def test_scripted_exhaustion_names_the_role():
    backend = ScriptedBackend({"Designer": ["only"]})
    backend.complete(req())
    with pytest.raises(BackendError) as err:
        backend.complete(req())
    assert err.value.kind == "FixtureExhausted"
    assert "no scripted reply left for role Designer" in str(err.value)


def test_scripted_unknown_role_is_exhausted_immediately():
    backend = ScriptedBackend({"Designer": ["d"]})
    with pytest.raises(BackendError) as err:
        backend.complete(req(Role.CRITIC))
    assert err.value.kind == "FixtureExhausted"


def test_scripted_offsets_skip_consumed_replies():
    backend = ScriptedBackend({"Designer": ["d1", "d2", "d3"]},
                              offsets={"Designer": 2})
    assert backend.complete(req()) == "d3"


def test_scripted_from_file(tmp_path):
    path = tmp_path / "fixture.json"
    path.write_text(json.dumps({"Coder": ["x"]}), encoding="utf-8")
    backend = ScriptedBackend.from_file(path)
    assert backend.complete(req(Role.CODER)) == "x"


def test_scripted_from_file_errors_are_io(tmp_path):
    with pytest.raises(BackendError) as err:
        ScriptedBackend.from_file(tmp_path / "missing.json")
    assert err.value.kind == "Io"
    bad = tmp_path / "bad.json"
    bad.write_text("{broken", encoding="utf-8")
    with pytest.raises(BackendError) as err:
        ScriptedBackend.from_file(bad)
    assert err.value.kind == "Io"


# --- recording --------------------------------------------------------------------------

def test_recording_appends_jsonl_entries(tmp_path):
    path = tmp_path / "calls.jsonl"
    backend = RecordingBackend(ScriptedBackend({"Designer": ["d1", "d2"]}), path)
    r = req(content="first")
    assert backend.complete(r) == "d1"
    backend.complete(req(content="second"))

    entries = [json.loads(line) for line in
               path.read_text(encoding="utf-8").splitlines()]
    assert [e["seq"] for e in entries] == [1, 2]
    assert entries[0]["role"] == "Designer"
    assert entries[0]["request_digest"] == r.digest()
    assert entries[0]["request"]["messages"] == [["system", "sys"],
                                                 ["user", "first"]]
    assert entries[0]["request"]["temperature"] == 0.7
    assert entries[0]["request"]["max_tokens"] == 2048
    assert entries[0]["reply"] == "d1"
    assert entries[0]["duration_ms"] >= 0


def test_recording_continues_sequence_on_append(tmp_path):
    path = tmp_path / "calls.jsonl"
    first = RecordingBackend(ScriptedBackend({"Designer": ["a", "b"]}), path)
    first.complete(req())
    first.complete(req())
    second = RecordingBackend(ScriptedBackend({"Designer": ["c"]}), path)
    second.complete(req())
    entries = load_transcript(path)
    assert [e["seq"] for e in entries] == [1, 2, 3]


def test_recording_propagates_inner_errors_without_logging(tmp_path):
    path = tmp_path / "calls.jsonl"
    backend = RecordingBackend(ScriptedBackend({}), path)
    with pytest.raises(BackendError):
        backend.complete(req())
    assert not path.exists()


# --- transcript loading -------------------------------------------------------------------

def test_load_transcript_skips_blank_lines(tmp_path):
    path = tmp_path / "t.jsonl"
    path.write_text('{"seq": 1}\n\n{"seq": 2}\n', encoding="utf-8")
    assert [e["seq"] for e in load_transcript(path)] == [1, 2]


def test_load_transcript_reports_bad_line_number(tmp_path):
    path = tmp_path / "t.jsonl"
    path.write_text('{"seq": 1}\nnot json\n', encoding="utf-8")
    with pytest.raises(BackendError) as err:
        load_transcript(path)
    assert err.value.kind == "Io"
    assert "line 2" in str(err.value)


def test_load_transcript_missing_file(tmp_path):
    with pytest.raises(BackendError) as err:
        load_transcript(tmp_path / "nope.jsonl")
    assert err.value.kind == "Io"


# --- replay -----------------------------------------------------------------------------------

def record_session(tmp_path, requests, replies):
    path = tmp_path / "session.jsonl"
    scripted = ScriptedBackend(replies)
    recorder = RecordingBackend(scripted, path)
    for r in requests:
        recorder.complete(r)
    return path


def test_replay_round_trip(tmp_path):
    requests = [req(Role.DESIGNER, "c0"), req(Role.PLANNER, "p0"),
                req(Role.DESIGNER, "c1")]
    path = record_session(tmp_path, requests,
                          {"Designer": ["d1", "d2"], "Planner": ["p1"]})
    replay = ReplayBackend(path)
    assert [replay.complete(r) for r in requests] == ["d1", "p1", "d2"]
    assert replay.cursors == {"Designer": 2, "Planner": 1}


def test_replay_is_keyed_per_role_not_globally(tmp_path):
    requests = [req(Role.DESIGNER, "c0"), req(Role.PLANNER, "p0")]
    path = record_session(tmp_path, requests,
                          {"Designer": ["d1"], "Planner": ["p1"]})
    replay = ReplayBackend(path)
    # served fine even though the live order was Designer first
    assert replay.complete(requests[1]) == "p1"
    assert replay.complete(requests[0]) == "d1"


def test_replay_mismatch_pinpoints_the_call(tmp_path):
    recorded = req(Role.DESIGNER, "original prompt")
    path = record_session(tmp_path, [recorded], {"Designer": ["d1"]})
    replay = ReplayBackend(path)
    drifted = req(Role.DESIGNER, "original prompt!")
    with pytest.raises(BackendError) as err:
        replay.complete(drifted)
    assert err.value.kind == "ReplayMismatch"
    message = str(err.value)
    assert "call seq 1 (Designer #0)" in message
    assert drifted.digest()[:12] in message
    assert recorded.digest()[:12] in message


def test_replay_mismatch_on_temperature_drift(tmp_path):
    recorded = req(Role.CODER, "same words", temperature=0.2)
    path = record_session(tmp_path, [recorded], {"Coder": ["ok"]})
    replay = ReplayBackend(path)
    with pytest.raises(BackendError) as err:
        replay.complete(req(Role.CODER, "same words", temperature=0.3))
    assert err.value.kind == "ReplayMismatch"


def test_replay_exhaustion(tmp_path):
    r = req()
    path = record_session(tmp_path, [r], {"Designer": ["d1"]})
    replay = ReplayBackend(path)
    replay.complete(r)
    with pytest.raises(BackendError) as err:
        replay.complete(r)
    assert err.value.kind == "FixtureExhausted"
    assert "no more Designer calls" in str(err.value)


def test_replay_offsets_resume_midway(tmp_path):
    requests = [req(Role.DESIGNER, "c0"), req(Role.DESIGNER, "c1")]
    path = record_session(tmp_path, requests, {"Designer": ["d1", "d2"]})
    replay = ReplayBackend(path, offsets={"Designer": 1})
    assert replay.complete(requests[1]) == "d2"


# --- live HTTP ------------------------------------------------------------------------------

class FakeResponse:
    def __init__(self, status_code=200, body=None, text=""):
        self.status_code = status_code
        self._body = body
        self.text = text

    def json(self):
        if isinstance(self._body, Exception):
            raise self._body
        return self._body


def reply_body(content="hi"):
    return {"choices": [{"message": {"content": content}}]}


@pytest.fixture
def http_env(monkeypatch):
    """Stubs httpx.post and time.sleep; returns the call/sleep logs."""
    calls = []
    sleeps = []
    outcomes = []

    def fake_post(url, json=None, headers=None, timeout=None):
        calls.append({"url": url, "json": json, "headers": headers,
                      "timeout": timeout})
        outcome = outcomes.pop(0)
        if isinstance(outcome, Exception):
            raise outcome
        return outcome

    monkeypatch.setattr(llm.httpx, "post", fake_post)
    monkeypatch.setattr(llm.time, "sleep", sleeps.append)
    monkeypatch.setenv("TEST_LLM_KEY", "sekret")
    return {"calls": calls, "sleeps": sleeps, "outcomes": outcomes}


def make_http(**kw):
    defaults = dict(endpoint="https://api.example.test/v1/",
                    api_key_env="TEST_LLM_KEY", model="base-model")
    defaults.update(kw)
    return llm.HttpBackend(**defaults)


def test_http_missing_credential(monkeypatch):
    monkeypatch.delenv("TEST_LLM_KEY", raising=False)
    backend = make_http()
    with pytest.raises(BackendError) as err:
        backend.complete(req())
    assert err.value.kind == "MissingCredential"
    assert "TEST_LLM_KEY" in str(err.value)


def test_http_happy_path_wire_shape(http_env):
    http_env["outcomes"].append(FakeResponse(200, reply_body("the reply")))
    backend = make_http(timeout=12.5)
    out = backend.complete(req(Role.DESIGNER, "ask me", temperature=0.7))
    assert out == "the reply"
    call = http_env["calls"][0]
    assert call["url"] == "https://api.example.test/v1/chat/completions"
    assert call["headers"] == {"Authorization": "Bearer sekret"}
    assert call["timeout"] == 12.5
    assert call["json"]["model"] == "base-model"
    assert call["json"]["messages"] == [
        {"role": "system", "content": "sys"},
        {"role": "user", "content": "ask me"},
    ]
    assert call["json"]["temperature"] == 0.7
    assert call["json"]["max_tokens"] == 2048
    assert http_env["sleeps"] == []


def test_http_per_role_model_override(http_env):
    http_env["outcomes"] += [FakeResponse(200, reply_body()),
                             FakeResponse(200, reply_body())]
    backend = make_http(models={"Coder": "small-model"})
    backend.complete(req(Role.CODER))
    backend.complete(req(Role.DESIGNER))
    assert http_env["calls"][0]["json"]["model"] == "small-model"
    assert http_env["calls"][1]["json"]["model"] == "base-model"


def test_http_retries_timeouts_with_backoff(http_env):
    http_env["outcomes"] += [
        httpx.TimeoutException("slow"),
        httpx.TimeoutException("slow again"),
        FakeResponse(200, reply_body("finally")),
    ]
    assert make_http().complete(req()) == "finally"
    assert len(http_env["calls"]) == 3
    assert http_env["sleeps"] == [0.5, 1.0]


def test_http_gives_up_after_retry_budget(http_env):
    http_env["outcomes"] += [httpx.TimeoutException("t")] * 3
    with pytest.raises(BackendError) as err:
        make_http().complete(req())
    assert err.value.kind == "Timeout"
    assert len(http_env["calls"]) == 3
    assert http_env["sleeps"] == [0.5, 1.0]


def test_http_retries_server_errors(http_env):
    http_env["outcomes"] += [
        FakeResponse(500, text="boom"),
        FakeResponse(502, text="bad gateway"),
        FakeResponse(200, reply_body("ok")),
    ]
    assert make_http().complete(req()) == "ok"
    assert len(http_env["calls"]) == 3


def test_http_status_error_after_exhaustion(http_env):
    http_env["outcomes"] += [FakeResponse(500, text="boom")] * 3
    with pytest.raises(BackendError) as err:
        make_http().complete(req())
    assert err.value.kind == "HttpStatus"
    assert "status 500" in str(err.value)
    assert "boom" in str(err.value)


def test_http_retries_connect_errors(http_env):
    http_env["outcomes"] += [httpx.ConnectError("refused"),
                             FakeResponse(200, reply_body("up"))]
    assert make_http().complete(req()) == "up"


@pytest.mark.parametrize("body", [
    {},                                   # no choices
    {"choices": []},                      # empty choices
    {"choices": [{"message": None}]},     # wrong nesting
    json.JSONDecodeError("bad", "doc", 0),  # not JSON at all
])
def test_http_malformed_reply_never_retries(http_env, body):
    http_env["outcomes"] += [FakeResponse(200, body),
                             FakeResponse(200, reply_body("unused"))]
    with pytest.raises(BackendError) as err:
        make_http().complete(req())
    assert err.value.kind == "MalformedReply"
    assert len(http_env["calls"]) == 1
    assert http_env["sleeps"] == []
