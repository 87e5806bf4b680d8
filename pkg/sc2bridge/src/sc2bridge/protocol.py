"""Wire format: one JSON object per line, UTF-8, version-negotiated.

Message kinds: Hello, EvaluateRequest, EvaluateResult, Error, Shutdown.
Hello carries the protocol version and the script format id; both sides
must agree on the version before any request flows.
"""

from __future__ import annotations

import json

PROTOCOL_VERSION = "evocurr-bridge/1"
FORMAT_ID = "python-sc2-script"

KINDS = ("Hello", "EvaluateRequest", "EvaluateResult", "Error", "Shutdown")
ERROR_CATEGORIES = ("ScriptError", "GameUnavailable", "ProtocolError")


class ProtocolViolation(Exception):
    """A line that is not a well-formed bridge message."""


def encode_line(message: dict) -> str:
    return json.dumps(message, ensure_ascii=False, sort_keys=True) + "\n"


def decode_line(line: str) -> dict:
    try:
        message = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ProtocolViolation(f"not valid JSON: {exc}") from None
    if not isinstance(message, dict):
        raise ProtocolViolation("message must be a JSON object")
    kind = message.get("kind")
    if kind not in KINDS:
        raise ProtocolViolation(f"unknown message kind: {kind!r}")
    return message


def hello_msg() -> dict:
    return {"kind": "Hello", "protocol": PROTOCOL_VERSION, "format": FORMAT_ID}


def error_msg(category: str, message: str) -> dict:
    assert category in ERROR_CATEGORIES
    return {"kind": "Error", "category": category, "message": message}


def evaluate_request(
    curriculum: dict, script: str, episodes: int, seed: int, **extra
) -> dict:
    """Extra fields (map_file, opponent, ...) pass through untouched;
    live bridges forward them to match setup."""
    body = {
        "kind": "EvaluateRequest",
        "curriculum": curriculum,
        "script": script,
        "episodes": episodes,
        "seed": seed,
    }
    body.update(extra)
    return body


def check_request(message: dict) -> tuple[dict, str, int, int]:
    curriculum = message.get("curriculum")
    script = message.get("script")
    episodes = message.get("episodes")
    seed = message.get("seed")
    if not isinstance(curriculum, dict):
        raise ProtocolViolation("EvaluateRequest needs a curriculum object")
    if not isinstance(script, str):
        raise ProtocolViolation("EvaluateRequest needs script text")
    if not isinstance(episodes, int) or isinstance(episodes, bool) or episodes < 1:
        raise ProtocolViolation("EvaluateRequest needs a positive episode count")
    if not isinstance(seed, int) or isinstance(seed, bool):
        raise ProtocolViolation("EvaluateRequest needs an integer seed")
    return curriculum, script, episodes, seed
