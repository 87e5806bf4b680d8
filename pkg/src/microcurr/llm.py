"""Chat backends: live HTTP, scripted fixtures, and transcript replay.

Every reply that shapes a run flows through one ``complete`` call, so
recording that boundary is enough to replay a whole run offline.
"""

from __future__ import annotations

import hashlib
import json
import os
import time
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import httpx

TRANSPORT_RETRIES = 2  # extra attempts after a transport failure
BACKOFF_BASE = 0.5     # seconds; doubles per retry


class Role(str, Enum):
    DESIGNER = "Designer"
    PLANNER = "Planner"
    CODER = "Coder"
    CRITIC = "Critic"


class BackendError(Exception):
    """kind: Timeout | HttpStatus | MalformedReply | FixtureExhausted |
    MissingCredential | ReplayMismatch | Io"""

    def __init__(self, kind: str, message: str):
        super().__init__(f"{kind}: {message}")
        self.kind = kind


@dataclass(frozen=True)
class ChatRequest:
    role_id: Role
    messages: tuple[tuple[str, str], ...]  # (speaker, content), system first
    temperature: float
    max_tokens: int = 2048

    def digest(self) -> str:
        payload = {
            "role_id": self.role_id.value,
            "messages": [list(m) for m in self.messages],
            "temperature": self.temperature,
            "max_tokens": self.max_tokens,
        }
        blob = json.dumps(payload, sort_keys=True, ensure_ascii=False)
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()


class HttpBackend:
    """Chat-completion endpoint speaking the common JSON wire shape."""

    def __init__(
        self,
        endpoint: str,
        api_key_env: str,
        model: str,
        models: dict | None = None,
        timeout: float = 60.0,
    ):
        self.endpoint = endpoint.rstrip("/")
        self.api_key_env = api_key_env
        self.model = model
        self.models = models or {}
        self.timeout = timeout

    def complete(self, request: ChatRequest) -> str:
        key = os.environ.get(self.api_key_env)
        if not key:
            raise BackendError(
                "MissingCredential",
                f"environment variable {self.api_key_env} is not set",
            )
        payload = {
            "model": self.models.get(request.role_id.value, self.model),
            "messages": [
                {"role": speaker, "content": content}
                for speaker, content in request.messages
            ],
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        }
        headers = {"Authorization": f"Bearer {key}"}
        url = f"{self.endpoint}/chat/completions"

        last: BackendError | None = None
        for attempt in range(TRANSPORT_RETRIES + 1):
            if attempt:
                time.sleep(BACKOFF_BASE * (2 ** (attempt - 1)))
            try:
                response = httpx.post(
                    url, json=payload, headers=headers, timeout=self.timeout
                )
            except httpx.TimeoutException as exc:
                last = BackendError("Timeout", str(exc))
                continue
            except httpx.HTTPError as exc:
                last = BackendError("HttpStatus", str(exc))
                continue
            if response.status_code != 200:
                last = BackendError(
                    "HttpStatus", f"status {response.status_code}: {response.text[:200]}"
                )
                continue
            # A malformed body is a model-side defect, not transport:
            # retrying the same request would burn quota for nothing.
            try:
                body = response.json()
                return body["choices"][0]["message"]["content"]
            except (json.JSONDecodeError, KeyError, IndexError, TypeError) as exc:
                raise BackendError("MalformedReply", f"unexpected reply shape: {exc}") from None
        raise last if last else BackendError("HttpStatus", "unreachable")


class ScriptedBackend:
    """Serves canned replies per role, in order. The workhorse for tests."""

    def __init__(self, replies: dict, offsets: dict | None = None):
        # replies: {"Designer": [...], "Planner": [...], ...}
        self.replies = {str(k): list(v) for k, v in replies.items()}
        self.cursors = {k: 0 for k in self.replies}
        if offsets:
            for role, skip in offsets.items():
                self.cursors[str(role)] = skip

    @classmethod
    def from_file(cls, path: str | Path) -> "ScriptedBackend":
        try:
            raw = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise BackendError("Io", f"cannot load fixture file {path}: {exc}") from None
        return cls(raw)

    def complete(self, request: ChatRequest) -> str:
        role = request.role_id.value
        queue = self.replies.get(role, [])
        cursor = self.cursors.get(role, 0)
        if cursor >= len(queue):
            raise BackendError(
                "FixtureExhausted", f"no scripted reply left for role {role}"
            )
        self.cursors[role] = cursor + 1
        return queue[cursor]


@dataclass
class TranscriptEntry:
    seq: int
    role: str
    request_digest: str
    request: dict
    reply: str
    duration_ms: float

    def to_dict(self) -> dict:
        return {
            "seq": self.seq,
            "role": self.role,
            "request_digest": self.request_digest,
            "request": self.request,
            "reply": self.reply,
            "duration_ms": self.duration_ms,
        }


class RecordingBackend:
    """Wraps another backend and appends one JSONL entry per call."""

    def __init__(self, inner, path: str | Path):
        self.inner = inner
        self.path = Path(path)
        # continue numbering when appending to an interrupted run's log
        self.seq = 0
        if self.path.exists():
            text = self.path.read_text(encoding="utf-8")
            self.seq = sum(1 for line in text.splitlines() if line.strip())

    def complete(self, request: ChatRequest) -> str:
        start = time.monotonic()
        reply = self.inner.complete(request)
        elapsed = (time.monotonic() - start) * 1000.0
        self.seq += 1
        entry = TranscriptEntry(
            seq=self.seq,
            role=request.role_id.value,
            request_digest=request.digest(),
            request={
                "messages": [list(m) for m in request.messages],
                "temperature": request.temperature,
                "max_tokens": request.max_tokens,
            },
            reply=reply,
            duration_ms=round(elapsed, 3),
        )
        with self.path.open("a", encoding="utf-8") as fh:
            fh.write(json.dumps(entry.to_dict(), ensure_ascii=False) + "\n")
        return reply


def load_transcript(path: str | Path) -> list[dict]:
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise BackendError("Io", f"cannot read transcript {path}: {exc}") from None
    entries = []
    for idx, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            entries.append(json.loads(line))
        except json.JSONDecodeError as exc:
            raise BackendError(
                "Io", f"transcript {path} line {idx} is not valid JSON: {exc}"
            ) from None
    return entries


class ReplayBackend:
    """Replays a recorded transcript keyed by (role, per-role sequence).

    Each served reply re-checks the request digest, so any drift in
    prompt construction since recording surfaces as ReplayMismatch
    naming the first divergent call.
    """

    def __init__(self, path: str | Path, offsets: dict | None = None):
        self.by_role: dict[str, list[dict]] = {}
        for entry in load_transcript(path):
            self.by_role.setdefault(entry["role"], []).append(entry)
        self.cursors = {role: 0 for role in self.by_role}
        if offsets:
            for role, skip in offsets.items():
                self.cursors[str(role)] = skip

    def complete(self, request: ChatRequest) -> str:
        role = request.role_id.value
        queue = self.by_role.get(role, [])
        cursor = self.cursors.get(role, 0)
        if cursor >= len(queue):
            raise BackendError(
                "FixtureExhausted", f"transcript has no more {role} calls"
            )
        entry = queue[cursor]
        digest = request.digest()
        if digest != entry["request_digest"]:
            raise BackendError(
                "ReplayMismatch",
                f"call seq {entry['seq']} ({role} #{cursor}): request digest "
                f"{digest[:12]} != recorded {entry['request_digest'][:12]}",
            )
        self.cursors[role] = cursor + 1
        return entry["reply"]


def extract_fenced_block(text: str) -> str:
    """First fenced code block, else the whole reply stripped."""
    lines = text.split("\n")
    start = None
    for idx, line in enumerate(lines):
        if line.lstrip().startswith("```"):
            start = idx
            break
    if start is not None:
        body = []
        for line in lines[start + 1:]:
            if line.lstrip().startswith("```"):
                return "\n".join(body).strip()
            body.append(line)
    return text.strip()
