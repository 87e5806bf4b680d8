"""Engine-side client: owns the bridge subprocess and adapts its replies
to the engine's evaluation contract."""

from __future__ import annotations

import subprocess
import sys
from fractions import Fraction

from microcurr import (
    CurriculumSpec,
    DomainError,
    EngineConfig,
    PerformanceReport,
    curriculum_to_dict,
    report_from_dict,
    run as engine_run,
)

from .coderfmt import script_format
from .protocol import (
    PROTOCOL_VERSION,
    ProtocolViolation,
    decode_line,
    encode_line,
    evaluate_request,
    hello_msg,
)


class BridgeError(Exception):
    """The bridge process broke the protocol or became unusable."""


def stub_command() -> list[str]:
    return [sys.executable, "-m", "sc2bridge", "--stub"]


class BridgeClient:
    """Talks to one bridge subprocess; one request in flight at a time."""

    def __init__(self, command=None, cwd=None):
        self.command = list(command) if command else stub_command()
        self.proc = subprocess.Popen(
            self.command,
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            cwd=cwd,
            text=True,
            encoding="utf-8",
            bufsize=1,
        )
        self.peer_format = None
        try:
            self._handshake()
        except BaseException:
            self._terminate()
            raise

    def _send(self, message: dict) -> None:
        if self.proc.poll() is not None:
            raise BridgeError("bridge process has exited")
        try:
            self.proc.stdin.write(encode_line(message))
            self.proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            raise BridgeError(f"cannot write to bridge: {exc}") from None

    def _recv(self) -> dict:
        line = self.proc.stdout.readline()
        if not line:
            raise BridgeError("bridge closed its output stream")
        try:
            return decode_line(line)
        except ProtocolViolation as exc:
            raise BridgeError(f"unreadable bridge reply: {exc}") from None

    def _handshake(self) -> None:
        self._send(hello_msg())
        reply = self._recv()
        if reply["kind"] == "Error":
            raise BridgeError(f"handshake rejected: {reply.get('message')}")
        if reply["kind"] != "Hello":
            raise BridgeError(f"expected Hello back, got {reply['kind']}")
        if reply.get("protocol") != PROTOCOL_VERSION:
            raise BridgeError(
                f"bridge speaks {reply.get('protocol')!r}, not {PROTOCOL_VERSION}"
            )
        self.peer_format = reply.get("format")

    def _terminate(self) -> None:
        if self.proc.poll() is None:
            self.proc.kill()
            self.proc.wait()

    def evaluate(
        self,
        spec: CurriculumSpec,
        script: str,
        seed: int,
        episodes: int | None = None,
        **extra,
    ) -> PerformanceReport:
        """Score one script on one task.

        A ScriptError comes back as a zero-win report with the error
        text set, the same shape the engine gives any invalid program.
        Every other error kind means the bridge itself is unusable.
        """
        if episodes is None:
            episodes = spec.objective.episodes
        self._send(
            evaluate_request(curriculum_to_dict(spec), script, episodes, seed, **extra)
        )
        reply = self._recv()
        kind = reply["kind"]
        if kind == "Error":
            category = reply.get("category")
            message = str(reply.get("message", ""))
            if category == "ScriptError":
                return PerformanceReport(
                    win_rate=Fraction(0), episodes=(), error=message
                )
            raise BridgeError(f"{category}: {message}")
        if kind != "EvaluateResult":
            raise BridgeError(f"expected EvaluateResult, got {kind}")
        if "seed" in reply and reply["seed"] != seed:
            raise BridgeError(
                f"result echoes seed {reply['seed']}, request was {seed}"
            )
        try:
            return report_from_dict(reply["report"])
        except (KeyError, DomainError) as exc:
            raise BridgeError(f"bad report payload: {exc}") from None

    def close(self) -> None:
        if self.proc.poll() is None:
            try:
                self._send({"kind": "Shutdown"})
                self.proc.stdin.close()
            except BridgeError:
                pass
            try:
                self.proc.wait(timeout=5)
            except subprocess.TimeoutExpired:
                self._terminate()

    def __enter__(self):
        return self

    def __exit__(self, *exc_info):
        self.close()
        return False


def bridge_evaluator_factory(client: BridgeClient, config: EngineConfig):
    """Per-iteration evaluators mirroring the arena's seed blocks; the
    bridge ladders episode seeds from the request seed the same way."""

    def for_iteration(index: int):
        seed = config.base_seed + index * config.seed_stride

        def run_eval(spec, script):
            return client.evaluate(spec, script, seed=seed)

        return run_eval

    return for_iteration


def run_with_bridge(final_task, config, backend, client: BridgeClient | None = None):
    """The engine's curriculum loop, with scoring delegated to a bridge
    and the coder targeting the bridge's script format."""
    owned = client is None
    if owned:
        client = BridgeClient()
    try:
        return engine_run(
            final_task,
            config,
            backend,
            fmt=script_format(),
            evaluator_factory=bridge_evaluator_factory(client, config),
        )
    finally:
        if owned:
            client.close()
