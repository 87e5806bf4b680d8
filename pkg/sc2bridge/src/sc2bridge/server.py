"""Bridge process: line-JSON requests on stdin, replies on stdout.

The engine opens the handshake, then sends one EvaluateRequest at a
time. Stub mode checks that the submitted script compiles, skips the
game, and fabricates the report; actually loading and running the
script belongs to live mode, which is the integration point for a real
game client and reports GameUnavailable until one is wired in.

Every inbound line gets exactly one reply line (Shutdown and EOF end
the loop instead). Nothing a client writes can crash the server.
"""

from __future__ import annotations

import argparse
import sys

from .protocol import (
    PROTOCOL_VERSION,
    ProtocolViolation,
    check_request,
    decode_line,
    encode_line,
    error_msg,
    hello_msg,
)
from .stub import stub_report


class ScriptFailure(Exception):
    """The submitted script is not loadable Python."""


def check_script(script: str) -> None:
    try:
        compile(script, "<bridge-script>", "exec")
    except (SyntaxError, ValueError) as exc:
        raise ScriptFailure(f"{type(exc).__name__}: {exc}") from None


def evaluate_stub(message: dict) -> dict:
    """Canned result keyed off the request seed; the game never starts."""
    _, script, episodes, seed = check_request(message)
    try:
        check_script(script)
    except ScriptFailure as exc:
        return error_msg("ScriptError", str(exc))
    return {
        "kind": "EvaluateResult",
        "seed": seed,
        "report": stub_report(episodes, seed),
    }


def evaluate_live(message: dict) -> dict:
    check_request(message)
    return error_msg(
        "GameUnavailable",
        "no game client is wired to this bridge; run with --stub "
        "or integrate a runner in evaluate_live",
    )


def serve(in_stream, out_stream, stub: bool = True) -> None:
    """Handle messages until Shutdown or EOF."""

    def send(message: dict) -> None:
        out_stream.write(encode_line(message))
        out_stream.flush()

    evaluate = evaluate_stub if stub else evaluate_live
    handshaken = False
    for line in in_stream:
        try:
            try:
                message = decode_line(line)
            except ProtocolViolation as exc:
                send(error_msg("ProtocolError", str(exc)))
                continue
            kind = message["kind"]
            if kind == "Shutdown":
                break
            if kind == "Hello":
                offered = message.get("protocol")
                if offered != PROTOCOL_VERSION:
                    send(
                        error_msg(
                            "ProtocolError",
                            f"unsupported protocol {offered!r}; "
                            f"this bridge speaks {PROTOCOL_VERSION}",
                        )
                    )
                    continue
                handshaken = True
                send(hello_msg())
            elif kind == "EvaluateRequest":
                if not handshaken:
                    send(error_msg("ProtocolError", "EvaluateRequest before Hello"))
                    continue
                try:
                    send(evaluate(message))
                except ProtocolViolation as exc:
                    send(error_msg("ProtocolError", str(exc)))
            else:
                send(error_msg("ProtocolError", f"unexpected {kind} from client"))
        except Exception as exc:  # totality backstop, keep serving
            send(error_msg("ProtocolError", f"internal dispatch failure: {exc}"))


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="sc2bridge",
        description="Evaluation bridge speaking newline-delimited JSON "
        "on stdin/stdout.",
    )
    parser.add_argument(
        "--stub",
        action="store_true",
        help="skip the game and return canned results (protocol testing)",
    )
    args = parser.parse_args(argv)
    serve(sys.stdin, sys.stdout, stub=args.stub)
    return 0
