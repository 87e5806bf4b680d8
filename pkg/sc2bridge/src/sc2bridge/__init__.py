"""Environment adapter: evaluates generated scripts in the real game
(or a stub) behind the same report contract the arena implements.

The engine talks to a bridge subprocess over newline-delimited JSON.
Stub mode answers every evaluation with deterministic canned results so
the whole protocol is testable without a game installation.
"""

from .client import BridgeClient, BridgeError, bridge_evaluator_factory, run_with_bridge
from .coderfmt import script_format
from .protocol import (
    FORMAT_ID,
    PROTOCOL_VERSION,
    ProtocolViolation,
    decode_line,
    encode_line,
    error_msg,
    hello_msg,
)
from .server import serve
from .stub import stub_report

__version__ = "0.1.0"
