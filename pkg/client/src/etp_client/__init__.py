"""Remote client SDK for the embodied tool protocol.

Speaks the newline-delimited canonical-JSON wire format, surfaces server
errors as typed values, and runs two-pass agent loops whose JSONL traces
score directly with the server package's CLI.  Contains no scoring logic.
"""

from .client import (
    ADDR_ENV_VAR,
    DEFAULT_ADDR,
    ClientError,
    ConnectFailure,
    ConnectionLost,
    InvokeResult,
    RemoteError,
    RemoteToolClient,
    connect,
    resolve_addr,
)
from .loop import (
    MAX_TOOL_CALLS,
    LoopResult,
    StepView,
    agent_loop,
    replay_decision_fn,
)
from .wire import (
    MAX_FRAME_BYTES,
    FrameError,
    FrameReader,
    Response,
    canonical_dumps,
    encode_frame,
    parse_response,
    request_frame,
)

__all__ = [
    "ADDR_ENV_VAR",
    "DEFAULT_ADDR",
    "MAX_FRAME_BYTES",
    "MAX_TOOL_CALLS",
    "ClientError",
    "ConnectFailure",
    "ConnectionLost",
    "FrameError",
    "FrameReader",
    "InvokeResult",
    "LoopResult",
    "RemoteError",
    "RemoteToolClient",
    "Response",
    "StepView",
    "agent_loop",
    "canonical_dumps",
    "connect",
    "encode_frame",
    "parse_response",
    "replay_decision_fn",
    "request_frame",
    "resolve_addr",
]

__version__ = "0.1.0"
