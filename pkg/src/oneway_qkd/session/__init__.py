"""Two-party protocol: quantum exchange, sifting, framing, full sessions."""
from ..frames import Frame, FrameType, decode_frame, encode_frame
from .link import alice_emit, bob_receive, simulate_link
from .protocol import SessionResult, run_inprocess, run_session
from .sifting import AliceRecord, BobRecord, sift_bb84, sift_sarg04
from ..transport import PipeEnd, SocketTransport, TapTransport, Transport, pipe_pair

__all__ = [
    "AliceRecord",
    "BobRecord",
    "Frame",
    "FrameType",
    "PipeEnd",
    "SessionResult",
    "SocketTransport",
    "TapTransport",
    "Transport",
    "alice_emit",
    "bob_receive",
    "decode_frame",
    "encode_frame",
    "pipe_pair",
    "run_inprocess",
    "run_session",
    "sift_bb84",
    "sift_sarg04",
    "simulate_link",
]
