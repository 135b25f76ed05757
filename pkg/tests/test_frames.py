import threading

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oneway_qkd.errors import FramingError, ProtocolError, SessionAbort, TransportError
from oneway_qkd.frames import (
    Frame,
    FrameType,
    decode_frame,
    encode_frame,
    pack_bits,
    unpack_bits,
)
from oneway_qkd.transport import SocketTransport, TapTransport, expect, pipe_pair


def test_hello_layout():
    assert encode_frame(Frame(FrameType.HELLO)) == bytes.fromhex("0000000001")


def test_parity_reply_layout():
    # tenth declared type -> tag 0x0A
    assert encode_frame(Frame(FrameType.PARITY_REPLY, b"\xab")) == bytes.fromhex("010000000aab")
    assert decode_frame(bytes.fromhex("0100000008ab")).type is FrameType.SHUFFLE_SEED


def test_tags_follow_declaration_order():
    names = ["HELLO", "PARAMS", "DETECTIONS", "BASIS_REVEAL", "SIFT_RESULT", "QBER_SAMPLE", "QBER_RESULT",
             "SHUFFLE_SEED", "PARITIES", "PARITY_REPLY", "PA_SEED", "KEY_HASH", "ABORT"]
    assert [FrameType[n].value for n in names] == list(range(1, 14))


def test_round_trip_fuzz():
    rng = np.random.default_rng(0)
    types = list(FrameType)
    for _ in range(10**4):
        f = Frame(types[rng.integers(len(types))], rng.bytes(int(rng.integers(0, 64))))
        assert decode_frame(encode_frame(f)) == f


@given(st.sampled_from(list(FrameType)), st.binary(max_size=300))
def test_round_trip_property(ftype, payload):
    f = Frame(ftype, payload)
    assert decode_frame(encode_frame(f)) == f


def test_truncated_buffers():
    data = encode_frame(Frame(FrameType.PARAMS, b"hello"))
    with pytest.raises(FramingError):
        decode_frame(data[:3])
    with pytest.raises(FramingError):
        decode_frame(data[:-1])


def test_unknown_tag():
    with pytest.raises(ProtocolError):
        decode_frame(bytes.fromhex("00000000ff"))


@given(st.lists(st.integers(0, 1), max_size=100))
def test_bit_packing_round_trip(bits):
    arr = np.array(bits, dtype=np.uint8)
    assert np.array_equal(unpack_bits(pack_bits(arr)), arr)


def test_pipe_transport_and_eof():
    a, b = pipe_pair(timeout=5)
    a.send(Frame(FrameType.HELLO, b"x"))
    assert b.recv() == Frame(FrameType.HELLO, b"x")
    a.close()
    with pytest.raises(TransportError):
        b.recv()


def test_expect_raises_on_abort_and_wrong_type():
    a, b = pipe_pair(timeout=5)
    a.send(Frame(FrameType.ABORT, b"nope"))
    with pytest.raises(SessionAbort, match="nope"):
        expect(b, FrameType.HELLO)
    a.send(Frame(FrameType.PARAMS))
    with pytest.raises(ProtocolError):
        expect(b, FrameType.HELLO)


def test_tap_sees_every_frame():
    a, b = pipe_pair(timeout=5)
    seen = []
    tap = TapTransport(a, lambda d, f: seen.append((d, f.type)))
    tap.send(Frame(FrameType.HELLO))
    b.send(Frame(FrameType.PARAMS))
    tap.recv()
    assert seen == [("send", FrameType.HELLO), ("recv", FrameType.PARAMS)]


def test_socket_transport_loopback():
    import socket

    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        port = s.getsockname()[1]
    box = {}

    def server():
        box["t"] = SocketTransport.listen(port)

    th = threading.Thread(target=server)
    th.start()
    client = SocketTransport.connect("127.0.0.1", port)
    th.join()
    srv = box["t"]
    big = bytes(range(256)) * 4000
    client.send(Frame(FrameType.SIM_PULSES, big))
    assert srv.recv() == Frame(FrameType.SIM_PULSES, big)
    srv.send(Frame(FrameType.KEY_HASH, b"12345678"))
    assert client.recv().payload == b"12345678"
    client.close()
    with pytest.raises(TransportError):
        srv.recv()
    srv.close()
