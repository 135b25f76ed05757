"""Reliable, ordered frame channels: in-memory pipes and TCP sockets."""
from __future__ import annotations

import queue
import socket
from typing import Callable

from .errors import TransportError
from .errors import ProtocolError, SessionAbort
from .frames import HEADER, Frame, FrameType, decode_frame, encode_frame, parse_header

_EOF = None


class Transport:
    """Blocking frame channel.  Every frame goes through encode/decode."""

    def send(self, frame: Frame) -> None:
        self.send_bytes(encode_frame(frame))

    def recv(self) -> Frame:
        return decode_frame(self.recv_bytes())

    def send_bytes(self, data: bytes) -> None:
        raise NotImplementedError

    def recv_bytes(self) -> bytes:
        raise NotImplementedError

    def close(self) -> None:
        pass

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


class PipeEnd(Transport):
    def __init__(self, inbox: queue.Queue, outbox: queue.Queue, timeout: float | None = 120.0):
        self._inbox = inbox
        self._outbox = outbox
        self._timeout = timeout
        self._closed = False

    def send_bytes(self, data: bytes) -> None:
        if self._closed:
            raise TransportError("send on closed pipe")
        self._outbox.put(bytes(data))

    def recv_bytes(self) -> bytes:
        if self._closed:
            raise TransportError("receive on closed pipe")
        try:
            item = self._inbox.get(timeout=self._timeout)
        except queue.Empty:
            raise TransportError("timed out waiting for peer") from None
        if item is _EOF:
            self._closed = True
            raise TransportError("peer closed the pipe")
        return item

    def close(self) -> None:
        if not self._closed:
            self._closed = True
            self._outbox.put(_EOF)


def pipe_pair(timeout: float | None = 120.0) -> tuple[PipeEnd, PipeEnd]:
    a_to_b: queue.Queue = queue.Queue()
    b_to_a: queue.Queue = queue.Queue()
    return PipeEnd(b_to_a, a_to_b, timeout), PipeEnd(a_to_b, b_to_a, timeout)


class SocketTransport(Transport):
    def __init__(self, sock: socket.socket):
        self._sock = sock

    @classmethod
    def connect(cls, host: str, port: int, timeout: float = 10.0, retries: int = 50) -> "SocketTransport":
        import time

        last: OSError | None = None
        for _ in range(max(1, retries)):
            try:
                sock = socket.create_connection((host, port), timeout=timeout)
                sock.settimeout(None)
                sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
                return cls(sock)
            except OSError as exc:
                last = exc
                time.sleep(0.1)
        raise TransportError(f"cannot connect to {host}:{port}: {last}")

    @classmethod
    def listen(cls, port: int, host: str = "127.0.0.1", timeout: float | None = 60.0) -> "SocketTransport":
        try:
            with socket.create_server((host, port), reuse_port=False) as srv:
                srv.settimeout(timeout)
                sock, _ = srv.accept()
        except OSError as exc:
            raise TransportError(f"listen on {host}:{port} failed: {exc}") from None
        sock.settimeout(None)
        sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        return cls(sock)

    def send_bytes(self, data: bytes) -> None:
        try:
            self._sock.sendall(data)
        except OSError as exc:
            raise TransportError(f"send failed: {exc}") from None

    def _read_exact(self, n: int) -> bytes:
        buf = bytearray(n)
        view = memoryview(buf)
        got = 0
        while got < n:
            try:
                k = self._sock.recv_into(view[got:], n - got)
            except OSError as exc:
                raise TransportError(f"receive failed: {exc}") from None
            if k == 0:
                raise TransportError("connection closed by peer")
            got += k
        return bytes(buf)

    def recv_bytes(self) -> bytes:
        header = self._read_exact(HEADER.size)
        length, _ = parse_header(header)
        return header + self._read_exact(length)

    def close(self) -> None:
        try:
            self._sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        self._sock.close()


class TapTransport(Transport):
    """Pass-through wrapper that reports every frame sent or received."""

    def __init__(self, inner: Transport, on_frame: Callable[[str, Frame], None]):
        self.inner = inner
        self.on_frame = on_frame

    def send(self, frame: Frame) -> None:
        self.on_frame("send", frame)
        self.inner.send(frame)

    def recv(self) -> Frame:
        frame = self.inner.recv()
        self.on_frame("recv", frame)
        return frame

    def close(self) -> None:
        self.inner.close()


def expect(transport: Transport, ftype: FrameType) -> Frame:
    """Receive one frame of type ``ftype``; ABORT from the peer raises."""
    frame = transport.recv()
    if frame.type is FrameType.ABORT:
        raise SessionAbort(frame.payload.decode(errors="replace") or "peer aborted", remote=True)
    if frame.type is not ftype:
        raise ProtocolError(f"expected {ftype.name}, got {frame.type.name}")
    return frame
