"""Alice and Bob role state machines for one key-distribution session.

Message sequence (A = Alice, B = Bob)::

    A->B HELLO          B->A HELLO
    A->B PARAMS         B->A PARAMS (echo as acknowledgement)
    A->B SIM_PULSES x k                     (simulated fiber, one per chunk)
    B->A DETECTIONS                         (clock indices with a click)
    A->B BASIS_REVEAL   B->A BASIS_REVEAL   B->A SIFT_RESULT
    A->B QBER_SAMPLE    B->A QBER_RESULT
    A->B SHUFFLE_SEED   (B->A PARITIES / A->B PARITY_REPLY)* B->A PARITIES(empty)
    A->B PA_SEED
    A->B KEY_HASH       B->A KEY_HASH | ABORT

Either side may send ABORT at any point.  Sessions whose estimated QBER is
past the security limit, or whose final length is zero, stop after the
step where both sides can see that and report ``status="zero_key"``.
"""
from __future__ import annotations

import logging
import struct
import threading
import time
from dataclasses import dataclass, field

import numpy as np

from ..detector import DetectorState
from ..errors import ProtocolError, QKDError, SessionAbort, TransportError
from ..frames import (
    Frame,
    FrameType,
    json_payload,
    pack_bits,
    pack_ints,
    parse_json,
    unpack_bits,
    unpack_ints,
)
from ..keys import bits_to_hex, key_hash
from ..params import Protocol, SystemParams, to_flat
from ..postproc.cascade import cascade_alice, cascade_bob
from ..postproc.estimation import default_sample_size, sample_positions
from ..postproc.privacy import PaParams, privacy_amplify
from ..postproc.security import final_key_length, security_limit
from ..transport import Transport, expect, pipe_pair
from .link import CHUNK, SeedStreams, alice_emit_batch, alice_quarters, bob_receive_batch, fiber_mean
from .sifting import bb84_keep, sarg04_decide

log = logging.getLogger(__name__)

PROTOCOL_VERSION = 1
# k1 for an all-clean sample; keeps the first Cascade pass finite
QBER_FLOOR = 1e-3


@dataclass
class SessionResult:
    role: str
    status: str
    protocol: str
    n_clocks: int
    length_km: float
    detections: int = 0
    sifted_bits: int = 0
    sample_size: int = 0
    qber: float | None = None
    leaked_ec: int = 0
    final_bits: int = 0
    key_hash: str | None = None
    elapsed_s: float = 0.0
    final_key: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.uint8), repr=False)

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    def summary(self) -> dict:
        return {
            "role": self.role,
            "status": self.status,
            "protocol": self.protocol,
            "n_clocks": self.n_clocks,
            "length_km": self.length_km,
            "detections": self.detections,
            "sifted_bits": self.sifted_bits,
            "sample_size": self.sample_size,
            "qber": "" if self.qber is None else f"{self.qber:.6f}",
            "leaked_ec": self.leaked_ec,
            "final_bits": self.final_bits,
            "key_hash": self.key_hash or "",
            "elapsed_s": f"{self.elapsed_s:.3f}",
        }

    def key_hex(self) -> str:
        return bits_to_hex(self.final_key)


def plan_sample(n: int, p: SystemParams) -> int:
    """Bits disclosed for QBER estimation; never more than half the key."""
    wanted = p.qber_sample if p.qber_sample is not None else default_sample_size(n)
    return min(wanted, n // 2)


def _session_header(p: SystemParams, n_clocks: int, length_km: float) -> dict:
    return {"version": PROTOCOL_VERSION, "params": to_flat(p), "n_clocks": n_clocks, "length_km": length_km}


class _Role:
    def __init__(self, name, p, n_clocks, length_km, transport, streams):
        self.p = p
        self.t = transport
        self.streams = streams
        self.result = SessionResult(
            role=name, status="ok", protocol=p.protocol.value, n_clocks=n_clocks, length_km=length_km
        )

    def zero_key(self) -> SessionResult:
        self.result.status = "zero_key"
        self.result.final_bits = 0
        return self.result


class _Alice(_Role):
    def run(self) -> SessionResult:
        p, t, rng, res = self.p, self.t, self.streams.alice, self.result
        header = _session_header(p, res.n_clocks, res.length_km)
        t.send(Frame(FrameType.HELLO, json_payload({"version": PROTOCOL_VERSION, "role": "alice"})))
        expect(t, FrameType.HELLO)
        t.send(Frame(FrameType.PARAMS, json_payload(header)))
        if parse_json(expect(t, FrameType.PARAMS).payload) != parse_json(json_payload(header)):
            raise ProtocolError("Bob acknowledged different parameters")

        b1 = np.empty(res.n_clocks, dtype=np.uint8)
        b2 = np.empty(res.n_clocks, dtype=np.uint8)
        for start in range(0, res.n_clocks, CHUNK):
            n = min(CHUNK, res.n_clocks - start)
            c1, c2 = alice_emit_batch(rng, n)
            b1[start:start + n], b2[start:start + n] = c1, c2
            t.send(Frame(FrameType.SIM_PULSES, struct.pack("<Q", start) + alice_quarters(c1, c2).tobytes()))

        idx = unpack_ints(expect(t, FrameType.DETECTIONS).payload)
        if idx.size and (idx[0] < 0 or idx[-1] >= res.n_clocks or np.any(np.diff(idx) <= 0)):
            raise ProtocolError("DETECTIONS holds invalid clock indices")
        res.detections = int(idx.size)
        bb84 = p.protocol is Protocol.BB84
        t.send(Frame(FrameType.BASIS_REVEAL, pack_bits(b2[idx] if bb84 else b1[idx])))
        bob_reveal = unpack_bits(expect(t, FrameType.BASIS_REVEAL).payload)
        keep = unpack_bits(expect(t, FrameType.SIFT_RESULT).payload).astype(bool)
        if bob_reveal.size != idx.size or keep.size != idx.size:
            raise ProtocolError("sifting announcements do not match the detection list")
        if bb84 and not np.array_equal(keep, bb84_keep(b2[idx], bob_reveal)):
            raise ProtocolError("Bob's sift mask disagrees with the announced bases")
        key = (b1[idx] if bb84 else b2[idx])[keep]
        res.sifted_bits = int(key.size)

        s = plan_sample(key.size, p)
        res.sample_size = s
        if s == 0:
            return self.zero_key()
        pos = sample_positions(key.size, s, rng)
        t.send(Frame(FrameType.QBER_SAMPLE, struct.pack("<Q", s) + pack_ints(pos) + pack_bits(key[pos])))
        errors = int(parse_json(expect(t, FrameType.QBER_RESULT).payload)["errors"])
        res.qber = errors / s
        key = np.delete(key, pos)
        if res.qber >= security_limit():
            return self.zero_key()

        seeds = rng.integers(0, 2**63, size=p.cascade_passes - 1, dtype=np.int64)
        t.send(Frame(FrameType.SHUFFLE_SEED, pack_ints(seeds)))
        res.leaked_ec = cascade_alice(key, t, [int(x) for x in seeds], p.cascade_passes)

        m = final_key_length(key.size, res.qber, res.leaked_ec, p.safety_bits)
        if m == 0:
            return self.zero_key()
        pa = PaParams.random(key.size, m, rng)
        t.send(Frame(FrameType.PA_SEED, pack_bits(pa.seed)))
        final = privacy_amplify(key, pa)

        mine = key_hash(final)
        t.send(Frame(FrameType.KEY_HASH, struct.pack("<Q", mine)))
        (theirs,) = struct.unpack("<Q", expect(t, FrameType.KEY_HASH).payload)
        if theirs != mine:
            raise SessionAbort("key hash mismatch")
        res.final_key, res.final_bits, res.key_hash = final, int(final.size), f"{mine:016x}"
        return res


class _Bob(_Role):
    def run(self) -> SessionResult:
        p, t, res = self.p, self.t, self.result
        header = _session_header(p, res.n_clocks, res.length_km)
        expect(t, FrameType.HELLO)
        t.send(Frame(FrameType.HELLO, json_payload({"version": PROTOCOL_VERSION, "role": "bob"})))
        theirs = parse_json(expect(t, FrameType.PARAMS).payload)
        if theirs != parse_json(json_payload(header)):
            raise SessionAbort("parameter mismatch between Alice and Bob")
        t.send(Frame(FrameType.PARAMS, json_payload(header)))

        mean = fiber_mean(p, res.length_km)
        state = DetectorState()
        parts = []
        received = 0
        while received < res.n_clocks:
            payload = expect(t, FrameType.SIM_PULSES).payload
            (start,) = struct.unpack_from("<Q", payload)
            quarters = np.frombuffer(payload, dtype=np.uint8, offset=8)
            if start != received:
                raise ProtocolError(f"pulse block starts at clock {start}, expected {received}")
            b3, port = bob_receive_batch(
                quarters, mean, self.streams.bob, self.streams.fiber, p.optics, p.detector, state
            )
            hit = np.flatnonzero(port >= 0)
            parts.append((hit + start, b3[hit], port[hit].astype(np.uint8)))
            received += quarters.size
        idx = np.concatenate([x[0] for x in parts]).astype(np.int64) if parts else np.zeros(0, np.int64)
        b3 = np.concatenate([x[1] for x in parts]) if parts else np.zeros(0, np.uint8)
        port = np.concatenate([x[2] for x in parts]) if parts else np.zeros(0, np.uint8)
        res.detections = int(idx.size)
        t.send(Frame(FrameType.DETECTIONS, pack_ints(idx)))

        alice_reveal = unpack_bits(expect(t, FrameType.BASIS_REVEAL).payload)
        if alice_reveal.size != idx.size:
            raise ProtocolError("Alice's announcement does not match the detection list")
        if p.protocol is Protocol.BB84:
            t.send(Frame(FrameType.BASIS_REVEAL, pack_bits(b3)))
            keep = bb84_keep(alice_reveal, b3)
            key = port[keep]
        else:
            t.send(Frame(FrameType.BASIS_REVEAL, pack_bits(port)))
            keep, bit = sarg04_decide(alice_reveal, b3, port)
            key = bit[keep]
        t.send(Frame(FrameType.SIFT_RESULT, pack_bits(keep.astype(np.uint8))))
        res.sifted_bits = int(key.size)

        s = plan_sample(key.size, p)
        res.sample_size = s
        if s == 0:
            return self.zero_key()
        payload = expect(t, FrameType.QBER_SAMPLE).payload
        (count,) = struct.unpack_from("<Q", payload)
        if count != s:
            raise ProtocolError(f"QBER sample of {count} bits, expected {s}")
        pos = unpack_ints(payload[8:8 + 8 * s])
        alice_bits = unpack_bits(payload[8 + 8 * s:])
        if pos.size != s or alice_bits.size != s or np.any(pos < 0) or np.any(pos >= key.size):
            raise ProtocolError("malformed QBER sample")
        errors = int(np.count_nonzero(key[pos] != alice_bits))
        t.send(Frame(FrameType.QBER_RESULT, json_payload({"errors": errors, "sample": s})))
        res.qber = errors / s
        key = np.delete(key, pos)
        if res.qber >= security_limit():
            return self.zero_key()

        seeds = unpack_ints(expect(t, FrameType.SHUFFLE_SEED).payload)
        if seeds.size != p.cascade_passes - 1:
            raise ProtocolError("wrong number of shuffle seeds")
        key, res.leaked_ec = cascade_bob(
            key, max(res.qber, QBER_FLOOR), t, [int(x) for x in seeds], p.cascade_passes, p.k1_coefficient
        )

        m = final_key_length(key.size, res.qber, res.leaked_ec, p.safety_bits)
        if m == 0:
            return self.zero_key()
        seed = unpack_bits(expect(t, FrameType.PA_SEED).payload)
        final = privacy_amplify(key, PaParams(seed, m))

        (theirs,) = struct.unpack("<Q", expect(t, FrameType.KEY_HASH).payload)
        mine = key_hash(final)
        if theirs != mine:
            raise SessionAbort("key hash mismatch")
        t.send(Frame(FrameType.KEY_HASH, struct.pack("<Q", mine)))
        res.final_key, res.final_bits, res.key_hash = final, int(final.size), f"{mine:016x}"
        return res


def run_session(
    params: SystemParams,
    n_clocks: int,
    transport: Transport,
    role: str,
    seed: int | None = None,
    length_km: float = 0.0,
) -> SessionResult:
    """Play one role of a full session over ``transport``.

    Both roles must be given the same parameters; for reproducible keys they
    must also share ``seed``.  On failure the peer is sent ABORT (when the
    channel still works), the transport is closed and the error re-raised.
    """
    if n_clocks <= 0:
        raise ValueError("n_clocks must be positive")
    streams = SeedStreams.from_seed(seed)
    cls = {"alice": _Alice, "bob": _Bob}[role]
    machine = cls(role, params, n_clocks, float(length_km), transport, streams)
    t0 = time.perf_counter()
    try:
        result = machine.run()
    except SessionAbort as exc:
        if not exc.remote:
            _try_abort(transport, exc.reason)
        transport.close()
        raise
    except TransportError:
        transport.close()
        raise
    except QKDError as exc:
        _try_abort(transport, str(exc))
        transport.close()
        raise SessionAbort(str(exc)) from exc
    result.elapsed_s = time.perf_counter() - t0
    log.info("%s finished: %s", role, result.summary())
    return result


def _try_abort(transport: Transport, reason: str) -> None:
    try:
        transport.send(Frame(FrameType.ABORT, reason.encode()))
    except QKDError:
        pass


def run_inprocess(
    params: SystemParams,
    n_clocks: int,
    seed: int | None = None,
    length_km: float = 0.0,
    wrap=None,
) -> tuple[SessionResult, SessionResult]:
    """Both roles on an in-memory pipe; Bob runs on a helper thread.

    ``wrap`` optionally maps ``(role, transport)`` to a wrapped transport,
    e.g. a :class:`~.transport.TapTransport`.
    """
    a_end, b_end = pipe_pair()
    if wrap is not None:
        a_end, b_end = wrap("alice", a_end), wrap("bob", b_end)
    out: dict[str, object] = {}

    def bob():
        try:
            out["bob"] = run_session(params, n_clocks, b_end, "bob", seed, length_km)
        except BaseException as exc:
            out["bob"] = exc

    worker = threading.Thread(target=bob, name="bob", daemon=True)
    worker.start()
    try:
        alice = run_session(params, n_clocks, a_end, "alice", seed, length_km)
    finally:
        worker.join()
    if isinstance(out.get("bob"), BaseException):
        raise out["bob"]
    return alice, out["bob"]
