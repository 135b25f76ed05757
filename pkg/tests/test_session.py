import math
import os
import socket
import subprocess
import sys
import threading

import numpy as np
import pytest

from oneway_qkd.errors import SessionAbort, TransportError
from oneway_qkd.frames import FrameType, unpack_bits
from oneway_qkd.optics import OpticsParams
from oneway_qkd.params import Protocol, SystemParams
from oneway_qkd.postproc import pa_cost
from oneway_qkd.session import run_inprocess, run_session
from oneway_qkd.transport import SocketTransport, TapTransport, Transport

BRIGHT = SystemParams(alice_loss_db=0.0, qber_sample=1000)


def free_port() -> int:
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        return s.getsockname()[1]


class KillAfter(Transport):
    """Drops the link once ``limit`` frames of ``ftype`` have gone out."""

    def __init__(self, inner, ftype, limit):
        self.inner, self.ftype, self.left = inner, ftype, limit

    def send(self, frame):
        if frame.type is self.ftype:
            self.left -= 1
            if self.left < 0:
                self.inner.close()
                raise TransportError("link dropped")
        self.inner.send(frame)

    def recv(self):
        return self.inner.recv()

    def close(self):
        self.inner.close()


def test_noiseless_session_length_formula():
    p = BRIGHT.replace(optics=OpticsParams(1.0)).with_detector(dark_per_gate=0.0)
    alice, bob = run_inprocess(p, 2 * 10**6, seed=1)
    assert alice.ok and bob.ok
    assert alice.qber == 0.0 == bob.qber
    assert alice.key_hash == bob.key_hash
    assert np.array_equal(alice.final_key, bob.final_key)
    n = alice.sifted_bits - alice.sample_size
    assert alice.final_bits == math.floor(n - n * pa_cost(0.0) - alice.leaked_ec - p.safety_bits)
    assert alice.final_bits == n - alice.leaked_ec - 30
    assert alice.sifted_bits == pytest.approx(2 * 10**6 * 2.5e-3, abs=5 * math.sqrt(5000))


def test_default_session_agrees():
    alice, bob = run_inprocess(BRIGHT, 2 * 10**6, seed=2, length_km=10.0)
    assert alice.ok and bob.ok
    assert alice.key_hash == bob.key_hash
    assert 0 < alice.final_bits < alice.sifted_bits
    assert abs(alice.qber - 0.0105) < 0.012
    assert alice.leaked_ec == bob.leaked_ec


def test_session_is_deterministic():
    a1, _ = run_inprocess(BRIGHT, 10**6, seed=7)
    a2, _ = run_inprocess(BRIGHT, 10**6, seed=7)
    a3, _ = run_inprocess(BRIGHT, 10**6, seed=8)
    assert a1.summary() | {"elapsed_s": 0} == a2.summary() | {"elapsed_s": 0}
    assert a1.key_hash != a3.key_hash


def test_sarg04_session():
    p = BRIGHT.replace(protocol=Protocol.SARG04)
    alice, bob = run_inprocess(p, 4 * 10**6, seed=3)
    assert alice.ok and alice.key_hash == bob.key_hash
    # half the BB84 yield: 4e6 * 0.1 * 0.1 / 8
    assert alice.sifted_bits == pytest.approx(5000, abs=5 * math.sqrt(5000))


def test_high_qber_gives_zero_key():
    p = BRIGHT.replace(optics=OpticsParams(0.75))
    alice, bob = run_inprocess(p, 10**6, seed=4)
    assert alice.status == bob.status == "zero_key"
    assert alice.final_bits == bob.final_bits == 0
    assert alice.qber > 0.114


def test_too_few_detections_is_zero_key():
    alice, bob = run_inprocess(BRIGHT, 10, seed=5)
    assert alice.status == bob.status == "zero_key"


def test_parameter_mismatch_aborts():
    from oneway_qkd.transport import pipe_pair

    a_end, b_end = pipe_pair(timeout=10)
    out = {}
    t = threading.Thread(target=lambda: out.setdefault("bob", _catch(run_session, BRIGHT.replace(mu=0.2), 1000, b_end, "bob", 1)))
    t.start()
    with pytest.raises(SessionAbort) as exc:
        run_session(BRIGHT, 1000, a_end, "alice", 1)
    t.join()
    assert exc.value.remote
    assert isinstance(out["bob"], SessionAbort)


def _catch(fn, *args):
    try:
        return fn(*args)
    except BaseException as exc:
        return exc


def test_leak_matches_wire_parities():
    seen = []

    def wrap(role, t):
        if role != "alice":
            return t

        def tap(direction, frame):
            if direction == "send" and frame.type is FrameType.PARITY_REPLY:
                seen.append(unpack_bits(frame.payload).size)

        return TapTransport(t, tap)

    alice, bob = run_inprocess(BRIGHT, 10**6, seed=6, wrap=wrap)
    assert alice.leaked_ec == bob.leaked_ec == sum(seen)


def test_link_drop_mid_cascade_raises_transport_error():
    wrap = lambda role, t: KillAfter(t, FrameType.PARITIES, 3) if role == "bob" else t  # noqa: E731
    with pytest.raises(TransportError):
        run_inprocess(BRIGHT, 10**6, seed=6, wrap=wrap)


def test_cli_peer_killed_mid_cascade_writes_no_key(tmp_path):
    port = free_port()
    key_file = tmp_path / "alice.key"
    cfg = tmp_path / "alice.cfg"
    cfg.write_text(
        f"alice_loss_db=0\nqber_sample=1000\nn_clocks=1000000\nseed=9\n"
        f"transport=connect:127.0.0.1:{port}\noutput_path={key_file}\n"
    )
    env = dict(os.environ)
    env.pop("QKD_SEED", None)
    proc = subprocess.Popen(
        [sys.executable, "-m", "oneway_qkd", "session", str(cfg)], env=env, stdout=subprocess.PIPE, stderr=subprocess.PIPE
    )
    bob_t = SocketTransport.listen(port, timeout=60)
    with pytest.raises(TransportError):
        run_session(BRIGHT, 10**6, KillAfter(bob_t, FrameType.PARITIES, 2), "bob", 9)
    _, err = proc.communicate(timeout=60)
    assert proc.returncode == 2, err
    assert b"transport error" in err
    assert not key_file.exists()
