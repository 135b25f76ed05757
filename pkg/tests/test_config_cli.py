import io
import os
import socket
import subprocess
import sys

import pytest

from oneway_qkd.cli import SWEEP_HEADER, main
from oneway_qkd.config import parse_config
from oneway_qkd.errors import ConfigError
from oneway_qkd.params import DEFAULT_DARK_PER_GATE, Protocol

HEADER = "length_km,model_sifted_bps,model_qber,model_final_bps,mc_sifted_bps,mc_qber,mc_final_bps"


def run_cli(tmp_path, text, command="sweep", env=None):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(text)
    out = io.StringIO()
    code = main([command, str(cfg)], out=out) if env is None else _with_env(env, lambda: main([command, str(cfg)], out=out))
    return code, out.getvalue()


def _with_env(env, fn):
    old = dict(os.environ)
    os.environ.update(env)
    try:
        return fn()
    finally:
        os.environ.clear()
        os.environ.update(old)


def test_empty_config_defaults():
    cfg = parse_config("")
    p = cfg.params
    assert (p.clock_hz, p.mu, p.alpha_db_per_km, p.qber_opt) == (1e6, 0.1, 0.205, pytest.approx(0.01))
    assert p.dark_per_gate == DEFAULT_DARK_PER_GATE
    assert cfg.n_clocks == 0 and cfg.transport == "inproc"


def test_sweep_points_and_comments():
    cfg = parse_config("# system\nqe=0.05   # detector\n\nsweep=0,120,5\nprotocol = sarg04\n")
    assert cfg.params.qe == 0.05
    assert cfg.params.protocol is Protocol.SARG04
    assert len(cfg.sweep_points()) == 25
    assert cfg.sweep_points()[-1] == 120.0


@pytest.mark.parametrize(
    "text, line",
    [
        ("mu=-1", 1),
        ("qe=0.1\nbogus=3", 2),
        ("qe=0.1\n\nqe=0.2", 3),
        ("sweep=10,0,5", 1),
        ("sweep=0,10,0", 1),
        ("n_clocks=-5", 1),
        ("just words", 1),
        ("visibility=0.9\nqber_opt=0.02", 2),
        ("dark_per_gate=1e-6\ndark_anchor=100,0.06", 2),
        ("transport=carrier-pigeon", 1),
        ("dark_anchor=100,0.005", 1),
    ],
)
def test_config_errors_cite_line(text, line):
    with pytest.raises(ConfigError) as exc:
        parse_config(text)
    assert exc.value.line == line
    assert f"line {line}" in str(exc.value)


def test_seed_env_override():
    assert parse_config("seed=3").seed == 3
    assert parse_config("seed=3", env={"QKD_SEED": "11"}).seed == 11
    with pytest.raises(ConfigError):
        parse_config("", env={"QKD_SEED": "x"})


def test_dark_derivations():
    cfg = parse_config("qe=0.05\ndark_anchor=100,0.06")
    assert cfg.params.dark_per_gate == pytest.approx(6.344937388508e-07, rel=1e-9)
    cfg = parse_config("dark_limit_km=98")
    assert cfg.params.dark_per_gate == pytest.approx(3.29727120762e-06, rel=1e-9)
    cfg = parse_config("qe=0.075\ndark_model=1e-7,30")
    assert cfg.params.dark_per_gate == pytest.approx(1e-7 * 9.487735836358526, rel=1e-12)


def test_sweep_csv(tmp_path):
    code, text = run_cli(tmp_path, "sweep=0,100,50")
    assert code == 0
    lines = text.splitlines()
    assert lines[0] == HEADER == ",".join(SWEEP_HEADER)
    assert len(lines) == 4
    assert all(len(l.split(",")) == 7 and l.endswith(",,,") for l in lines[1:])


def test_sweep_anchor_row(tmp_path):
    code, text = run_cli(tmp_path, "qe=0.05\ndark_anchor=100,0.06\nsweep=0,100,50")
    row = text.splitlines()[-1].split(",")
    assert row[0] == "100"
    assert float(row[2]) == pytest.approx(0.06, abs=0.002)


def test_sweep_with_monte_carlo_is_byte_identical(tmp_path):
    out = tmp_path / "rates.csv"
    text = f"sweep=0,40,20\nn_clocks=200000\nseed=5\noutput_path={out}\n"
    assert run_cli(tmp_path, text)[0] == 0
    first = out.read_bytes()
    assert run_cli(tmp_path, text)[0] == 0
    assert out.read_bytes() == first
    rows = first.decode().splitlines()[1:]
    assert all(c != "" for c in rows[0].split(","))


def test_seed_env_changes_monte_carlo(tmp_path):
    text = "sweep=0,0,1\nn_clocks=100000\nseed=5\n"
    _, a = run_cli(tmp_path, text)
    _, b = run_cli(tmp_path, text, env={"QKD_SEED": "6"})
    assert a.splitlines()[0] == b.splitlines()[0] and a != b


def test_calibrate_and_analyze(tmp_path):
    code, text = run_cli(tmp_path, "", "calibrate")
    assert code == 0
    out = dict(l.split("=") for l in text.splitlines())
    assert out["limit_qe5_km"] == "118.23"
    assert out["limit_qe10_km"] == "98.00"
    assert out["limit_qe10_dark_div10_km"] == "146.78"
    assert float(out["d_ratio"]) == pytest.approx(5.1967, abs=1e-4)

    code, text = run_cli(tmp_path, "qe=0.05\ndark_anchor=100,0.06", "analyze")
    assert "distance_limit_km=118.23" in text
    code, text = run_cli(tmp_path, "dark_per_gate=0", "analyze")
    assert "distance_limit_km=unbounded" in text


def test_exit_codes(tmp_path, capsys):
    assert run_cli(tmp_path, "mu=-1")[0] == 1
    assert "line 1" in capsys.readouterr().err
    assert main(["sweep", str(tmp_path / "missing.cfg")], out=io.StringIO()) == 1
    assert run_cli(tmp_path, "n_clocks=0", "session")[0] == 1
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        port = s.getsockname()[1]
    # nobody listening
    from oneway_qkd import transport

    orig = transport.SocketTransport.connect.__func__
    transport.SocketTransport.connect = classmethod(lambda cls, h, p: orig(cls, h, p, timeout=0.2, retries=2))
    try:
        code, _ = run_cli(tmp_path, f"n_clocks=1000\ntransport=connect:127.0.0.1:{port}", "session")
    finally:
        transport.SocketTransport.connect = classmethod(orig)
    assert code == 2


def test_inprocess_session_writes_key(tmp_path):
    key = tmp_path / "k.hex"
    code, text = run_cli(tmp_path, f"alice_loss_db=0\nqber_sample=1000\nn_clocks=1000000\nseed=1\noutput_path={key}", "session")
    assert code == 0
    out = dict(l.split("=", 1) for l in text.splitlines())
    assert out["status"] == "ok"
    assert out["key_hash"] == out["peer_key_hash"] != ""
    hexkey = key.read_text().strip()
    assert hexkey == hexkey.lower()
    assert len(hexkey) == 2 * -(-int(out["final_bits"]) // 8)


def test_zero_key_session_exits_cleanly(tmp_path):
    key = tmp_path / "k.hex"
    code, text = run_cli(tmp_path, f"visibility=0.75\nalice_loss_db=0\nn_clocks=500000\noutput_path={key}", "session")
    assert code == 0
    assert "status=zero_key" in text and "final_bits=0" in text
    assert not key.exists()
