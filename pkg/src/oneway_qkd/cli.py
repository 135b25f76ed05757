"""Command-line front end.

    oneway-qkd sweep CONFIG       model (and optional Monte Carlo) CSV vs distance
    oneway-qkd session CONFIG     run a full two-party session
    oneway-qkd calibrate CONFIG   dark counts from the two reference anchors
    oneway-qkd analyze CONFIG     distance limit for the configured system

Exit codes: 0 success, 1 config error, 2 transport error, 3 key-verification abort.
"""
from __future__ import annotations

import argparse
import csv
import io
import logging
import math
import os
import sys
from typing import TextIO

from .analysis import (
    UNBOUNDED,
    distance_limit,
    final_rate_model,
    mc_vs_model,
    anchor_calibration,
    qber_model,
    sifted_rate_model,
)
from .config import RunConfig, load_config
from .errors import ConfigError, QKDError, SessionAbort, TransportError
from .postproc.security import secret_fraction, security_limit
from .session.protocol import SessionResult, run_inprocess, run_session
from .transport import SocketTransport

EXIT_OK, EXIT_CONFIG, EXIT_TRANSPORT, EXIT_ABORT = 0, 1, 2, 3

SWEEP_HEADER = [
    "length_km",
    "model_sifted_bps",
    "model_qber",
    "model_final_bps",
    "mc_sifted_bps",
    "mc_qber",
    "mc_final_bps",
]

log = logging.getLogger("oneway_qkd")


def _num(x: float) -> str:
    return format(x, ".10g")


def sweep_rows(cfg: RunConfig) -> list[list[str]]:
    p = cfg.params
    rows = []
    for i, length in enumerate(cfg.sweep_points()):
        signal, dark = sifted_rate_model(p, length)
        row = [_num(length), _num(signal + dark), _num(qber_model(p, length)), _num(final_rate_model(p, length))]
        if cfg.n_clocks > 0:
            mc = mc_vs_model(p, length, cfg.n_clocks, seed=(cfg.seed, i))
            rate = mc.sifted * p.clock_hz / cfg.n_clocks
            if mc.sifted:
                q = mc.measured_qber
                final = rate * secret_fraction(q, p.ec_efficiency) if q < 0.5 else 0.0
                row += [_num(rate), _num(q), _num(final)]
            else:
                row += [_num(rate), "", _num(0.0)]
        else:
            row += ["", "", ""]
        rows.append(row)
    return rows


def run_sweep(cfg: RunConfig, out: TextIO | None = None) -> list[list[str]]:
    rows = sweep_rows(cfg)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SWEEP_HEADER)
    writer.writerows(rows)
    if cfg.output_path:
        try:
            with open(cfg.output_path, "w", encoding="utf-8", newline="") as fh:
                fh.write(buf.getvalue())
        except OSError as exc:
            raise OSError(f"cannot write {cfg.output_path}: {exc}") from exc
    else:
        (out or sys.stdout).write(buf.getvalue())
    return rows


def _print_summary(result: SessionResult, out: TextIO, prefix: str = "") -> None:
    for key, value in result.summary().items():
        out.write(f"{prefix}{key}={value}\n")


def run_two_party(cfg: RunConfig, out: TextIO | None = None) -> int:
    out = out or sys.stdout
    if cfg.n_clocks <= 0:
        raise ConfigError("session needs n_clocks > 0")
    if cfg.transport == "inproc":
        result, peer = run_inprocess(cfg.params, cfg.n_clocks, cfg.seed, cfg.length_km)
        _print_summary(result, out)
        out.write(f"peer_key_hash={peer.key_hash or ''}\n")
    else:
        kind, _, where = cfg.transport.partition(":")
        if kind == "listen":
            transport = SocketTransport.listen(int(where))
        else:
            host, _, port = where.rpartition(":")
            transport = SocketTransport.connect(host, int(port))
        try:
            result = run_session(cfg.params, cfg.n_clocks, transport, cfg.session_role, cfg.seed, cfg.length_km)
        finally:
            transport.close()
        _print_summary(result, out)
    if result.ok and cfg.output_path:
        with open(cfg.output_path, "w", encoding="utf-8") as fh:
            fh.write(result.key_hex() + "\n")
    return EXIT_OK


def run_calibrate(cfg: RunConfig, out: TextIO) -> int:
    cal = anchor_calibration(cfg.params)
    out.write(f"d_qe5={_num(cal.d5)}\n")
    out.write(f"d_qe10={_num(cal.d10)}\n")
    out.write(f"d_ratio={_num(cal.ratio)}\n")
    out.write(f"dark_model_a={_num(cal.model.a)}\n")
    out.write(f"dark_model_b={_num(cal.model.b)}\n")
    out.write(f"limit_qe5_km={cal.limit_qe5_km:.2f}\n")
    out.write(f"limit_qe10_km={cal.limit_qe10_km:.2f}\n")
    out.write(f"limit_qe10_dark_div10_km={cal.limit_qe10_low_dark_km:.2f}\n")
    return EXIT_OK


def run_analyze(cfg: RunConfig, out: TextIO) -> int:
    p = cfg.params
    limit = distance_limit(p)
    out.write(f"qe={_num(p.qe)}\n")
    out.write(f"dark_per_gate={_num(p.dark_per_gate)}\n")
    out.write(f"qber_opt={_num(p.qber_opt)}\n")
    out.write(f"security_limit_qber={security_limit():.6f}\n")
    out.write(f"distance_limit_km={'unbounded' if limit == UNBOUNDED else f'{limit:.2f}'}\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="oneway-qkd", description=__doc__.splitlines()[0] if __doc__ else None)
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in [
        ("sweep", "write model/Monte Carlo rates versus fiber length as CSV"),
        ("session", "run a two-party key distribution session"),
        ("calibrate", "print calibrated dark counts and the exponential dark model"),
        ("analyze", "print the distance limit for the configured system"),
    ]:
        cmd = sub.add_parser(name, help=text)
        cmd.add_argument("config", help="key=value configuration file")
    return parser


def main(argv: list[str] | None = None, out: TextIO | None = None) -> int:
    args = build_parser().parse_args(argv)
    out = out or sys.stdout
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config, env=os.environ)
        if args.command == "sweep":
            run_sweep(cfg, out)
            return EXIT_OK
        if args.command == "session":
            return run_two_party(cfg, out)
        if args.command == "calibrate":
            return run_calibrate(cfg, out)
        return run_analyze(cfg, out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except TransportError as exc:
        print(f"transport error: {exc}", file=sys.stderr)
        return EXIT_TRANSPORT
    except SessionAbort as exc:
        print(f"session aborted: {exc}", file=sys.stderr)
        return EXIT_ABORT
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except QKDError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
