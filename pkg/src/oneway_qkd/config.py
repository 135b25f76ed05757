"""``key=value`` run configuration.

One setting per line, ``#`` starts a comment, blank lines are ignored.
Every key is optional; absent keys take the :class:`SystemParams` defaults.
The dark-count probability can be given directly (``dark_per_gate``) or
derived from one of ``dark_anchor=L,qber``, ``dark_limit_km=L`` or
``dark_model=a,b`` at the configured ``qe``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping

from .analysis import calibrate_dark, calibrate_dark_from_limit
from .detector import DarkModel, DetectorParams, DoubleClickPolicy, dark_model_eval
from .errors import ConfigError, QKDError
from .optics import OpticsParams
from .params import DEFAULT_DARK_PER_GATE, DEFAULT_QBER_OPT, Protocol, QberMode, SystemParams

SEED_ENV = "QKD_SEED"


def _float(lo=-math.inf, hi=math.inf, lo_open=False, hi_open=False):
    def parse(text: str) -> float:
        x = float(text)
        if not math.isfinite(x):
            raise ValueError("must be finite")
        if x < lo or (lo_open and x == lo) or x > hi or (hi_open and x == hi):
            raise ValueError(f"must lie in {'(' if lo_open else '['}{lo}, {hi}{')' if hi_open else ']'}")
        return x

    return parse


def _int(lo=0):
    def parse(text: str) -> int:
        x = int(text)
        if x < lo:
            raise ValueError(f"must be >= {lo}")
        return x

    return parse


def _floats(n: int, check: Callable[[list[float]], None] | None = None):
    def parse(text: str) -> tuple[float, ...]:
        parts = [p.strip() for p in text.split(",")]
        if len(parts) != n:
            raise ValueError(f"expected {n} comma-separated numbers")
        vals = [float(p) for p in parts]
        if not all(math.isfinite(v) for v in vals):
            raise ValueError("must be finite")
        if check:
            check(vals)
        return tuple(vals)

    return parse


def _choice(enum):
    def parse(text: str):
        return enum(text.strip().lower())

    return parse


def _check_sweep(v):
    start, end, step = v
    if start < 0:
        raise ValueError("start must be >= 0")
    if start > end:
        raise ValueError("start must not exceed end")
    if step <= 0:
        raise ValueError("step must be > 0")


def _check_anchor(v):
    if v[0] < 0 or not 0 < v[1] < 0.5:
        raise ValueError("expected length_km >= 0 and 0 < qber < 0.5")


def _transport(text: str) -> str:
    text = text.strip()
    if text == "inproc":
        return text
    kind, _, rest = text.partition(":")
    if kind == "listen" and rest.isdigit():
        return text
    if kind == "connect":
        host, _, port = rest.rpartition(":")
        if host and port.isdigit():
            return text
    raise ValueError("expected inproc, listen:<port> or connect:<host>:<port>")


def _role(text: str) -> str:
    if text not in ("alice", "bob"):
        raise ValueError("expected alice or bob")
    return text


_PARSERS: dict[str, Callable[[str], object]] = {
    # physical / protocol parameters
    "clock_hz": _float(0, lo_open=True),
    "mu": _float(0),
    "alice_loss_db": _float(0),
    "qe": _float(0, 1, lo_open=True),
    "dark_per_gate": _float(0, 1, hi_open=True),
    "dark_anchor": _floats(2, _check_anchor),
    "dark_limit_km": _float(0),
    "dark_model": _floats(2),
    "ap_prob": _float(0, 1, hi_open=True),
    "double_click_policy": _choice(DoubleClickPolicy),
    "visibility": _float(0, 1),
    "qber_opt": _float(0, 0.5, hi_open=True),
    "alpha_db_per_km": _float(0, lo_open=True),
    "protocol": _choice(Protocol),
    "ec_efficiency": _float(1),
    "qber_mode": _choice(QberMode),
    "safety_bits": _int(0),
    "qber_sample": _int(1),
    "cascade_passes": _int(1),
    "k1_coefficient": _float(0, lo_open=True),
    # run control
    "sweep": _floats(3, _check_sweep),
    "length_km": _float(0),
    "n_clocks": _int(0),
    "seed": _int(0),
    "transport": _transport,
    "role": _role,
    "output_path": str.strip,
}

_DARK_KEYS = ("dark_per_gate", "dark_anchor", "dark_limit_km", "dark_model")


@dataclass(frozen=True)
class RunConfig:
    params: SystemParams = field(default_factory=SystemParams)
    sweep: tuple[float, float, float] = (0.0, 150.0, 5.0)
    length_km: float = 0.0
    n_clocks: int = 0
    seed: int = 0
    transport: str = "inproc"
    role: str | None = None
    output_path: str | None = None

    def sweep_points(self) -> list[float]:
        start, end, step = self.sweep
        count = math.floor((end - start) / step + 1e-9) + 1
        return [start + i * step for i in range(count)]

    @property
    def session_role(self) -> str:
        if self.role:
            return self.role
        return "bob" if self.transport.startswith("listen") else "alice"


def parse_config(text: str, env: Mapping[str, str] | None = None) -> RunConfig:
    values: dict[str, object] = {}
    lines: dict[str, int] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key:
            raise ConfigError(f"expected key=value, got {raw.strip()!r}", lineno)
        if key not in _PARSERS:
            raise ConfigError(f"unknown key {key!r}", lineno)
        if key in values:
            raise ConfigError(f"duplicate key {key!r} (first set on line {lines[key]})", lineno)
        try:
            values[key] = _PARSERS[key](value)
        except ValueError as exc:
            raise ConfigError(f"bad value for {key}: {exc}", lineno) from None
        lines[key] = lineno

    def conflict(*keys):
        given = [k for k in keys if k in values]
        if len(given) > 1:
            raise ConfigError(f"{' and '.join(given)} are mutually exclusive", lines[given[1]])

    conflict("visibility", "qber_opt")
    conflict(*_DARK_KEYS)

    try:
        if "qber_opt" in values:
            optics = OpticsParams.from_qber_opt(values["qber_opt"])
        else:
            optics = OpticsParams(values.get("visibility", 1.0 - 2.0 * DEFAULT_QBER_OPT))
        qe = values.get("qe", 0.1)
        detector = DetectorParams(
            qe=qe,
            dark_per_gate=values.get("dark_per_gate", DEFAULT_DARK_PER_GATE),
            ap_prob=values.get("ap_prob", 0.0),
            double_click_policy=values.get("double_click_policy", DoubleClickPolicy.RANDOM_PORT),
        )
        simple = (
            "clock_hz mu alice_loss_db alpha_db_per_km protocol ec_efficiency qber_mode "
            "safety_bits qber_sample cascade_passes k1_coefficient"
        ).split()
        params = SystemParams(detector=detector, optics=optics, **{k: values[k] for k in simple if k in values})
    except QKDError as exc:
        raise ConfigError(str(exc)) from None

    try:
        if "dark_anchor" in values:
            length, qber = values["dark_anchor"]
            params = params.with_detector(dark_per_gate=calibrate_dark(params, qe, length, qber))
        elif "dark_limit_km" in values:
            params = params.with_detector(dark_per_gate=calibrate_dark_from_limit(params, qe, values["dark_limit_km"]))
        elif "dark_model" in values:
            params = params.with_detector(dark_per_gate=dark_model_eval(qe, DarkModel(*values["dark_model"])))
    except QKDError as exc:
        key = next(k for k in _DARK_KEYS if k in values)
        raise ConfigError(f"cannot derive dark count: {exc}", lines[key]) from None

    seed = values.get("seed", 0)
    if env is not None and env.get(SEED_ENV):
        try:
            seed = int(env[SEED_ENV])
        except ValueError:
            raise ConfigError(f"{SEED_ENV} must be an integer, got {env[SEED_ENV]!r}") from None

    run = {k: values[k] for k in ("sweep", "length_km", "n_clocks", "transport", "role", "output_path") if k in values}
    return RunConfig(params=params, seed=seed, **run)


def load_config(path: str, env: Mapping[str, str] | None = None) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    return parse_config(text, env)
