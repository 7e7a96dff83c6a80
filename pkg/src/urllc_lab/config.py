"""Flat ``key = value`` experiment configuration.

One assignment per line, ``#`` starts a comment, lists are comma
separated. Every experiment has a fixed key schema with defaults; unknown
keys, bad types and missing required keys are reported with their line
number. :func:`serialize` writes the canonical form (all keys, sorted).
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Any, Callable, NamedTuple

from .errors import ConfigError

EXPERIMENTS = ("outage-sweep", "fbl-surface", "v2i-latency", "v2v-episode")


class Param(NamedTuple):
    kind: str  # int | float | str | ints | floats | strs
    default: Any
    choices: tuple | None = None


_COMMON = {
    "seed": Param("int", 0),
    "output": Param("str", "out"),
}

_FREEWAY = {
    "road_length": Param("float", 200.0),
    "bs_offset": Param("float", 20.0),
    "free_flow_speed_kmh": Param("float", 80.0),
    "max_density": Param("float", 0.15),
    "antennas": Param("int", 300),
    "bandwidth_hz": Param("float", 200e3),
    "total_power_dbw": Param("float", 10.0),
    "pathloss_exponent": Param("float", 2.5),
    "placement": Param("str", "equispaced", ("equispaced", "uniform")),
}

SCHEMAS = {
    "outage-sweep": {
        "packet_bits": Param("int", 256),
        "bandwidth_hz": Param("float", 180e3),
        "numerology": Param("int", 0),
        "latency_min_ms": Param("float", 1.0),
        "latency_max_ms": Param("float", 100.0),
        "latency_points": Param("int", 21),
        "n_rx": Param("ints", (1, 2, 4)),
        "avg_snr_db": Param("floats", (10.0, 20.0)),
        "correlation": Param("float", 0.0),
        "trials": Param("int", 100000),
    },
    "fbl-surface": {
        **_FREEWAY,
        "kappa": Param("float", 0.05),
        "precoder": Param("str", "MF", ("MF", "ZF")),
        "latency_min_ms": Param("float", 0.005),
        "latency_max_ms": Param("float", 1.0),
        "latency_points": Param("int", 41),
        "error_probs": Param("floats", (1e-9, 1e-6, 1e-3)),
    },
    "v2i-latency": {
        **_FREEWAY,
        "kappas": Param("floats", tuple(round(0.01 * i, 2) for i in range(1, 16))),
        "precoders": Param("strs", ("ZF", "MF"), ("ZF", "MF")),
        "rate_bps": Param("float", 100e3),
        "error_prob": Param("float", 1e-6),
    },
    "v2v-episode": {
        "blocks_x": Param("int", 2),
        "blocks_y": Param("int", 2),
        "vehicle_speed_kmh": Param("float", 60.0),
        "num_cues": Param("int", 8),
        "num_vue_pairs": Param("int", 4),
        "packet_rate": Param("float", 2.0),
        "packet_bits": Param("int", 2048),
        "latency_bound_ms": Param("float", 100.0),
        "violation_prob": Param("float", 0.05),
        "packets": Param("int", 100000),
        "pair_distance_cap": Param("float", 50.0),
        "cue_power_dbm": Param("float", 23.0),
        "vue_power_dbm": Param("float", 23.0),
        "modes": Param("strs", ("effective_bandwidth", "static"), ("effective_bandwidth", "static")),
    },
}


@dataclass
class ExperimentConfig:
    experiment: str
    params: dict
    seed: int = 0
    output: str = "out"
    lines: dict = field(default_factory=dict, compare=False, repr=False)

    def __getitem__(self, key):
        return self.params[key]

    def line_of(self, key):
        return self.lines.get(key)


def derive_seed(seed: int, component: str) -> int:
    """64-bit seed for ``component``: first 8 bytes (little-endian) of
    SHA-256 over ``"<seed>/<component>"``."""
    digest = hashlib.sha256(f"{int(seed)}/{component}".encode()).digest()
    return int.from_bytes(digest[:8], "little")


def _convert(kind: str, raw: str):
    if kind in ("ints", "floats", "strs"):
        items = [x.strip() for x in raw.split(",") if x.strip()]
        if not items:
            raise ValueError("empty list")
        return tuple(_convert(kind[:-1], x) for x in items)
    if kind == "int":
        return int(raw)
    if kind == "float":
        return float(raw)
    if kind == "str":
        if not raw:
            raise ValueError("empty string")
        return raw
    raise AssertionError(kind)


def parse_config(text: str, experiment: str | None = None) -> ExperimentConfig:
    """Parse config text; ``experiment`` supplies the experiment if the text omits it."""
    raw: dict[str, tuple[str, int]] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"expected 'key = value', got {body!r}", lineno)
        key, value = (part.strip() for part in body.split("=", 1))
        if not key:
            raise ConfigError("missing key", lineno)
        if key in raw:
            raise ConfigError(f"duplicate key {key!r}", lineno)
        raw[key] = (value, lineno)

    if "experiment" in raw:
        name, lineno = raw.pop("experiment")
        if name not in SCHEMAS:
            raise ConfigError(f"unknown experiment {name!r}; choose from {', '.join(EXPERIMENTS)}", lineno)
        if experiment is not None and experiment != name:
            raise ConfigError(f"config is for {name!r} but {experiment!r} was requested", lineno)
    elif experiment is not None:
        if experiment not in SCHEMAS:
            raise ConfigError(f"unknown experiment {experiment!r}")
        name = experiment
    else:
        raise ConfigError("missing required key 'experiment'")

    schema = {**_COMMON, **SCHEMAS[name]}
    values: dict[str, Any] = {}
    lines: dict[str, int] = {}
    for key, (value, lineno) in raw.items():
        if key not in schema:
            raise ConfigError(f"unknown key {key!r} for experiment {name!r}", lineno)
        param = schema[key]
        try:
            converted = _convert(param.kind, value)
        except ValueError:
            raise ConfigError(f"{key}: expected {param.kind}, got {value!r}", lineno) from None
        if param.choices is not None:
            for item in converted if isinstance(converted, tuple) else (converted,):
                if item not in param.choices:
                    raise ConfigError(f"{key}: {item!r} not one of {', '.join(param.choices)}", lineno)
        values[key] = converted
        lines[key] = lineno
    for key, param in schema.items():
        values.setdefault(key, param.default)
    seed = values.pop("seed")
    output = values.pop("output")
    cfg = ExperimentConfig(name, values, seed, output, lines)
    validate(cfg)
    return cfg


def _fmt(value) -> str:
    if isinstance(value, tuple):
        return ", ".join(_fmt(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def serialize(cfg: ExperimentConfig) -> str:
    out = [f"experiment = {cfg.experiment}", f"output = {cfg.output}", f"seed = {cfg.seed}"]
    out += [f"{k} = {_fmt(v)}" for k, v in sorted(cfg.params.items())]
    return "\n".join(out) + "\n"


def _require(cfg, key, ok: Callable[[Any], bool], constraint: str):
    value = cfg.params[key]
    for item in value if isinstance(value, tuple) else (value,):
        if not ok(item):
            raise ConfigError(f"{key} = {_fmt(value)} violates {constraint}", cfg.line_of(key))


def validate(cfg: ExperimentConfig) -> None:
    """Check parameter values against the preconditions of the target modules."""
    p = cfg.params
    pos = lambda x: x > 0  # noqa: E731
    if cfg.experiment == "outage-sweep":
        for key in ("packet_bits", "bandwidth_hz", "latency_min_ms", "latency_max_ms", "latency_points", "n_rx"):
            _require(cfg, key, pos, f"{key} > 0")
        _require(cfg, "correlation", lambda c: 0 <= c < 1, "0 <= correlation < 1")
        _require(cfg, "trials", lambda t: t >= 10**4, "trials >= 10000")
        _require(cfg, "latency_max_ms", lambda x: x >= p["latency_min_ms"], "latency_max_ms >= latency_min_ms")
        spacing = 15e3 * 2.0 ** p["numerology"]
        _require(cfg, "bandwidth_hz", lambda b: b >= spacing, f"bandwidth_hz >= subcarrier spacing ({spacing:g} Hz)")
        _require(cfg, "latency_min_ms", lambda x: x * 1e-3 * spacing >= 1 - 1e-9,
                 f"latency_min_ms >= one symbol ({1e3 / spacing:g} ms)")
    if cfg.experiment in ("fbl-surface", "v2i-latency"):
        for key in ("road_length", "bs_offset", "free_flow_speed_kmh", "max_density", "bandwidth_hz", "antennas"):
            _require(cfg, key, pos, f"{key} > 0")
        _require(cfg, "pathloss_exponent", lambda a: a >= 2, "pathloss_exponent >= 2")
        dens_key = "kappa" if cfg.experiment == "fbl-surface" else "kappas"
        kmax = p["max_density"]
        _require(cfg, dens_key, lambda k: 0 < k <= kmax, f"0 < kappa <= max_density ({kmax:g})")
        _require(cfg, dens_key, lambda k: p["antennas"] > int(k * p["road_length"] + 0.5),
                 "antennas > number of vehicles")
        _require(cfg, dens_key, lambda k: int(k * p["road_length"] + 0.5) >= 1, "at least one vehicle on the road")
    if cfg.experiment == "fbl-surface":
        _require(cfg, "error_probs", lambda e: 0 < e < 1, "0 < error_prob < 1")
        _require(cfg, "latency_min_ms", pos, "latency_min_ms > 0")
        _require(cfg, "latency_max_ms", lambda x: x >= p["latency_min_ms"], "latency_max_ms >= latency_min_ms")
        _require(cfg, "latency_points", pos, "latency_points > 0")
    if cfg.experiment == "v2i-latency":
        _require(cfg, "rate_bps", pos, "rate_bps > 0")
        _require(cfg, "error_prob", lambda e: 0 < e < 0.5, "0 < error_prob < 0.5")
    if cfg.experiment == "v2v-episode":
        for key in ("blocks_x", "blocks_y", "vehicle_speed_kmh", "num_cues", "packet_bits", "latency_bound_ms",
                    "packets", "pair_distance_cap"):
            _require(cfg, key, pos, f"{key} > 0")
        _require(cfg, "num_vue_pairs", lambda n: 0 <= n <= p["num_cues"], "0 <= num_vue_pairs <= num_cues")
        _require(cfg, "packet_rate", lambda x: x >= 0, "packet_rate >= 0")
        _require(cfg, "violation_prob", lambda e: 0 < e < 1, "0 < violation_prob < 1")
