"""Simulation configuration: dataclasses, YAML loading and validation.

A config file is a YAML mapping::

    code: {type: rlc, n: 128, k: 116, seed: 7}      # or {type: crc, k: 120, poly: 0xb41}
    constellation: bpsk                              # bpsk | qam16 | qam256
    channel: {type: dicode, rho: 0.75}               # dicode | synthetic | ar2_synthetic | taps_file
    equalizer: zf                                    # zf (dicode only) | mmse
    covariance: conditional                          # conditional | marginal (mmse only)
    decoder: {type: orbgrand_ai, b: 4, gamma: null, tau: 100000}
    csi: {nmse: 0.0, nmse_per_symbol: false, delta_rho: 0.0, ar2_fit: false, quantize_levels: null}
    ebn0: "2:0.5:6"                                  # or a list of dB values
    stop: {min_errors: 100, max_frames: 1000000}
    seed: 1

An optional ``variants`` mapping holds named overrides that are merged
into the base config, one curve per entry.
"""

from __future__ import annotations

import copy
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import yaml

from ..errors import ConfigError

CONSTELLATIONS = {"bpsk": 1, "qam16": 4, "qam256": 8}
CHANNELS = ("dicode", "synthetic", "ar2_synthetic", "taps_file")
DECODERS = ("orbgrand_ai", "orbgrand_interleaved", "hard_grand")
DEFAULT_TAU = 100_000


@dataclass
class CodeSpec:
    type: str = "rlc"
    n: int | None = None
    k: int = 0
    seed: int = 0
    poly: int | None = None

    def as_dict(self) -> dict:
        d = {"type": self.type, "n": self.n, "k": self.k}
        if self.type == "rlc":
            d["seed"] = self.seed
        else:
            d["poly"] = self.poly
        return d


@dataclass
class ChannelSpec:
    type: str = "dicode"
    rho: float = 0.5
    # synthetic clutter channel
    m: int = 40
    L: int = 8
    f_s: float = 1.0
    pulses: int = 32
    realizations: int = 30
    # dense clutter with a short decay: strong leading taps, coloured residual
    sparsity: float = 1.0
    decay: float = 0.15
    coherence: float = 0.9
    seed: int = 0
    # exactly AR(2) channel; complex values given as [re, im]
    phi1: list = field(default_factory=lambda: [0.9, 0.3])
    phi2: list = field(default_factory=lambda: [-0.5, 0.0])
    path: str | None = None


@dataclass
class DecoderSpec:
    type: str = "orbgrand_ai"
    b: int = 1
    gamma: int | None = None
    tau: int = DEFAULT_TAU


@dataclass
class CsiSpec:
    nmse: float = 0.0
    nmse_per_symbol: bool = False
    delta_rho: float = 0.0
    ar2_fit: bool = False
    quantize_levels: int | None = None

    @property
    def perfect(self) -> bool:
        return self.nmse == 0 and self.delta_rho == 0 and not self.ar2_fit and self.quantize_levels is None


@dataclass
class StopRule:
    min_errors: int = 100
    max_frames: int = 1_000_000


@dataclass
class SimConfig:
    code: CodeSpec
    constellation: str = "bpsk"
    channel: ChannelSpec = field(default_factory=ChannelSpec)
    equalizer: str = "zf"
    covariance: str = "conditional"
    decoder: DecoderSpec = field(default_factory=DecoderSpec)
    csi: CsiSpec = field(default_factory=CsiSpec)
    ebn0: list = field(default_factory=list)
    stop: StopRule = field(default_factory=StopRule)
    seed: int = 0
    label: str = ""

    @property
    def bits_per_symbol(self) -> int:
        return CONSTELLATIONS[self.constellation]

    def to_dict(self) -> dict:
        d = asdict(self)
        d["code"] = self.code.as_dict()
        return d


def parse_grid(value) -> list[float]:
    """``"a:s:b"`` (inclusive), a single number, or a list of numbers."""
    if isinstance(value, str):
        parts = value.split(":")
        try:
            nums = [float(p) for p in parts]
        except ValueError:
            raise ConfigError("ebn0", f"cannot parse grid {value!r}") from None
        if len(nums) == 1:
            return nums
        if len(nums) != 3:
            raise ConfigError("ebn0", f"expected start:step:stop, got {value!r}")
        a, s, b = nums
        if s <= 0 or b < a:
            raise ConfigError("ebn0", f"empty or descending grid {value!r}")
        count = int(np.floor((b - a) / s + 1e-9)) + 1
        return [round(a + i * s, 10) for i in range(count)]
    if isinstance(value, (int, float)):
        return [float(value)]
    if isinstance(value, (list, tuple)):
        try:
            return [float(v) for v in value]
        except (TypeError, ValueError):
            raise ConfigError("ebn0", "grid entries must be numbers") from None
    raise ConfigError("ebn0", f"unsupported grid {value!r}")


def _section(raw: dict, key: str, cls):
    value = raw.get(key, {})
    if isinstance(value, str) and key == "decoder":
        value = {"type": value}
    if not isinstance(value, dict):
        raise ConfigError(key, "expected a mapping")
    known = cls.__dataclass_fields__
    for name in value:
        if name not in known:
            raise ConfigError(f"{key}.{name}", "unknown key")
    try:
        return cls(**value)
    except TypeError as exc:
        raise ConfigError(key, str(exc)) from None


def _int(value, path, lo=None):
    if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
        if isinstance(value, float) and value.is_integer():
            value = int(value)
        elif isinstance(value, str):
            try:
                value = int(value, 0)
            except ValueError:
                raise ConfigError(path, f"expected an integer, got {value!r}") from None
        else:
            raise ConfigError(path, f"expected an integer, got {value!r}")
    if lo is not None and value < lo:
        raise ConfigError(path, f"must be at least {lo}, got {value}")
    return int(value)


TOP_KEYS = {
    "code", "constellation", "channel", "equalizer", "covariance",
    "decoder", "csi", "ebn0", "stop", "seed", "label",
}


def config_from_dict(raw: dict) -> SimConfig:
    if not isinstance(raw, dict):
        raise ConfigError("<root>", "config must be a mapping")
    for key in raw:
        if key not in TOP_KEYS:
            raise ConfigError(key, "unknown key")
    if "code" not in raw:
        raise ConfigError("code", "missing")
    cfg = SimConfig(
        code=_section(raw, "code", CodeSpec),
        constellation=raw.get("constellation", "bpsk"),
        channel=_section(raw, "channel", ChannelSpec),
        equalizer=raw.get("equalizer", "zf"),
        covariance=raw.get("covariance", "conditional"),
        decoder=_section(raw, "decoder", DecoderSpec),
        csi=_section(raw, "csi", CsiSpec),
        ebn0=parse_grid(raw["ebn0"]) if "ebn0" in raw else [],
        stop=_section(raw, "stop", StopRule),
        seed=_int(raw.get("seed", 0), "seed", 0),
        label=str(raw.get("label", "")),
    )
    validate(cfg)
    return cfg


def validate(cfg: SimConfig) -> SimConfig:
    """Check cross-field consistency; raises :class:`ConfigError` with a field path."""
    c = cfg.code
    if c.type not in ("rlc", "crc"):
        raise ConfigError("code.type", f"expected rlc or crc, got {c.type!r}")
    c.k = _int(c.k, "code.k", 1)
    if c.type == "rlc":
        c.n = _int(c.n, "code.n", 2)
        c.seed = _int(c.seed, "code.seed", 0)
        if c.k >= c.n:
            raise ConfigError("code.k", f"k={c.k} must be below n={c.n}")
    else:
        if c.poly is None:
            raise ConfigError("code.poly", "missing CRC polynomial")
        c.poly = _int(c.poly, "code.poly", 1)
        n = c.k + c.poly.bit_length()
        if c.n is not None and _int(c.n, "code.n") != n:
            raise ConfigError("code.n", f"polynomial {c.poly:#x} with k={c.k} gives n={n}")
        c.n = n
    if c.n - c.k > 63:
        raise ConfigError("code", f"redundancy {c.n - c.k} exceeds 63 bits")

    if cfg.constellation not in CONSTELLATIONS:
        raise ConfigError("constellation", f"expected one of {sorted(CONSTELLATIONS)}, got {cfg.constellation!r}")
    m = cfg.bits_per_symbol
    if c.n % m:
        raise ConfigError("constellation", f"{m} bits per symbol do not divide n={c.n}")

    d = cfg.decoder
    if d.type not in DECODERS:
        raise ConfigError("decoder.type", f"expected one of {DECODERS}, got {d.type!r}")
    d.b = _int(d.b, "decoder.b", 1)
    d.tau = _int(d.tau, "decoder.tau", 1)
    if d.type == "orbgrand_interleaved":
        d.b = 1
    if c.n % (d.b * m):
        raise ConfigError("decoder.b", f"b*m_s = {d.b * m} does not divide n = {c.n}")
    if d.gamma is not None:
        d.gamma = _int(d.gamma, "decoder.gamma", 1)
        if d.gamma > 2**m:
            raise ConfigError("decoder.gamma", f"gamma={d.gamma} exceeds constellation size {2**m}")

    ch = cfg.channel
    if ch.type not in CHANNELS:
        raise ConfigError("channel.type", f"expected one of {CHANNELS}, got {ch.type!r}")
    if ch.type == "dicode":
        if not (0.0 <= ch.rho < 1.0):
            raise ConfigError("channel.rho", f"must lie in [0, 1), got {ch.rho}")
        if cfg.equalizer != "zf":
            raise ConfigError("equalizer", "the dicode channel uses zero forcing (zf)")
    else:
        if cfg.equalizer != "mmse":
            raise ConfigError("equalizer", f"channel {ch.type!r} needs the mmse equalizer")
        if cfg.covariance not in ("conditional", "marginal"):
            raise ConfigError("covariance", f"expected conditional or marginal, got {cfg.covariance!r}")
        ch.realizations = _int(ch.realizations, "channel.realizations", 1)
    if ch.type == "synthetic":
        ch.m = _int(ch.m, "channel.m", 1)
        ch.L = _int(ch.L, "channel.L", 1)
        ch.pulses = _int(ch.pulses, "channel.pulses", 1)
        n_s = c.n // m
        if max(1, ch.m // ch.L) * ch.pulses < n_s:
            raise ConfigError("channel.pulses", f"too few soundings for {n_s} symbols")
        if (2 * ch.L + ch.m - 2) // ch.L < 1:
            raise ConfigError("channel.L", "pulse too long for the impulse response")
    if ch.type == "ar2_synthetic":
        for name in ("phi1", "phi2"):
            v = getattr(ch, name)
            if not (isinstance(v, (list, tuple)) and len(v) == 2):
                raise ConfigError(f"channel.{name}", "expected [re, im]")
    if ch.type == "taps_file" and not ch.path:
        raise ConfigError("channel.path", "missing tap file path")

    s = cfg.csi
    if s.nmse < 0:
        raise ConfigError("csi.nmse", "must be non-negative")
    if s.delta_rho and ch.type != "dicode":
        raise ConfigError("csi.delta_rho", "only defined for the dicode channel")
    if ch.type == "dicode" and not (0.0 <= ch.rho + s.delta_rho < 1.0):
        raise ConfigError("csi.delta_rho", f"decoder rho {ch.rho + s.delta_rho} outside [0, 1)")
    if s.ar2_fit and ch.type not in ("synthetic", "ar2_synthetic"):
        raise ConfigError("csi.ar2_fit", "needs a sounded channel (synthetic or ar2_synthetic)")
    if s.quantize_levels is not None:
        s.quantize_levels = _int(s.quantize_levels, "csi.quantize_levels", 2)
        if ch.type == "dicode":
            raise ConfigError("csi.quantize_levels", "only defined for mmse channels")

    if not cfg.ebn0:
        raise ConfigError("ebn0", "grid must not be empty")
    cfg.stop.min_errors = _int(cfg.stop.min_errors, "stop.min_errors", 1)
    cfg.stop.max_frames = _int(cfg.stop.max_frames, "stop.max_frames", 1)
    return cfg


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in over.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def expand_variants(raw: dict) -> dict[str, dict]:
    """Split a raw mapping with a ``variants`` section into one mapping per label."""
    raw = dict(raw)
    variants = raw.pop("variants", None)
    if variants is None:
        return {raw.get("label", ""): raw}
    if not isinstance(variants, dict) or not variants:
        raise ConfigError("variants", "expected a non-empty mapping of label -> overrides")
    out = {}
    for label, over in variants.items():
        if not isinstance(over, dict):
            raise ConfigError(f"variants.{label}", "expected a mapping")
        merged = _merge(raw, over)
        merged["label"] = str(label)
        out[str(label)] = merged
    return out


def read_yaml(path) -> dict:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise OSError(f"{path}: {exc.strerror or exc}") from exc
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(str(path), f"invalid YAML: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError(str(path), "config must be a mapping")
    return raw


def load_configs(path, overrides: dict | None = None) -> dict[str, SimConfig]:
    """All curves described by a config file, keyed by variant label."""
    curves = expand_variants(read_yaml(path))
    if overrides:
        curves = {label: _merge(r, overrides) for label, r in curves.items()}
    return {label: config_from_dict(r) for label, r in curves.items()}


def load_config(path, overrides: dict | None = None) -> SimConfig:
    configs = load_configs(path, overrides)
    if len(configs) != 1:
        raise ConfigError("variants", f"file describes {len(configs)} curves; pick one")
    return next(iter(configs.values()))
