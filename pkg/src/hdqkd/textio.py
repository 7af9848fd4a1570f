"""Flat ``key = value`` text documents: session configs in, reports out.

Config keys (``#`` starts a comment, unknown keys are an error)::

    n_pulses      pulses to simulate (required)
    seed          RNG seed, default 0
    length        channel length, km
    alpha         attenuation exponent per km (transmittance 10**(-alpha*length))
    mu_signal     signal intensity, mean photons per pulse
    mu_decoy      decoy intensity, mean photons per pulse
    p_decoy       probability a pulse is a decoy
    threshold     normalized decision threshold x
    delta_mode    worst-case | decoy-verified
    adversary     none | pns
    compensation  signal-matched | none
    f_ec          error-correction inefficiency
    clamping      product | factorwise
"""
from __future__ import annotations

import json
import math
from pathlib import Path

from .channel import ChannelParams, SourceConfig
from .homodyne import DetectionPolicy
from .sim import SessionConfig


class ConfigError(ValueError):
    pass


_FLOAT_KEYS = {"length", "alpha", "mu_signal", "mu_decoy", "p_decoy", "threshold", "f_ec"}
_INT_KEYS = {"n_pulses", "seed"}
_STR_KEYS = {"delta_mode", "adversary", "compensation", "clamping"}
CONFIG_KEYS = _FLOAT_KEYS | _INT_KEYS | _STR_KEYS


def _to_int(key, raw):
    try:
        v = float(raw)
    except ValueError:
        raise ConfigError(f"{key}: expected an integer, got {raw!r}") from None
    if not v.is_integer():
        raise ConfigError(f"{key}: expected an integer, got {raw!r}")
    return int(v)


def parse_config(text: str) -> SessionConfig:
    values: dict = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, raw = (s.strip() for s in line.split("=", 1))
        if key not in CONFIG_KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        if key in _INT_KEYS:
            values[key] = _to_int(key, raw)
        elif key in _FLOAT_KEYS:
            try:
                values[key] = float(raw)
            except ValueError:
                raise ConfigError(f"{key}: expected a number, got {raw!r}") from None
            if not math.isfinite(values[key]):
                raise ConfigError(f"{key}: must be finite")
        else:
            values[key] = raw
    if "n_pulses" not in values:
        raise ConfigError("missing required key 'n_pulses'")
    try:
        channel = ChannelParams(values.get("alpha", 0.21), values.get("length", 0.0))
        source = SourceConfig(values.get("mu_signal", 1.65), values.get("mu_decoy", 0.5),
                              values.get("p_decoy", 0.1))
        policy = DetectionPolicy(values.get("threshold", 0.0),
                                 values.get("delta_mode", "worst-case"))
        return SessionConfig(
            n_pulses=values["n_pulses"], channel=channel, source=source, policy=policy,
            adversary=values.get("adversary", "none"),
            compensation=values.get("compensation", "signal-matched"),
            rng_seed=values.get("seed", 0), f_ec=values.get("f_ec", 1.22),
            clamping=values.get("clamping", "product"),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def load_config(path) -> SessionConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text)


def config_dict(config: SessionConfig) -> dict:
    return dict([
        ("n_pulses", config.n_pulses), ("seed", config.rng_seed),
        ("length", config.channel.length), ("alpha", config.channel.alpha),
        ("mu_signal", config.source.mu_signal), ("mu_decoy", config.source.mu_decoy),
        ("p_decoy", config.source.p_decoy), ("threshold", config.policy.threshold_x),
        ("delta_mode", config.policy.delta_mode), ("adversary", config.adversary),
        ("compensation", config.compensation), ("f_ec", config.f_ec),
        ("clamping", config.clamping),
    ])


def format_config(config: SessionConfig) -> str:
    return format_kv(config_dict(config))


def _fmt(v) -> str:
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (list, tuple)):
        return ",".join(_fmt(i) for i in v)
    return str(v)


def _flatten(d: dict, prefix=""):
    for k, v in d.items():
        if isinstance(v, dict):
            yield from _flatten(v, f"{prefix}{k}.")
        else:
            yield f"{prefix}{k}", v


def format_kv(d: dict) -> str:
    """Render a (possibly nested) mapping as ``key = value`` lines; nesting uses dotted keys."""
    return "".join(f"{k} = {_fmt(v)}\n" for k, v in _flatten(d))


def format_json(d: dict) -> str:
    def clean(o):
        if isinstance(o, float) and not math.isfinite(o):
            return "inf" if o > 0 else ("-inf" if o < 0 else "nan")
        if isinstance(o, dict):
            return {k: clean(v) for k, v in o.items()}
        if isinstance(o, (list, tuple)):
            return [clean(v) for v in o]
        return o

    return json.dumps(clean(d)) + "\n"
