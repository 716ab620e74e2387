"""Flat key = value configuration files.

Keys use the conventional parameter names: v_v, v_c, d_ref, g_min, g_max,
rho, K, lambda, tau, dt, gamma, epsilon, sigma, seed, kind, policy,
deadline_policy, lead_speed, lead_gap, start_delay.  Lines starting with
'#' and blank lines are ignored.
"""

from __future__ import annotations

from dataclasses import replace
from typing import Dict

from .scenario import ScenarioConfig

# config-file key -> ScenarioConfig field
KEY_MAP = {
    "kind": "kind",
    "v_v": "v_v",
    "v_c": "v_c",
    "d_ref": "d_ref",
    "g_min": "g_min",
    "g_max": "g_max",
    "rho": "rho",
    "k": "k",
    "lambda": "lam",
    "tau": "tau",
    "dt": "dt",
    "gamma": "gamma",
    "epsilon": "epsilon",
    "sigma": "sensor_sigma",
    "max_range": "sensor_max_range",
    "seed": "seed",
    "deadline_policy": "deadline_policy",
    "policy": "adjustment",
    "start_delay": "start_delay",
    "clock_skew": "clock_skew",
    "lead_speed": "lead_speed",
    "lead_gap": "lead_gap",
    "traffic_checkpoint": "traffic_checkpoint",
    "walk_step_duration": "walk_step_duration",
}

_INT_FIELDS = {"k", "seed"}
_STR_FIELDS = {"kind", "deadline_policy", "adjustment"}


class ConfigError(ValueError):
    pass


def parse_config_text(text: str) -> Dict[str, str]:
    values: Dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, _, value = line.partition("=")
        values[key.strip().lower()] = value.strip()
    return values


def load_config(path, base: ScenarioConfig = None) -> ScenarioConfig:
    """Read a flat key = value file into a ScenarioConfig."""
    with open(path) as fh:
        values = parse_config_text(fh.read())
    return apply_config(values, base or ScenarioConfig())


def apply_config(values: Dict[str, str], base: ScenarioConfig) -> ScenarioConfig:
    updates = {}
    for key, raw in values.items():
        if key not in KEY_MAP:
            raise ConfigError(f"unknown configuration key {key!r}")
        name = KEY_MAP[key]
        if name in _STR_FIELDS:
            updates[name] = raw
        elif name in _INT_FIELDS:
            updates[name] = int(raw)
        else:
            updates[name] = float(raw)
    return replace(base, **updates)
