"""Flat key=value run configuration.

The config format is plain text, one ``section.key = value`` per line,
``#`` comments allowed.  CLI flags override file values; the resolved
mapping is echoed verbatim into every run's manifest, which is sufficient
to reproduce any artifact byte for byte.
"""

import dataclasses
import os

from .errors import ConfigError
from .params import ModelParams
from .simulate import SimConfig

_SIM_FIELDS = {f.name for f in dataclasses.fields(SimConfig)} - {"params"}
_PARAM_FIELDS = {f.name for f in dataclasses.fields(ModelParams)}


def _coerce(text: str):
    text = text.strip()
    low = text.lower()
    if low in ("true", "false"):
        return low == "true"
    if low in ("none", ""):
        return None
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            continue
    return text


def parse_config(path: str) -> dict:
    """Read a flat key=value file into a {dotted_key: raw_value} mapping."""
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key = value")
            key, value = line.split("=", 1)
            out[key.strip()] = _coerce(value)
    return out


DEFAULT_CONFIG = {
    "sim.n_firms": 500,
    "sim.n_sectors": 1,
    "sim.years": 13,
    "sim.start_year": 2003,
    "sim.seed": 12345,
    "sim.mobility_rate": 0.25,
    "sim.workers_per_firm_scale": 2.0,
    "sim.earnings_noise_sd": 0.12,
    "params.theta": 0.417,
    "params.alpha_l": 0.777,
    "params.alpha_k": 0.079,
    "params.lambda_x": 2.06,
    "params.lambda_y": 1.80,
    "params.sigma": 5.0,
    "params.rho": 0.702,
    "params.rho_x": 0.45,
    "params.beta_0": 10.987,
    "pf.degree": 3,
    "pf.bootstrap": 0,
    "pf.weighting": "identity",
    "pf.form": "ces",
    "pf.use_truth": False,
    "pareto.threshold": None,
    "mc.reps": 20,
    "mc.n_firms": 800,
    "mc.years": 12,
}


def resolve_config(file_values: dict = None, overrides: dict = None) -> dict:
    resolved = dict(DEFAULT_CONFIG)
    for layer in (file_values or {}, overrides or {}):
        for key, value in layer.items():
            if value is not None or key in (resolved.keys() | layer.keys()):
                resolved[key] = value
    return resolved


def _section(resolved: dict, prefix: str) -> dict:
    plen = len(prefix) + 1
    return {k[plen:]: v for k, v in resolved.items()
            if k.startswith(prefix + ".")}


def build_sim_config(resolved: dict) -> SimConfig:
    """Materialize the simulation config: shared params plus per-sector
    ``sector<k>.field`` overrides."""
    sim_kw = {}
    for key, value in _section(resolved, "sim").items():
        if key not in _SIM_FIELDS:
            raise ConfigError(f"unknown sim key: sim.{key}")
        sim_kw[key] = value
    base_kw = {}
    for key, value in _section(resolved, "params").items():
        if key not in _PARAM_FIELDS:
            raise ConfigError(f"unknown params key: params.{key}")
        base_kw[key] = value
    n_sectors = int(sim_kw.get("n_sectors", 1))
    params = []
    for s in range(n_sectors):
        kw = dict(base_kw)
        for key, value in _section(resolved, f"sector{s}").items():
            if key not in _PARAM_FIELDS:
                raise ConfigError(f"unknown key: sector{s}.{key}")
            kw[key] = value
        params.append(ModelParams(**kw))
    return SimConfig(params=tuple(params), **sim_kw)
