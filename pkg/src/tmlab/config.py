"""Experiment configuration files, presets, and config hashing.

The on-disk format is flat "key = value" text with dotted section
prefixes (env.dt = 0.1), one assignment per line, '#' comment lines.
Values are typed by the field they set; tuples are comma-separated.
config_text() emits a canonical sorted dump with every field
materialized, so the config hash does not depend on key order or on
which defaults were spelled out.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, fields

from .cmaddpg import CmaddpgHyper
from .env import EnvConfig
from .errors import InputError
from .incentive_rl import IncentiveRlConfig, SacHyper
from .incentives import (ALL_SCHEMES, SCHEME_AGENT_RL, SCHEME_DYNAMIC_LANDMARK,
                         SCHEME_STATIC_AGENT, SCHEME_STATIC_TEAM,
                         SCHEME_TEAM_RL, RoleAssignment)
from .trainer import ALGORITHMS, SchemeSpec

__all__ = [
    "ExperimentConfig",
    "parse_config_text",
    "config_from_pairs",
    "load_config",
    "config_to_pairs",
    "config_text",
    "config_hash",
    "preset",
    "PRESET_NAMES",
]


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything one experiment needs, across all its seeds."""

    scheme: SchemeSpec = field(default_factory=SchemeSpec)
    env: EnvConfig = field(default_factory=EnvConfig)
    hyper: CmaddpgHyper = field(default_factory=CmaddpgHyper)
    algorithm: str = "cmaddpg"
    seeds: tuple = (1, 2, 3, 4)
    episodes: int = 10_000
    out_dir: str = "runs/experiment"
    checkpoint_interval: int = 0   # 0: checkpoint only at the end
    roles: RoleAssignment | None = None

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise InputError(
                f"run.algorithm must be one of {ALGORITHMS}")
        if not self.seeds:
            raise InputError("run.seeds must not be empty")
        if len(set(self.seeds)) != len(self.seeds):
            raise InputError("run.seeds must be distinct")
        if self.episodes < 0:
            raise InputError("run.episodes must be >= 0")
        if self.checkpoint_interval < 0:
            raise InputError("run.checkpoint_interval must be >= 0")
        if not self.out_dir:
            raise InputError("run.out must not be empty")


def _defaults(cls):
    inst = cls()
    return {f.name: getattr(inst, f.name) for f in fields(inst)}


_ENV_DEFAULTS = _defaults(EnvConfig)
_TRAIN_DEFAULTS = _defaults(CmaddpgHyper)
_SAC_DEFAULTS = _defaults(SacHyper)
_SCHEME_SCALARS = {"kind": "", "alpha_team": 0.0, "alpha_agent": 0.0,
                   "window": 0, "learn_rl": False}
_RL_SCALARS = {"period": 0, "alpha_max": 0.0}
_RUN_SCALARS = {"algorithm": "", "seeds": (0,), "episodes": 0,
                "out": "", "checkpoint_interval": 0}
_ROLE_SCALARS = {"weak_team": 0, "weak_agent": 0}


def _parse_value(key, raw, like):
    """Convert the raw string by the type of the field it sets."""
    try:
        if isinstance(like, bool):
            return {"true": True, "false": False}[raw.lower()]
        if isinstance(like, int):
            return int(raw)
        if isinstance(like, float):
            return float(raw)
        if isinstance(like, str):
            return raw
        if isinstance(like, tuple):
            elem = type(like[0])
            parts = [p.strip() for p in raw.split(",")]
            return tuple(elem(p) for p in parts)
    except (KeyError, ValueError):
        raise InputError(f"bad value for config key {key!r}: {raw!r}") \
            from None
    raise InputError(f"cannot parse config key {key!r}")


def parse_config_text(text):
    """Raw key -> value-string pairs from config file text."""
    pairs = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if not sep or not key:
            raise InputError(f"config line {lineno}: expected 'key = value', "
                             f"got {line!r}")
        if key in pairs:
            raise InputError(f"duplicate config key {key!r}")
        pairs[key] = value
    return pairs


def _take_section(pairs, prefix, defaults):
    out = {}
    for key, raw in pairs.items():
        if not key.startswith(prefix):
            continue
        name = key[len(prefix):]
        if name not in defaults:
            raise InputError(f"unknown config key {key!r}")
        out[name] = _parse_value(key, raw, defaults[name])
    return out


def config_from_pairs(pairs):
    """Build an ExperimentConfig from string pairs, rejecting unknown
    keys by name."""
    known = set()
    for prefix, defaults in (("env.", _ENV_DEFAULTS),
                             ("train.", _TRAIN_DEFAULTS),
                             ("sac.", _SAC_DEFAULTS),
                             ("scheme.rl.", _RL_SCALARS),
                             ("scheme.", _SCHEME_SCALARS),
                             ("run.", _RUN_SCALARS),
                             ("roles.", _ROLE_SCALARS)):
        for name in defaults:
            known.add(prefix + name)
    for key in pairs:
        if key not in known:
            raise InputError(f"unknown config key {key!r}")

    env_kw = _take_section(pairs, "env.", _ENV_DEFAULTS)
    train_kw = _take_section(pairs, "train.", _TRAIN_DEFAULTS)
    sac_kw = _take_section(pairs, "sac.", _SAC_DEFAULTS)
    rl_kw = _take_section(pairs, "scheme.rl.", _RL_SCALARS)
    scheme_kw = _take_section(
        {k: v for k, v in pairs.items() if not k.startswith("scheme.rl.")},
        "scheme.", _SCHEME_SCALARS)
    run_kw = _take_section(pairs, "run.", _RUN_SCALARS)
    role_kw = _take_section(pairs, "roles.", _ROLE_SCALARS)

    rl = IncentiveRlConfig(sac=SacHyper(**sac_kw), **rl_kw) \
        if (sac_kw or rl_kw) else IncentiveRlConfig()
    roles = None
    if role_kw:
        if set(role_kw) != {"weak_team", "weak_agent"}:
            raise InputError(
                "roles.weak_team and roles.weak_agent must be set together")
        roles = RoleAssignment(**role_kw)

    kwargs = {}
    if "algorithm" in run_kw:
        kwargs["algorithm"] = run_kw["algorithm"]
    if "seeds" in run_kw:
        kwargs["seeds"] = run_kw["seeds"]
    if "episodes" in run_kw:
        kwargs["episodes"] = run_kw["episodes"]
    if "out" in run_kw:
        kwargs["out_dir"] = run_kw["out"]
    if "checkpoint_interval" in run_kw:
        kwargs["checkpoint_interval"] = run_kw["checkpoint_interval"]
    return ExperimentConfig(
        scheme=SchemeSpec(rl=rl, **scheme_kw),
        env=EnvConfig(**env_kw),
        hyper=CmaddpgHyper(**train_kw),
        roles=roles, **kwargs)


def load_config(path):
    try:
        with open(path, "r", encoding="utf-8") as f:
            text = f.read()
    except OSError as exc:
        raise InputError(f"cannot read config file {path}: {exc}") from None
    return config_from_pairs(parse_config_text(text))


def _format_value(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, str):
        return v
    if isinstance(v, tuple):
        return ",".join(_format_value(e) for e in v)
    raise InputError(f"cannot format config value {v!r}")


def config_to_pairs(config):
    """Canonical string pairs with every field materialized, sorted."""
    out = {}
    for name in _ENV_DEFAULTS:
        out[f"env.{name}"] = _format_value(getattr(config.env, name))
    for name in _TRAIN_DEFAULTS:
        out[f"train.{name}"] = _format_value(getattr(config.hyper, name))
    for name in _SAC_DEFAULTS:
        out[f"sac.{name}"] = _format_value(getattr(config.scheme.rl.sac,
                                                   name))
    out["scheme.rl.period"] = _format_value(config.scheme.rl.period)
    out["scheme.rl.alpha_max"] = _format_value(config.scheme.rl.alpha_max)
    out["scheme.kind"] = config.scheme.kind
    out["scheme.alpha_team"] = _format_value(config.scheme.alpha_team)
    out["scheme.alpha_agent"] = _format_value(config.scheme.alpha_agent)
    out["scheme.window"] = _format_value(config.scheme.window)
    out["scheme.learn_rl"] = _format_value(config.scheme.learn_rl)
    out["run.algorithm"] = config.algorithm
    out["run.seeds"] = _format_value(config.seeds)
    out["run.episodes"] = _format_value(config.episodes)
    out["run.out"] = config.out_dir
    out["run.checkpoint_interval"] = _format_value(
        config.checkpoint_interval)
    if config.roles is not None:
        out["roles.weak_team"] = _format_value(config.roles.weak_team)
        out["roles.weak_agent"] = _format_value(config.roles.weak_agent)
    return dict(sorted(out.items()))


def config_text(config):
    pairs = config_to_pairs(config)
    return "".join(f"{k} = {v}\n" for k, v in pairs.items())


def config_hash(config):
    """Hex digest of the canonical dump; independent of key order.

    The output directory is excluded: it locates results, it is not part
    of the experiment's identity.
    """
    pairs = config_to_pairs(config)
    pairs.pop("run.out", None)
    text = "".join(f"{k} = {v}\n" for k, v in pairs.items())
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


# -- shipped presets ----------------------------------------------------------

PRESET_NAMES = ALL_SCHEMES

_UNEQUAL_SPEEDS = (4.0, 4.0, 4.0, 2.0)


def preset(name):
    """Default experiment for one incentive scheme, on the unequal game
    (one weak-team member starts slow)."""
    if name not in PRESET_NAMES:
        raise InputError(
            f"unknown preset {name!r}; pick one of {PRESET_NAMES}")
    scheme_kw = {"kind": name}
    if name == SCHEME_STATIC_TEAM:
        scheme_kw["alpha_team"] = 0.1
    elif name == SCHEME_STATIC_AGENT:
        scheme_kw["alpha_team"] = 0.3
        scheme_kw["alpha_agent"] = 0.7
    elif name == SCHEME_DYNAMIC_LANDMARK:
        scheme_kw["window"] = 1000
    elif name in (SCHEME_TEAM_RL, SCHEME_AGENT_RL):
        scheme_kw["learn_rl"] = True
    return ExperimentConfig(
        scheme=SchemeSpec(**scheme_kw),
        env=EnvConfig(initial_max_speeds=_UNEQUAL_SPEEDS),
        hyper=CmaddpgHyper(),
        out_dir=f"runs/{name}")
