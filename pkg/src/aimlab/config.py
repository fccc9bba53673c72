"""Run configuration: one YAML document plus ``--set key=value`` overrides."""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import asdict, replace
from pathlib import Path

import yaml

from .detector import DetectorConfig
from .gan import GanConfig
from .metrics import DCF_PRIORS
from .sim import HumanModelParams, SimConfig, human_params_from_dict, sim_config_from_dict

SCENARIOS = ("worst-case", "known-attack", "oracle", "train-on-test")


class ConfigError(ValueError):
    pass


def default_config() -> dict:
    sim = asdict(SimConfig())
    sim.pop("rng_seed")
    return {
        "master_seed": 7,
        "paths": {"data": "data", "models": "models", "reports": "reports"},
        "sim": _plain(sim),
        "human": asdict(HumanModelParams()),
        "roster": {
            # GAN training data: players x episodes x 2.5 min = 20 min per group
            "gan_group_players": 4,
            "gan_group_episodes": 2,
            "heuristic_train_players": 12,
            "heuristic_test_players": 6,
            "gan_train_players": 12,
            "gan_test_players": 6,
            "bona_fide_episodes": 2,
            "performance_players": 20,
            "archetype_spread": 0.5,
        },
        # desk-scale training budget: about 75 s per group on one CPU core
        "gan": asdict(replace(GanConfig(), epochs=60, window_stride=2, learning_rate=5e-4, disc_hidden=256)),
        "detector": asdict(DetectorConfig()),
        "scenarios": list(SCENARIOS),
        "dcf_priors": list(DCF_PRIORS),
        "aggregation": {"n_values": [1, 2, 3, 5, 7, 10, 15, 20, 25, 30], "repetitions": 200},
    }


def _plain(obj):
    """Tuples -> lists so the YAML and the hash are representation independent."""
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    return obj


def _merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in override.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def apply_override(cfg: dict, assignment: str) -> dict:
    """Apply ``a.b.c=value``; the value is parsed as YAML (numbers, lists, booleans)."""
    if "=" not in assignment:
        raise ConfigError(f"override {assignment!r} is not key=value")
    key, raw = assignment.split("=", 1)
    parts = key.strip().split(".")
    node = cfg
    for p in parts[:-1]:
        if not isinstance(node.get(p), dict):
            raise ConfigError(f"unknown config section {key!r}")
        node = node[p]
    if parts[-1] not in node:
        raise ConfigError(f"unknown config key {key!r}")
    node[parts[-1]] = yaml.safe_load(raw)
    return cfg


def load_config(path=None, overrides=(), seed: int | None = None) -> dict:
    cfg = default_config()
    if path is not None:
        try:
            loaded = yaml.safe_load(Path(path).read_text()) or {}
        except (OSError, yaml.YAMLError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(loaded, dict):
            raise ConfigError(f"{path}: top level must be a mapping")
        unknown = set(loaded) - set(cfg)
        if unknown:
            raise ConfigError(f"{path}: unknown keys {sorted(unknown)}")
        cfg = _merge(cfg, loaded)
    for o in overrides:
        apply_override(cfg, o)
    if seed is not None:
        cfg["master_seed"] = int(seed)
    validate(cfg)
    return _plain(cfg)


def validate(cfg: dict) -> None:
    try:
        sim_config(cfg)
        human_params(cfg)
        GanConfig.from_dict(cfg["gan"])
        DetectorConfig.from_dict(cfg["detector"])
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    for p in cfg["dcf_priors"]:
        if not 0 < p < 1:
            raise ConfigError(f"dcf prior {p} outside (0, 1)")
    paths = list(cfg["paths"].values())
    if len(set(paths)) != len(paths):
        raise ConfigError("data, model and report paths must be distinct")
    bad = set(cfg["scenarios"]) - set(SCENARIOS)
    if bad:
        raise ConfigError(f"unknown scenarios {sorted(bad)}")


def sim_config(cfg: dict, rng_seed: int = 0) -> SimConfig:
    return sim_config_from_dict({**cfg["sim"], "rng_seed": rng_seed})


def human_params(cfg: dict) -> HumanModelParams:
    return human_params_from_dict(cfg["human"])


def config_hash(cfg: dict) -> str:
    """Hash of everything that determines outputs (paths excluded)."""
    body = {k: v for k, v in cfg.items() if k != "paths"}
    return hashlib.sha256(json.dumps(body, sort_keys=True).encode()).hexdigest()


def dump_config(cfg: dict) -> str:
    return yaml.safe_dump(cfg, sort_keys=False)
