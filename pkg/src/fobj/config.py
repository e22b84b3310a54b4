"""Flat key=value configuration and the per-run manifest.

Config files are UTF-8 ``key = value`` lines (a TOML-compatible subset);
unknown keys are rejected so typos fail fast. The run manifest written at the
end of every CLI run snapshots the config, master seed, tool version, stage
timings, and output paths, and is written atomically.
"""

from __future__ import annotations

import json
import os
import tempfile
import time
from dataclasses import asdict, dataclass, field, fields

from . import __version__
from .ppo import PPOConfig


@dataclass
class EngineConfig:
    # superpoint construction
    knn: int = 16
    color_weight: float = 0.2
    k_f: float = 0.05
    min_size: int = 20
    adjacency_dist: float = 0.1
    # encoder / policy dims
    encoder_hidden: int = 64
    feature_dim: int = 32
    policy_hidden: int = 128
    # geometric verification
    geo_radius: float = 0.05
    geo_alpha: float = 0.30
    geo_min_pts: int = 5
    geo_units: str = "metric"
    # semantic reward
    bank_capacity: int = 20
    # discovery
    n_rollouts: int = 24
    dedupe_iou: float = 0.8
    # synthetic features
    feature_spec_dim: int = 16
    # RL
    ppo: PPOConfig = field(default_factory=PPOConfig)

    def flat(self) -> dict:
        d = asdict(self)
        ppo = d.pop("ppo")
        d.update(ppo)
        return d


def _coerce(value: str, typ):
    value = value.strip().strip('"').strip("'")
    if typ is bool:
        return value.lower() in ("1", "true", "yes", "on")
    return typ(value)


def parse_config_text(text: str) -> EngineConfig:
    engine_fields = {f.name: f.type for f in fields(EngineConfig) if f.name != "ppo"}
    ppo_fields = {f.name: f.type for f in fields(PPOConfig)}
    typemap = {"int": int, "float": float, "bool": bool, "str": str}
    engine_kwargs, ppo_kwargs = {}, {}
    for ln, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {ln}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        if key in engine_fields:
            engine_kwargs[key] = _coerce(value, typemap.get(engine_fields[key], str))
        elif key in ppo_fields:
            ppo_kwargs[key] = _coerce(value, typemap.get(ppo_fields[key], str))
        else:
            raise ValueError(f"line {ln}: unknown config key {key!r}")
    return EngineConfig(ppo=PPOConfig(**ppo_kwargs), **engine_kwargs)


def load_config(path: str | None) -> EngineConfig:
    if path is None:
        return EngineConfig()
    with open(path, "r", encoding="utf-8") as f:
        return parse_config_text(f.read())


def save_config(cfg: EngineConfig, path: str) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for k, v in cfg.flat().items():
            f.write(f"{k} = {v}\n")


def atomic_write_json(doc: dict, path: str) -> None:
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as f:
            json.dump(doc, f, indent=2, sort_keys=True)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


class RunManifest:
    """Collects stage timings and outputs; written atomically at run end."""

    def __init__(self, command: str, cfg: EngineConfig, master_seed: int):
        self.doc = {"command": command, "tool_version": __version__,
                    "master_seed": master_seed, "config": cfg.flat(),
                    "stages": [], "outputs": []}
        self._t0 = None
        self._stage = None

    def start(self, stage: str):
        self._stage, self._t0 = stage, time.perf_counter()

    def stop(self):
        if self._stage is not None:
            self.doc["stages"].append(
                {"stage": self._stage,
                 "seconds": round(time.perf_counter() - self._t0, 3)})
            self._stage = None

    def add_output(self, path: str):
        self.doc["outputs"].append(os.path.abspath(path))

    def write(self, path: str):
        self.stop()
        atomic_write_json(self.doc, path)
