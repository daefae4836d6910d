"""Run configuration: ``key = value`` files, presets and typed overrides."""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

from .contrastive import LossConfig
from .sampler import PprConfig
from .trainer import TrainConfig

# key -> default; the default's type is the parser for that key
DEFAULTS: dict = {
    "dataset": "",
    "data_dir": "",
    "edges": "",
    "features": "",
    "labels": "",
    "out_dir": "runs",
    "seed": 0,
    "restart_prob": 0.15,
    "subgraph_size": 20,
    "max_iters": 100,
    "tol": 1e-9,
    "sampler": "k-rank",
    "hops": 1,
    "margin": 0.5,
    "loss_mode": "FULL",
    "literal_sign": False,
    "epochs": 400,
    "batch_size": 0,  # 0: automatic
    "learning_rate": 0.001,
    "adam_beta1": 0.9,
    "adam_beta2": 0.999,
    "adam_eps": 1e-8,
    "embedding_dim": 1000,
    "patience": 50,
    "view": "GLOBAL",
    "seeds": 10,
    "per_class": 20,
    "test_frac": 0.4,
    "lp_features": "concat",
    "sizes": "2,5,10,15,20,25,30",
}

PRESETS = {
    "pubmed": {"margin": 0.35, "embedding_dim": 450},
}

# keys that change the subgraph cache
CACHE_KEYS = ("edges", "features", "restart_prob", "subgraph_size", "max_iters", "tol", "sampler", "hops", "seed")


class ConfigError(ValueError):
    pass


def _coerce(key: str, raw):
    default = DEFAULTS[key]
    if isinstance(raw, type(default)) and not (isinstance(default, int) and isinstance(raw, bool)):
        return raw
    s = str(raw).strip()
    try:
        if isinstance(default, bool):
            if s.lower() in ("1", "true", "yes", "on"):
                return True
            if s.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(s)
        if isinstance(default, int):
            return int(s)
        if isinstance(default, float):
            return float(s)
    except ValueError:
        raise ConfigError(f"invalid value {s!r} for {key}") from None
    return s


def parse_config_file(path) -> dict:
    out = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        s = line.split("#", 1)[0].strip()
        if not s:
            continue
        if "=" not in s:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (t.strip() for t in s.split("=", 1))
        key = key.replace("-", "_")
        if key not in DEFAULTS:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        out[key] = _coerce(key, value)
    return out


def resolve(file_values: dict | None = None, overrides: dict | None = None) -> dict:
    """Defaults, then dataset preset, then config file, then flag overrides."""
    merged = {**(file_values or {}), **(overrides or {})}
    for key in merged:
        if key not in DEFAULTS:
            raise ConfigError(f"unknown key {key!r}")
    cfg = dict(DEFAULTS)
    cfg.update(PRESETS.get(str(merged.get("dataset", "")).lower(), {}))
    cfg.update({k: _coerce(k, v) for k, v in merged.items()})
    if cfg["dataset"] and not cfg["data_dir"]:
        cfg["data_dir"] = str(Path("data") / cfg["dataset"].lower())
    if cfg["data_dir"]:
        base = Path(cfg["data_dir"])
        for key, name in (("edges", "edges.txt"), ("features", "features.txt"), ("labels", "labels.txt")):
            if not cfg[key]:
                cfg[key] = str(base / name)
    return cfg


def config_hash(cfg: dict, keys=None) -> str:
    keys = sorted(cfg) if keys is None else keys
    blob = json.dumps({k: cfg[k] for k in keys}, sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def train_config(cfg: dict) -> TrainConfig:
    return TrainConfig(
        epochs=cfg["epochs"],
        batch_size=cfg["batch_size"] or None,
        learning_rate=cfg["learning_rate"],
        adam_beta1=cfg["adam_beta1"],
        adam_beta2=cfg["adam_beta2"],
        adam_eps=cfg["adam_eps"],
        seed=cfg["seed"],
        embedding_dim=cfg["embedding_dim"],
        patience=cfg["patience"],
        loss=LossConfig(cfg["margin"], cfg["loss_mode"].upper(), cfg["literal_sign"]),
        ppr=PprConfig(cfg["restart_prob"], cfg["subgraph_size"], cfg["max_iters"], cfg["tol"]),
        sampler=cfg["sampler"],
        hops=cfg["hops"],
    )
