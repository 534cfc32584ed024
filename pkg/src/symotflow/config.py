"""Flat key=value experiment configs and the run manifest.

The config format is plain text: one dotted key per line, '#' comments,
blank lines ignored. Example keys: train.lr=1e-3, data.x.kind=moons.
A manifest snapshots the fully resolved config plus dataset hashes so a
run can be reproduced bit-identically from the manifest alone.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

from .data import DatasetSpec
from .train import TrainConfig


class ConfigError(ValueError):
    """Config file or override could not be parsed."""


def parse_config_text(text: str, source: str = "<config>") -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected key=value, got '{raw.strip()}'")
        key, value = line.split("=", 1)
        key, value = key.strip(), value.strip()
        if not key:
            raise ConfigError(f"{source}:{lineno}: empty key")
        out[key] = value
    return out


def parse_config_file(path) -> dict[str, str]:
    with open(path, "r", encoding="utf-8") as f:
        return parse_config_text(f.read(), source=str(path))


def apply_overrides(cfg: dict[str, str], overrides: list[str]) -> dict[str, str]:
    merged = dict(cfg)
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override '{item}' is not key=value")
        key, value = item.split("=", 1)
        key = key.strip()
        # Bare keys default to the training section, e.g. --override beta=0.
        if "." not in key:
            key = f"train.{key}"
        merged[key] = value.strip()
    return merged


def _get(cfg: dict[str, str], key: str, default=None, convert=str):
    if key not in cfg:
        if default is None:
            raise ConfigError(f"missing required config key '{key}'")
        return default
    try:
        return convert(cfg[key])
    except ValueError as exc:
        raise ConfigError(f"config key '{key}': {exc}") from exc


def _bool(value: str) -> bool:
    low = value.lower()
    if low in ("true", "1", "yes"):
        return True
    if low in ("false", "0", "no"):
        return False
    raise ValueError(f"expected a boolean, got '{value}'")


def train_config_from(cfg: dict[str, str]) -> TrainConfig:
    scales = cfg.get("train.kernel_scales")
    kernel_scales = (
        tuple(float(s) for s in scales.split(",")) if scales else TrainConfig.kernel_scales
    )
    grad_clip = cfg.get("train.grad_clip")
    return TrainConfig(
        beta=_get(cfg, "train.beta", TrainConfig.beta, float),
        symmetric=_get(cfg, "train.symmetric", TrainConfig.symmetric, _bool),
        epochs=_get(cfg, "train.epochs", TrainConfig.epochs, int),
        batch_size=_get(cfg, "train.batch_size", TrainConfig.batch_size, int),
        lr=_get(cfg, "train.lr", TrainConfig.lr, float),
        weight_decay=_get(cfg, "train.weight_decay", TrainConfig.weight_decay, float),
        seed=_get(cfg, "train.seed", TrainConfig.seed, int),
        blocks=_get(cfg, "train.blocks", TrainConfig.blocks, int),
        subnet_width=_get(cfg, "train.subnet_width", TrainConfig.subnet_width, int),
        gamma=_get(cfg, "train.gamma", TrainConfig.gamma, float),
        kernel_scales=kernel_scales,
        grad_clip=float(grad_clip) if grad_clip not in (None, "", "none") else None,
    )


def dataset_spec_from(cfg: dict[str, str], side: str) -> DatasetSpec:
    prefix = f"data.{side}."
    try:
        return DatasetSpec(
            kind=_get(cfg, prefix + "kind"),
            n=_get(cfg, prefix + "n", 2000, int),
            noise=_get(cfg, prefix + "noise", 0.05, float),
            seed=_get(cfg, prefix + "seed", 0, int),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def file_sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass
class RunManifest:
    config: dict[str, str]
    datasets: dict[str, dict] = field(default_factory=dict)
    outputs: dict[str, str] = field(default_factory=dict)
    duration_s: float = 0.0
    version: str = ""

    def save(self, path) -> None:
        payload = {
            "config": self.config,
            "datasets": self.datasets,
            "outputs": self.outputs,
            "duration_s": self.duration_s,
            "version": self.version,
        }
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            json.dump(payload, f, indent=2, sort_keys=True)
            f.write("\n")

    @classmethod
    def load(cls, path) -> "RunManifest":
        with open(path, "r", encoding="utf-8") as f:
            payload = json.load(f)
        return cls(
            config=payload["config"],
            datasets=payload.get("datasets", {}),
            outputs=payload.get("outputs", {}),
            duration_s=payload.get("duration_s", 0.0),
            version=payload.get("version", ""),
        )
