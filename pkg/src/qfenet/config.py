"""Run configuration: flat ``key = value`` files with dotted keys."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, fields


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    model_preset: str = "model2"
    model_layers: str = ""
    model_kernel: int = 3
    model_activation: str = "sigmoid"
    model_observable: str = "Z0"
    model_fanout: str = ""
    model_classes: str = "0,1,2,3,4,5,6,7,8,9"

    ansatz_name: str = "sim15"
    ansatz_layers: int = 3

    train_seed: int | None = None
    train_epochs: int = 9
    train_schedule: str = "stepped"
    train_lr: float = 0.01
    train_batch: int = 50
    train_patience: int = 2
    train_workers: int = 1
    train_growth_initial: float = 1.0
    train_growth_factor: float = 2.0
    train_growth_patience: int = 1

    data_source: str = "mnist"
    data_dir: str = "data/mnist"
    data_n_train: int = 6000
    data_n_test: int = 600
    data_downsample: int = 1
    data_stub_size: int = 7

    out_dir: str = "runs/default"

    @property
    def seed(self):
        return self.train_seed

    @property
    def classes(self):
        return tuple(int(c) for c in self.model_classes.split(",") if c.strip())

    def validate(self):
        if self.train_seed is None:
            raise ConfigError("train.seed is mandatory")
        if self.train_epochs < 1:
            raise ConfigError("train.epochs must be >= 1")
        if self.data_source not in ("mnist", "stub"):
            raise ConfigError(f"data.source must be 'mnist' or 'stub', got {self.data_source!r}")
        return self

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def to_text(self):
        lines = []
        for f in fields(self):
            value = getattr(self, f.name)
            if value is None:
                continue
            lines.append(f"{key_of(f.name)} = {value}")
        return "\n".join(lines) + "\n"


_FIELDS = {f.name: f for f in fields(RunConfig)}


def key_of(field_name):
    head, _, tail = field_name.partition("_")
    return f"{head}.{tail}"


def _coerce(name, text):
    kind = _FIELDS[name].type
    text = text.strip()
    try:
        if "int" in kind:
            return int(text)
        if "float" in kind:
            return float(text)
    except ValueError:
        raise ConfigError(f"{key_of(name)}: cannot parse {text!r} as {kind}") from None
    return text


def apply_overrides(config: RunConfig, pairs) -> RunConfig:
    """Apply ``(dotted_key, text_value)`` pairs."""
    changes = {}
    for key, value in pairs:
        name = key.strip().replace(".", "_")
        if name not in _FIELDS:
            raise ConfigError(f"unknown config key {key!r}")
        changes[name] = _coerce(name, value)
    return config.replace(**changes)


def parse_config_text(text, base=None) -> RunConfig:
    pairs = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = line.split("=", 1)
        pairs.append((key, value))
    return apply_overrides(base or RunConfig(), pairs)


def load_config(path, overrides=()) -> RunConfig:
    with open(path) as fh:
        cfg = parse_config_text(fh.read())
    return apply_overrides(cfg, overrides)
