"""Flat key=value run configuration with documented defaults.

Unknown keys are errors (typo safety). Lines starting with '#' and blank
lines are ignored. Booleans accept true/false, paths are plain strings,
and "none" clears an optional path.
"""

from __future__ import annotations

from dataclasses import dataclass, fields


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    # identification loop
    omega: float = 0.6  # relation confidence threshold
    delta: int = 2  # structural difference threshold
    max_iterations: int = 9
    # graph encoder
    heads: int = 4
    beta: float = 0.7  # intra-sentence combination weight
    # loss
    gamma: float = 2.0
    alpha_causal: float = 0.75
    # architecture
    hidden_dim: int = 64
    mid_dim: int = 0  # 0 means hidden_dim
    vocab_size: int = 8192
    dropout: float = 0.4
    leaky_slope: float = 0.2
    sentence_positions: bool = True
    max_sentences: int = 64
    # optimization
    learning_rate: float = 1e-4
    warmup_frac: float = 0.10
    weight_decay: float = 0.01
    lr_schedule: str = "constant"
    epochs: int = 30
    seed: int = 0
    # encoder source
    encoder: str = "toy"  # "toy" or "external"
    external_vectors: str = ""
    # file paths
    train_path: str = ""
    dev_path: str = ""
    test_path: str = ""
    checkpoint_path: str = "model.ckpt"
    log_path: str = "train_log.jsonl"

    def validate(self):
        if not 0.0 < self.omega:
            raise ConfigError("omega must be positive")
        if self.delta < 0:
            raise ConfigError("delta must be nonnegative")
        if self.max_iterations < 1:
            raise ConfigError("max_iterations must be >= 1")
        if not 0.0 <= self.beta <= 1.0:
            raise ConfigError("beta must be in [0, 1]")
        if self.hidden_dim % self.heads != 0:
            raise ConfigError(
                f"hidden_dim {self.hidden_dim} must be divisible by heads {self.heads}"
            )
        if self.mid_dim < 0:
            raise ConfigError("mid_dim must be nonnegative")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError("dropout must be in [0, 1)")
        if self.gamma < 0:
            raise ConfigError("gamma must be nonnegative")
        if not 0.0 < self.alpha_causal < 1.0:
            raise ConfigError("alpha_causal must be in (0, 1)")
        if not 0.0 <= self.warmup_frac <= 1.0:
            raise ConfigError("warmup_frac must be in [0, 1]")
        if self.lr_schedule not in ("constant", "linear"):
            raise ConfigError(f"unknown lr_schedule {self.lr_schedule!r}")
        if self.encoder not in ("toy", "external"):
            raise ConfigError(f"unknown encoder {self.encoder!r}")
        if self.encoder == "external" and not self.external_vectors:
            raise ConfigError("encoder=external requires external_vectors")
        return self


def parse_kv(path) -> dict:
    """Parse 'key = value' lines into a string map."""
    out = {}
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            if "=" not in stripped:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
            key, _, value = stripped.partition("=")
            key = key.strip()
            if key in out:
                raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
            out[key] = value.strip()
    return out


def _coerce(name: str, text: str, target_type):
    if target_type is bool:
        low = text.lower()
        if low in ("true", "1", "yes"):
            return True
        if low in ("false", "0", "no"):
            return False
        raise ConfigError(f"key {name!r}: expected a boolean, got {text!r}")
    if target_type is int:
        try:
            return int(text)
        except ValueError:
            raise ConfigError(f"key {name!r}: expected an integer, got {text!r}")
    if target_type is float:
        try:
            return float(text)
        except ValueError:
            raise ConfigError(f"key {name!r}: expected a number, got {text!r}")
    return "" if text.lower() == "none" else text


def apply_overrides(cfg_cls, values: dict):
    allowed = {f.name: f.type for f in fields(cfg_cls)}
    type_of = {"int": int, "float": float, "str": str, "bool": bool}
    kwargs = {}
    for key, text in values.items():
        if key not in allowed:
            raise ConfigError(f"unknown configuration key {key!r}")
        kwargs[key] = _coerce(key, text, type_of[allowed[key]])
    return cfg_cls(**kwargs)


def load_config(path) -> RunConfig:
    return apply_overrides(RunConfig, parse_kv(path)).validate()
