"""Training configuration and the flat ``key = value`` config file format."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path

from crest.edl import FUSION_MODES
from crest.errors import ConfigError
from crest.grounding import EVIDENCE_ACTIVATIONS
from crest.synthzsl import SynthConfig


@dataclass
class TrainConfig:
    epochs: int = 30
    batch_size: int = 64
    learning_rate: float = 1e-4
    weight_decay: float = 1e-4
    seed: int = 0
    # loss and inference coefficients
    mu: float = 0.5
    lambda_cal: float = 0.2
    lambda_edl: float = 0.001
    beta: float = 1.0
    gamma: float = 1.0
    temperature: float = 0.1
    indicator: float = 1.0
    margin: float = 1.0
    similarity_threshold: float = 0.5
    annealing_steps: int = 10
    vicl_weight: float = 1.0
    digs_weight: float = 1.0
    fusion_mode: str = "weighted_average"
    # architecture
    layers: int = 1
    d_k: int = 32
    hidden: int = 64
    embed_width: int = 32
    n_patterns: int = 64
    pattern_width: int = 16
    pooling: str = "mean"
    evidence_activation: str = "softplus"
    input_projection: bool = False

    def __post_init__(self):
        for name in ("batch_size", "annealing_steps", "layers", "d_k", "hidden",
                     "embed_width", "n_patterns", "pattern_width"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if self.epochs < 0:
            raise ConfigError("epochs must be nonnegative")
        if self.n_patterns < 2:
            raise ConfigError("n_patterns must be at least 2")
        if not 0.0 <= self.mu <= 1.0:
            raise ConfigError("mu must lie in [0, 1]")
        for name in ("learning_rate", "temperature", "margin"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        for name in ("weight_decay", "lambda_cal", "lambda_edl", "beta", "gamma",
                     "indicator", "vicl_weight", "digs_weight"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be nonnegative")
        if not -1.0 <= self.similarity_threshold <= 1.0:
            raise ConfigError("similarity_threshold must lie in [-1, 1]")
        if self.fusion_mode not in FUSION_MODES:
            raise ConfigError(f"fusion_mode must be one of {FUSION_MODES}")
        if self.pooling not in ("mean", "max"):
            raise ConfigError("pooling must be mean or max")
        if self.evidence_activation not in EVIDENCE_ACTIVATIONS:
            raise ConfigError(f"evidence_activation must be one of {EVIDENCE_ACTIVATIONS}")


def _fields(cls):
    return {f.name: f for f in dataclasses.fields(cls)}


def _coerce(raw, field_type, key, lineno):
    kind = field_type if isinstance(field_type, str) else getattr(field_type, "__name__", str(field_type))
    try:
        if kind == "bool":
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        return raw
    except ValueError:
        raise ConfigError(f"line {lineno}: key '{key}': cannot parse {raw!r} as {kind}") from None


def parse_config_text(text):
    """Parse ``key = value`` lines; returns {key: (typed value, line number)}."""
    known = {**_fields(SynthConfig), **_fields(TrainConfig)}
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line.strip()!r}")
        key, raw = (part.strip() for part in stripped.split("=", 1))
        if key not in known:
            raise ConfigError(f"line {lineno}: unknown key '{key}'")
        values[key] = (_coerce(raw, known[key].type, key, lineno), lineno)
    return values


def _build(cls, values):
    names = _fields(cls)
    kwargs = {k: v for k, (v, _) in values.items() if k in names}
    try:
        return cls(**kwargs)
    except ConfigError as exc:
        message = str(exc)
        for key, (_, lineno) in values.items():
            if key in names and message.startswith(key):
                raise ConfigError(f"line {lineno}: key '{key}': {message}") from None
        raise


def load_configs(path=None):
    """(SynthConfig, TrainConfig) from one config file, defaults for missing keys."""
    values = {}
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file {path} not found")
        values = parse_config_text(path.read_text(encoding="utf-8"))
    return _build(SynthConfig, values), _build(TrainConfig, values)
