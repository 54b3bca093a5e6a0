"""Flat key=value run configuration with strict validation.

One config file records a whole run: data source, scenario, features and
training hyperparameters. Unknown keys are rejected, every value is
validated before any pipeline stage executes, and `dump` emits a file that
reproduces the run exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from typing import Any

from .calls import ScenarioConfig
from .errors import ConfigError
from .training import TrainingConfig


def _parse_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("true", "1", "yes", "on"):
        return True
    if low in ("false", "0", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_int_list(text: str) -> tuple[int, ...]:
    parts = [p for p in text.replace(" ", "").split(",") if p]
    if not parts:
        raise ValueError("empty list")
    return tuple(int(p) for p in parts)


@dataclass
class AppConfig:
    """Validated run configuration; field names are the config-file keys."""

    road_csv: str = ""  # empty -> synthesize
    days: int = 20
    impute: str = "none"  # none | hold
    out_dir: str = "runs"
    lambda_per_min: float = 0.2
    handover_prob: float = 0.5
    cell_range_miles: float = 1.5
    delta_s: int = 300
    exact_flow: bool = False
    feature_mode: str = "both"  # net | net_road | both
    window: int = 18
    horizon: int = 1
    split: tuple[int, int, int] = (3, 1, 1)
    cell: str = "lstm"  # lstm | gru
    hidden_size: int = 32
    learning_rate: float = 1e-3
    rho: float = 0.9
    epsilon: float = 1e-8
    batch_size: int = 32
    max_epochs: int = 50
    patience: int = 5
    seed: int = 1  # root seed (road synthesis stream)
    seeds: tuple[int, ...] = (1, 2, 3)  # per-run seeds

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        checks = [
            (self.days >= 1, "days must be >= 1"),
            (self.impute in ("none", "hold"), "impute must be none or hold"),
            (self.lambda_per_min >= 0, "lambda_per_min must be >= 0"),
            (0 <= self.handover_prob <= 1, "handover_prob must lie in [0, 1]"),
            (self.cell_range_miles > 0, "cell_range_miles must be > 0"),
            (self.delta_s > 0, "delta_s must be > 0"),
            (self.feature_mode in ("net", "net_road", "both"), "feature_mode must be net, net_road or both"),
            (self.window >= 1, "window must be >= 1"),
            (self.horizon >= 1, "horizon must be >= 1"),
            (len(self.split) == 3 and all(r > 0 for r in self.split), "split must be three positive integers"),
            (self.cell in ("lstm", "gru"), "cell must be lstm or gru"),
            (self.hidden_size >= 1, "hidden_size must be >= 1"),
            (self.learning_rate > 0, "learning_rate must be > 0"),
            (0 <= self.rho < 1, "rho must lie in [0, 1)"),
            (self.epsilon > 0, "epsilon must be > 0"),
            (self.batch_size >= 1, "batch_size must be >= 1"),
            (self.max_epochs >= 1, "max_epochs must be >= 1"),
            (self.patience >= 1, "patience must be >= 1"),
            (len(self.seeds) >= 1, "seeds must name at least one seed"),
        ]
        for ok, message in checks:
            if not ok:
                raise ConfigError(message)

    # -- parsing ---------------------------------------------------------

    @classmethod
    def _converters(cls) -> dict[str, Any]:
        out: dict[str, Any] = {}
        for f in fields(cls):
            if f.name in ("split", "seeds"):
                out[f.name] = _parse_int_list
            elif f.type == "bool" or isinstance(f.default, bool):
                out[f.name] = _parse_bool
            elif isinstance(f.default, int):
                out[f.name] = int
            elif isinstance(f.default, float):
                out[f.name] = float
            else:
                out[f.name] = str
        return out

    @classmethod
    def from_mapping(cls, mapping: dict[str, str]) -> "AppConfig":
        converters = cls._converters()
        values: dict[str, Any] = {}
        for key, raw in mapping.items():
            if key not in converters:
                raise ConfigError(f"unknown config key {key!r}")
            try:
                values[key] = converters[key](raw)
            except (ValueError, TypeError) as exc:
                raise ConfigError(f"bad value for {key!r}: {raw!r} ({exc})") from exc
        return cls(**values)

    @classmethod
    def from_file(cls, path: str, overrides: dict[str, str] | None = None) -> "AppConfig":
        mapping = parse_config_file(path)
        mapping.update(overrides or {})
        return cls.from_mapping(mapping)

    # -- serialization ----------------------------------------------------

    def dump(self) -> str:
        lines = []
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, tuple):
                value = ",".join(str(v) for v in value)
            elif isinstance(value, bool):
                value = "true" if value else "false"
            elif isinstance(value, float):
                value = repr(value)
            lines.append(f"{f.name} = {value}")
        return "\n".join(lines) + "\n"

    # -- adapters ---------------------------------------------------------

    def scenario(self) -> ScenarioConfig:
        return ScenarioConfig(
            lam=self.lambda_per_min,
            handover_prob=self.handover_prob,
            cell_range_miles=self.cell_range_miles,
            delta_s=self.delta_s,
            exact_flow=self.exact_flow,
        )

    def training(self) -> TrainingConfig:
        return TrainingConfig(
            cell=self.cell,
            hidden_size=self.hidden_size,
            learning_rate=self.learning_rate,
            rho=self.rho,
            epsilon=self.epsilon,
            batch_size=self.batch_size,
            max_epochs=self.max_epochs,
            patience=self.patience,
        )

    def modes(self) -> tuple[str, ...]:
        return ("net", "net_road") if self.feature_mode == "both" else (self.feature_mode,)


def parse_config_file(path: str) -> dict[str, str]:
    """Read `key = value` lines; `#` starts a comment, blank lines ignored."""
    mapping: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.split("#", 1)[0].strip()
            if not stripped:
                continue
            if "=" not in stripped:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {line.rstrip()!r}")
            key, value = stripped.split("=", 1)
            key = key.strip()
            if key in mapping:
                raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
            mapping[key] = value.strip()
    return mapping
