"""Flat key=value run configuration with strict validation."""

from __future__ import annotations

from dataclasses import dataclass, fields

from .errors import ConfigError


@dataclass
class RunConfig:
    image_size: int = 64
    canny_sigma: float = 1.0
    canny_low: float = 50.0
    canny_high: float = 150.0
    lambda_cyc: float = 10.0
    lambda_fm: float = 10.0
    lr_g: float = 2e-4
    lr_d: float = 2e-4
    adam_beta1: float = 0.5
    adam_beta2: float = 0.999
    epochs: int = 200
    batch_size: int = 1
    seed: int = 0
    pool_size: int = 50
    gen_base_channels: int = 32
    disc_base_channels: int = 32
    n_res_blocks: int = 4
    dropout: float = 0.0
    filter_interior: bool = False
    early_stop_loss: float | None = None  # optional total-G-loss floor; off by default

    def validate(self):
        s = self.image_size
        if s < 16 or s % 4 != 0:
            raise ConfigError(f"image_size must be >= 16 and divisible by 4, got {s}")
        if (s * s) % 512 != 0:
            raise ConfigError(f"image_size {s}: {s}*{s} pixels must be divisible by 512 for identity tiling")
        if self.canny_sigma <= 0:
            raise ConfigError(f"canny_sigma must be positive, got {self.canny_sigma}")
        if self.canny_low < 0 or self.canny_high < self.canny_low:
            raise ConfigError(f"canny thresholds need high >= low >= 0, got {self.canny_low}/{self.canny_high}")
        if self.lambda_cyc < 0 or self.lambda_fm < 0:
            raise ConfigError("loss weights must be non-negative")
        if self.lr_g < 0 or self.lr_d < 0:
            raise ConfigError("learning rates must be non-negative")
        if not (0 <= self.adam_beta1 < 1 and 0 <= self.adam_beta2 < 1):
            raise ConfigError("adam betas must lie in [0, 1)")
        if self.epochs < 1 or self.batch_size < 1:
            raise ConfigError("epochs and batch_size must be >= 1")
        if self.pool_size < 0:
            raise ConfigError("pool_size must be >= 0")
        if not (0 <= self.dropout < 1):
            raise ConfigError(f"dropout must lie in [0, 1), got {self.dropout}")
        if min(self.gen_base_channels, self.disc_base_channels, self.n_res_blocks) < 1:
            raise ConfigError("architecture sizes must be >= 1")
        return self


_BOOL_WORDS = {"true": True, "1": True, "yes": True, "false": False, "0": False, "no": False}


def _convert(key, raw, target_type):
    raw = raw.strip()
    try:
        if target_type is bool:
            word = raw.lower()
            if word not in _BOOL_WORDS:
                raise ValueError(f"expected true/false, got {raw!r}")
            return _BOOL_WORDS[word]
        if target_type is int:
            return int(raw)
        return float(raw)
    except ValueError as exc:
        raise ConfigError(f"config key {key!r}: {exc}") from exc


def parse_config(path) -> RunConfig:
    """Parse `key = value` lines; '#' comments and blanks ignored; unknown keys rejected."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc

    types = {f.name: f.type for f in fields(RunConfig)}
    cfg = RunConfig()
    for lineno, line in enumerate(raw.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key = value, got {line!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        if key not in types:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        if key == "early_stop_loss":
            setattr(cfg, key, _convert(key, value, float))
            continue
        kind = types[key]
        target = bool if kind in (bool, "bool") else int if kind in (int, "int") else float
        setattr(cfg, key, _convert(key, value, target))
    return cfg.validate()


def write_config(cfg: RunConfig, path):
    lines = []
    for f in fields(RunConfig):
        value = getattr(cfg, f.name)
        if value is None:
            continue
        lines.append(f"{f.name} = {value}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
