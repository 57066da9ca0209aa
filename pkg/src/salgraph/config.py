"""Pipeline configuration: TOML file, CLI overrides, validation.

Precedence is flags > file > defaults. All keys are flat.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .errors import ConfigError

_PATH_KEYS = ("input_dir", "output_dir", "gt_dir", "feature_tensor_path")


@dataclass
class PipelineConfig:
    input_dir: Path
    output_dir: Path
    gt_dir: Path | None = None
    feature_tensor_path: Path | None = None
    frame_pattern: str = "*.png"

    # kernel / propagation / fusion
    rho: float = 0.1
    rho_deep: float | None = None  # falls back to rho
    deep_dim_scaling: bool = True
    mu: float = 0.1
    beta: float = 0.7

    # segmentation
    k: float = 8.0
    min_size: int = 100
    levels: int = 10
    layer_index: int | None = None  # default: middle layer
    connectivity: int = 6

    # solver
    solver: str = "direct"
    iter_tol: float = 1e-9
    max_iter: int = 10000

    # outputs
    write_overlays: bool = True
    dump_affinity: bool = False
    dump_vectors: bool = False

    def validate(self) -> None:
        if self.rho <= 0:
            raise ConfigError(f"rho must be > 0, got {self.rho}")
        if self.rho_deep is not None and self.rho_deep <= 0:
            raise ConfigError(f"rho_deep must be > 0, got {self.rho_deep}")
        if self.mu <= 0:
            raise ConfigError(f"mu must be > 0, got {self.mu}")
        if not 0.0 <= self.beta <= 1.0:
            raise ConfigError(f"beta must be in [0, 1], got {self.beta}")
        if self.k <= 0:
            raise ConfigError(f"k must be > 0, got {self.k}")
        if self.min_size < 1:
            raise ConfigError(f"min_size must be >= 1, got {self.min_size}")
        if self.levels < 1:
            raise ConfigError(f"levels must be >= 1, got {self.levels}")
        if self.layer_index is not None and not 1 <= self.layer_index <= self.levels:
            raise ConfigError(
                f"layer_index {self.layer_index} out of range [1, {self.levels}]"
            )
        if self.connectivity not in (6, 26):
            raise ConfigError(f"connectivity must be 6 or 26, got {self.connectivity}")
        if self.solver not in ("direct", "iterative"):
            raise ConfigError(f"solver must be 'direct' or 'iterative', got '{self.solver}'")
        if self.iter_tol <= 0:
            raise ConfigError(f"iter_tol must be > 0, got {self.iter_tol}")
        if self.max_iter < 1:
            raise ConfigError(f"max_iter must be >= 1, got {self.max_iter}")

    @property
    def effective_rho_deep(self) -> float:
        return self.rho if self.rho_deep is None else self.rho_deep

    def snapshot(self) -> dict:
        """JSON-serializable view of the configuration."""
        out = {}
        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            out[f.name] = str(value) if isinstance(value, Path) else value
        return out


def read_config_file(path: str | Path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def build_config(file_values: dict | None = None, overrides: dict | None = None) -> PipelineConfig:
    """Merge defaults, config-file values, and CLI overrides, then validate."""
    merged: dict = {}
    known = {f.name for f in dataclasses.fields(PipelineConfig)}
    for source in (file_values or {}), (overrides or {}):
        for key, value in source.items():
            if value is None:
                continue
            if key not in known:
                raise ConfigError(f"unknown config key '{key}'")
            merged[key] = value
    for key in _PATH_KEYS:
        if key in merged:
            merged[key] = Path(merged[key])
    if "input_dir" not in merged:
        raise ConfigError("input_dir is required")
    if "output_dir" not in merged:
        raise ConfigError("output_dir is required")
    cfg = PipelineConfig(**merged)
    cfg.validate()
    return cfg
