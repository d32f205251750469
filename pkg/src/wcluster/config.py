"""Pipeline configuration: one validated record for every tunable scale.

Values can come from a flat ``key = value`` config file, command-line flags
(which win), or defaults. Validation rejects exactly the complements of the
documented bounds.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Optional

from .clustering import ClusterParams
from .errors import ConfigError
from .frame_io import FOV_PRESETS
from .preprocess import DepthRange

DEFAULT_DEPTH_RANGE = (0.5, 4.5)
THREADS_ENV_VAR = "WCLUSTER_THREADS"


@dataclass
class PipelineConfig:
    """All knobs of the processing pipeline in one place."""

    k: int = 5
    alpha: float = 0.01
    pos_scale: Optional[float] = None   # None: 1 - alpha
    gamma: float = 0.001
    psi: float = 1.0
    inner_iters: int = 1
    depth_min: float = DEFAULT_DEPTH_RANGE[0]
    depth_max: float = DEFAULT_DEPTH_RANGE[1]
    stride: int = 1
    fov_preset: Optional[str] = None    # None: take fov from the dataset manifest
    fov_x: Optional[float] = None       # explicit radians override the preset
    fov_y: Optional[float] = None
    rng_seed: int = 0
    threads: int = field(default_factory=lambda: _default_threads())
    freeze_centroids: bool = False
    legacy_y_scale: bool = False
    pre_aligned: Optional[bool] = None  # None: trust the manifest

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        # ClusterParams enforces the clustering bounds
        self.cluster_params()
        if self.stride < 1:
            raise ConfigError(f"stride must be >= 1, got {self.stride}")
        if not 0.0 <= self.depth_min < self.depth_max:
            raise ConfigError(
                f"depth range needs 0 <= min < max, got "
                f"[{self.depth_min}, {self.depth_max}]")
        if self.fov_preset is not None and self.fov_preset not in FOV_PRESETS:
            raise ConfigError(f"unknown fov preset {self.fov_preset!r}, expected "
                              f"one of {sorted(FOV_PRESETS)}")
        if self.threads < 1:
            raise ConfigError(f"threads must be >= 1, got {self.threads}")

    def cluster_params(self) -> ClusterParams:
        return ClusterParams(k=self.k, alpha=self.alpha, pos_scale=self.pos_scale,
                             gamma=self.gamma, psi=self.psi,
                             inner_iters=self.inner_iters)

    def depth_range(self) -> DepthRange:
        return DepthRange(self.depth_min, self.depth_max)

    def resolve_fov(self, default: tuple[float, float] = FOV_PRESETS["kinect-v2"],
                    ) -> tuple[float, float]:
        """Field of view in radians: explicit values win, then the preset,
        then ``default`` (normally the values recorded in the manifest)."""
        base_x, base_y = (FOV_PRESETS[self.fov_preset]
                          if self.fov_preset is not None else default)
        return (self.fov_x if self.fov_x is not None else base_x,
                self.fov_y if self.fov_y is not None else base_y)


def _default_threads() -> int:
    raw = os.environ.get(THREADS_ENV_VAR)
    if raw is None:
        return 1
    try:
        return max(int(raw), 1)
    except ValueError:
        raise ConfigError(f"{THREADS_ENV_VAR} must be an integer, got {raw!r}")


_BOOL_FIELDS = {"freeze_centroids", "legacy_y_scale", "pre_aligned"}
_INT_FIELDS = {"k", "inner_iters", "stride", "rng_seed", "threads"}
_FLOAT_FIELDS = {"alpha", "pos_scale", "gamma", "psi", "depth_min", "depth_max",
                 "fov_x", "fov_y"}
_STR_FIELDS = {"fov_preset"}


def parse_bool(raw: str) -> bool:
    low = raw.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {raw!r}")


def read_config_file(path: Path | str) -> dict:
    """Parse a flat ``key = value`` config file into a PipelineConfig kwargs dict."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    known = {f.name for f in fields(PipelineConfig)}
    out: dict = {}
    for lineno, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
        key, _, value = line.partition("=")
        key, value = key.strip().replace("-", "_"), value.strip()
        if key not in known:
            raise ConfigError(f"{path}:{lineno}: unknown config key {key!r}")
        try:
            if key in _BOOL_FIELDS:
                out[key] = parse_bool(value)
            elif key in _INT_FIELDS:
                out[key] = int(value)
            elif key in _FLOAT_FIELDS:
                out[key] = float(value)
            else:
                out[key] = value
        except ValueError as exc:
            raise ConfigError(f"{path}:{lineno}: bad value for {key}: {exc}") from None
    return out


def build_config(file_values: Optional[dict] = None,
                 overrides: Optional[dict] = None) -> PipelineConfig:
    """Merge config-file values with overrides (overrides win) and validate."""
    merged: dict = {}
    if file_values:
        merged.update(file_values)
    if overrides:
        merged.update({k: v for k, v in overrides.items() if v is not None})
    return PipelineConfig(**merged)
