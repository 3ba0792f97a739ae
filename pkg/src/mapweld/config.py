"""Pipeline configuration: TOML file plus CLI flag overrides (flags win)."""

from __future__ import annotations

import sys
from dataclasses import dataclass, field
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .conflate import MatchParams
from .errors import ConfigError

# config keys that name input files, with whether they are required
_INPUT_KEYS = {
    "vector_map": True,
    "osm": False,
    "slam_trajectory": False,
    "gnss_trajectory": False,
    "point_cloud": False,
    "control_points": False,
    "labels": False,
    "mapping_table": False,
}


@dataclass
class PipelineConfig:
    vector_map: Path | None = None
    point_cloud: Path | None = None
    osm: Path | None = None
    slam_trajectory: Path | None = None
    gnss_trajectory: Path | None = None
    control_points: Path | None = None
    labels: Path | None = None
    mapping_table: Path | None = None

    buffer_init: float = 5.0
    buffer_growth: float = 1.5
    score_threshold: float = 0.6
    classification_threshold: float = 0.8
    length_threshold: float = 1.5
    weights: tuple = (0.25, 0.25, 0.25, 0.25)

    overwrite_attrs: bool = False
    apply_fragment_removal: bool = True
    out_dir: Path = field(default_factory=lambda: Path("out"))

    def match_params(self) -> MatchParams:
        try:
            return MatchParams(
                buffer_init=self.buffer_init,
                buffer_growth=self.buffer_growth,
                weights=tuple(self.weights),
                accept_threshold=self.score_threshold,
                classification_threshold=self.classification_threshold,
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def validate(self, require: tuple[str, ...] = ()):
        for key in require:
            if getattr(self, key) is None:
                raise ConfigError(f"missing required input {key!r}")
        for key in _INPUT_KEYS:
            path = getattr(self, key)
            if path is not None and not Path(path).exists():
                raise ConfigError(f"{key} file does not exist: {path}")
        if self.length_threshold < 0 or self.score_threshold <= 0:
            raise ConfigError("thresholds must be positive")
        if abs(sum(self.weights) - 1.0) > 1e-9:
            raise ConfigError(f"similarity weights must sum to 1, "
                              f"got {list(self.weights)}")


def load_config(path: str | Path | None, overrides: dict | None = None,
                ) -> PipelineConfig:
    """Read the TOML config, then apply non-None CLI overrides on top."""
    cfg = PipelineConfig()
    if path is not None:
        try:
            with open(path, "rb") as fh:
                doc = tomllib.load(fh)
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"bad config file {path}: {exc}") from exc
        base = Path(path).parent
        inputs = doc.get("inputs", {})
        for key in _INPUT_KEYS:
            if key in inputs:
                setattr(cfg, key, base / inputs[key])
        matching = doc.get("matching", {})
        for key in ("buffer_init", "buffer_growth", "score_threshold",
                    "classification_threshold", "length_threshold"):
            if key in matching:
                setattr(cfg, key, float(matching[key]))
        if "weights" in matching:
            cfg.weights = tuple(float(w) for w in matching["weights"])
        output = doc.get("output", {})
        if "directory" in output:
            cfg.out_dir = base / output["directory"]
        for key in ("overwrite_attrs", "apply_fragment_removal"):
            if key in output:
                setattr(cfg, key, bool(output[key]))
        unknown = set(doc) - {"inputs", "matching", "output"}
        if unknown:
            raise ConfigError(f"unknown config sections {sorted(unknown)}")

    for key, value in (overrides or {}).items():
        if value is not None:
            setattr(cfg, key, value)
    return cfg
