"""Pipeline and run configuration.

Every numeric constant used by segmentation, filtering, balancing, assembly
and evaluation lives in one record so a run can be audited from its config
alone. Defaults are the production values; anything can be overridden from
a JSON or TOML file.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError
from .fsio import atomic_write_text

RARE_LETTERS = ("ф", "ґ", "Щ", "Є", "Ц", "ї")

DEFAULT_RARE_FACTOR = 3


def _default_factors() -> dict[str, int]:
    return {ch: DEFAULT_RARE_FACTOR for ch in RARE_LETTERS}


@dataclass
class PipelineConfig:
    # segmentation
    merge_px: int = 8
    boundary_tol_px: int = 5
    crop_margin_px: int = 2
    projection_min_gap_px: int = 8
    projection_use_word_count: bool = False
    auto_invert: bool = True
    # filtering
    min_width_px: int = 20
    max_height_px: int = 100
    ocr_threshold_long: float = 0.4
    ocr_threshold_mid: float = 0.2
    short_len_max: int = 3
    mid_len_max: int = 5
    min_writer_samples: int = 50
    # balancing
    rare_letters: tuple[str, ...] = RARE_LETTERS
    oversample_factor_min: int = 2
    oversample_factor_max: int = 5
    rare_letter_factors: dict[str, int] = field(default_factory=_default_factors)
    # assembly
    body_span_frac: float = 0.35
    brightness_pct: float = 5.0
    punct_bank_size: int = 500
    word_gap_frac: float = 0.4
    punct_gap_frac: float = 0.5
    punct_scale: float = 0.25
    canvas_height: int = 64
    canvas_width: int = 256
    # metrics
    unbiased_covariance: bool = True

    def __post_init__(self):
        self.rare_letters = tuple(self.rare_letters)
        for ch, f in self.rare_letter_factors.items():
            if not (self.oversample_factor_min <= f <= self.oversample_factor_max):
                raise ConfigError(
                    f"oversample factor {f} for {ch!r} outside "
                    f"[{self.oversample_factor_min}, {self.oversample_factor_max}]"
                )
        if self.merge_px < 0:
            raise ConfigError("merge_px must be >= 0")
        if self.boundary_tol_px < 0:
            raise ConfigError("boundary_tol_px must be >= 0")
        if not (0 < self.brightness_pct < 50):
            raise ConfigError("brightness_pct must be in (0, 50)")
        if not (0 < self.body_span_frac <= 1):
            raise ConfigError("body_span_frac must be in (0, 1]")


@dataclass
class RunConfig:
    """PipelineConfig plus per-run execution settings."""

    pipeline: PipelineConfig = field(default_factory=PipelineConfig)
    seed: int = 0
    jobs: int = 1
    ocr_backend: str = "echo"  # file | http | echo
    ocr_endpoint: str = ""
    ocr_table: str = ""
    ocr_timeout_s: float = 10.0
    ocr_retries: int = 2
    log_level: str = "INFO"
    input: str = ""
    output: str = ""

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["pipeline"]["rare_letters"] = list(self.pipeline.rare_letters)
        return d


def config_hash(cfg: PipelineConfig) -> str:
    """Stable short hash of the pipeline constants, recorded in every output."""
    d = dataclasses.asdict(cfg)
    d["rare_letters"] = list(cfg.rare_letters)
    blob = json.dumps(d, sort_keys=True, ensure_ascii=False).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()[:12]


def _load_raw(path: Path) -> dict:
    if path.suffix.lower() == ".toml":
        try:
            import tomllib  # py >= 3.11
        except ImportError:
            import tomli as tomllib
        with open(path, "rb") as f:
            return tomllib.load(f)
    with open(path, "r", encoding="utf-8") as f:
        return json.load(f)


def load_run_config(path: str | Path | None = None) -> RunConfig:
    """Build a RunConfig from defaults, optionally overridden by a config file.

    Unknown keys are rejected so typos cannot silently fall back to defaults.
    """
    if path is None:
        return RunConfig()
    raw = _load_raw(Path(path))
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: config root must be an object")
    pipe_raw = raw.pop("pipeline", {})
    run_fields = {f.name for f in dataclasses.fields(RunConfig)} - {"pipeline"}
    pipe_fields = {f.name for f in dataclasses.fields(PipelineConfig)}
    unknown = set(raw) - run_fields
    if unknown:
        raise ConfigError(f"{path}: unknown run config keys {sorted(unknown)}")
    unknown = set(pipe_raw) - pipe_fields
    if unknown:
        raise ConfigError(f"{path}: unknown pipeline config keys {sorted(unknown)}")
    try:
        pipeline = PipelineConfig(**pipe_raw)
        return RunConfig(pipeline=pipeline, **raw)
    except TypeError as e:
        raise ConfigError(f"{path}: {e}") from e


def save_run_config(cfg: RunConfig, path: str | Path) -> None:
    text = json.dumps(cfg.to_dict(), ensure_ascii=False, indent=2, sort_keys=True)
    atomic_write_text(path, text + "\n")
