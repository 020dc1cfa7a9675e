"""Pipeline configuration: a flat key = value file, strictly validated.

Unknown keys are rejected. Physically meaningful values carry no defaults
and must be explicit: the rotation-angle keyword, the loss weights
lambda_adv and eta_pixel, and the checkpoint blend alpha.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, fields
from pathlib import Path

from .errors import ConfigError


def _to_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("true", "yes", "1", "on"):
        return True
    if low in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


@dataclass
class PipelineConfig:
    # header keywords
    rotation_keyword: str  # no default on purpose; observatory specific
    timestamp_keyword: str = "DATE-OBS"
    plate_scale_keyword: str = "CDELT1"
    plate_scale_check: bool = True
    # loss / blend parameters (explicit; None means "not provided")
    lambda_adv: float = None  # type: ignore[assignment]
    eta_pixel: float = None  # type: ignore[assignment]
    alpha: float = None  # type: ignore[assignment]
    # temporal alignment
    max_shift: int = 30
    align_passes: int = 3
    # feature matching / robust fit
    sift_contrast_threshold: float = 0.03
    sift_edge_ratio: float = 10.0
    match_ratio: float = 0.75
    ransac_inlier_tol: float = 2.0
    ransac_iterations: int = 1000
    seed: int = 0
    # pairing / splits
    max_pair_gap_seconds: float = 60.0
    split_train_start: str = ""
    split_train_end: str = ""
    split_test_end: str = ""
    residual_floor: float = 0.3
    manual_offset_dx: float = 0.0
    manual_offset_dy: float = 0.0
    # inference
    scale_factor: int = 0  # 0 = take from the checkpoint
    normalization_max: float = 0.0
    checkpoint: str = ""
    checkpoint_psnr: str = ""
    checkpoint_gan: str = ""
    tile_size: int = 0  # 0 = no tiling
    tile_overlap: int = 8
    # evaluation
    eval_resample: str = "none"  # none | bicubic (resample truth to SR grid)
    # spectra
    spectra_window: str = "none"
    spectra_upscale: str = "bicubic"
    # directories
    lr_dir: str = ""
    hr_dir: str = ""
    output_dir: str = ""
    workers: int = 1

    def __post_init__(self):
        if not self.rotation_keyword:
            raise ConfigError("rotation_keyword must be set explicitly")
        for name in ("lambda_adv", "eta_pixel", "alpha"):
            value = getattr(self, name)
            if value is None:
                raise ConfigError(f"{name} must be set explicitly (no default)")
            setattr(self, name, float(value))
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigError(f"alpha must be in [0, 1], got {self.alpha}")
        if self.lambda_adv < 0 or self.eta_pixel < 0:
            raise ConfigError("loss weights must be non-negative")
        if self.max_shift < 1:
            raise ConfigError(f"max_shift must be >= 1, got {self.max_shift}")
        if self.align_passes < 1:
            raise ConfigError(f"align_passes must be >= 1, got {self.align_passes}")
        if self.workers < 1:
            raise ConfigError(f"workers must be >= 1, got {self.workers}")
        if self.spectra_window not in ("none", "hann"):
            raise ConfigError(f"spectra_window must be none or hann")
        if self.spectra_upscale not in ("nearest", "bilinear", "bicubic"):
            raise ConfigError("spectra_upscale must be nearest, bilinear or bicubic")
        if self.eval_resample not in ("none", "bicubic"):
            raise ConfigError("eval_resample must be none or bicubic")
        if self.scale_factor not in (0, 1, 2, 4, 8):
            raise ConfigError(f"scale_factor must be in {{1,2,4,8}}, got {self.scale_factor}")


_FIELD_TYPES = {f.name: f.type for f in fields(PipelineConfig)}


def parse_config_text(text: str) -> PipelineConfig:
    values: dict[str, object] = {}
    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, _, raw_value = line.partition("=")
        key = key.strip()
        value = raw_value.strip()
        if key not in _FIELD_TYPES:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        ftype = _FIELD_TYPES[key]
        try:
            if ftype in ("int", int):
                values[key] = int(value)
            elif ftype in ("float", float):
                values[key] = float(value)
            elif ftype in ("bool", bool):
                values[key] = _to_bool(value)
            else:
                values[key] = value
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key}: {exc}") from exc
    try:
        return PipelineConfig(**values)  # type: ignore[arg-type]
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path: str | Path) -> PipelineConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    return parse_config_text(path.read_text())


def config_hash(config: PipelineConfig) -> str:
    """Stable digest of every field, for provenance records."""
    parts = []
    for f in sorted(fields(PipelineConfig), key=lambda f: f.name):
        parts.append(f"{f.name}={getattr(config, f.name)!r}")
    return hashlib.sha256("\n".join(parts).encode("utf-8")).hexdigest()
