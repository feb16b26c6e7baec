"""YAML-based experiment configuration."""

import copy
import hashlib
import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Literal, Mapping, Optional, Tuple

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from swformer.errors import ConfigError, InputNotFoundError

logger = logging.getLogger(__name__)

VARIANTS: Tuple[str, ...] = ("small", "medium", "large")
VARIANT_ALIASES = {"s": "small", "m": "medium", "l": "large"}

# Pyramid level emitted by each exit: small stops after stage 3 (quarter scale).
EXIT_LEVELS = {"small": 2, "medium": 1, "large": 0}

BANDS: Tuple[str, ...] = ("LL", "LH", "HL", "HH")

DEGRADATION_DEFAULTS: Dict[str, Dict[str, float]] = {
    "rain_streaks": {"count": 60, "angle": -15.0, "length": 9, "intensity": 0.35, "width": 1},
    "haze": {"t_min": 0.4, "t_max": 0.9, "airlight": 0.9},
    "gaussian_blur": {"sigma": 1.5},
    "low_light": {"gamma": 2.2, "noise_sigma": 0.02},
    "snow": {"count": 80, "radius_min": 0.6, "radius_max": 2.0, "opacity": 0.85, "blur_sigma": 0.6},
}


def normalize_variant(value: str) -> str:
    """Map ``s``/``m``/``l`` onto the long variant names."""
    name = VARIANT_ALIASES.get(str(value).lower(), str(value).lower())
    if name not in VARIANTS:
        raise ValueError(f"Unknown variant: {value} (expected one of s, m, l, {', '.join(VARIANTS)})")
    return name


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", protected_namespaces=())


class BranchToggles(_Section):
    """Which token-mixer branches are built."""
    spatial: bool = True
    wavelet: bool = True
    fourier: bool = True

    @model_validator(mode="after")
    def check_any_enabled(self) -> "BranchToggles":
        if not (self.spatial or self.wavelet or self.fourier):
            raise ValueError("At least one mixer branch must stay enabled")
        return self

    def enabled(self) -> List[str]:
        return [name for name in ("spatial", "wavelet", "fourier") if getattr(self, name)]


class ModelConfig(_Section):
    """Network shape. Parameter count is a pure function of these fields."""
    in_channels: int = Field(default=3, ge=1)
    base_width: int = Field(default=16, ge=4)
    blocks_per_stage: List[int] = Field(default_factory=lambda: [2, 2, 2, 2, 2])
    variant: Literal["small", "medium", "large"] = "large"
    io_mode: Literal["siso", "mimo", "lmimo"] = "lmimo"
    branches: BranchToggles = Field(default_factory=BranchToggles)
    fourier_product: Literal["gated", "literal"] = "gated"
    ca_reduction: int = Field(default=4, ge=1)
    msfn_remainder: Literal["scale1"] = "scale1"
    padding: Literal["reflect"] = "reflect"
    encoder_depth: int = Field(default=2, ge=1, le=4)
    residual_scale: bool = False
    zero_init_heads: bool = False
    init_seed: int = Field(default=0, ge=0)

    @field_validator("variant", mode="before")
    @classmethod
    def validate_variant(cls, v: Any) -> str:
        return normalize_variant(v)

    @field_validator("blocks_per_stage")
    @classmethod
    def validate_blocks(cls, v: List[int]) -> List[int]:
        if len(v) != 5:
            raise ValueError(f"blocks_per_stage needs 5 entries, got {len(v)}")
        if any(n < 1 for n in v):
            raise ValueError(f"every stage needs at least one block: {v}")
        return v

    @field_validator("base_width")
    @classmethod
    def validate_width(cls, v: int) -> int:
        if v % 4:
            raise ValueError(f"base_width must be divisible by 4, got {v}")
        return v

    @model_validator(mode="after")
    def check_siso_variant(self) -> "ModelConfig":
        if self.io_mode == "siso" and self.variant != "large":
            raise ValueError("siso has a single full-scale exit; variant must be large")
        return self

    @property
    def exit_levels(self) -> List[int]:
        """Pyramid levels produced by the built network, coarse first."""
        if self.io_mode == "siso":
            return [0]
        return [EXIT_LEVELS[v] for v in VARIANTS[: VARIANTS.index(self.variant) + 1]]

    @classmethod
    def preset(cls, name: str, **overrides: Any) -> "ModelConfig":
        """Named sizes: ``tiny`` for tests, ``desk`` (default) and ``wide``."""
        presets = {
            "tiny": {"base_width": 8, "blocks_per_stage": [1, 1, 1, 1, 1]},
            "desk": {"base_width": 16, "blocks_per_stage": [2, 2, 2, 2, 2]},
            "wide": {"base_width": 32, "blocks_per_stage": [2, 3, 4, 3, 2]},
        }
        if name not in presets:
            raise ConfigError(f"Unknown model preset: {name}")
        return cls(**{**presets[name], **overrides})


class LossConfig(_Section):
    """Weights of the spatial, wavelet and Fourier L1 terms."""
    lambda_fourier: float = Field(default=0.1, ge=0.0)
    scale_weights: List[float] = Field(default_factory=lambda: [1.0, 1.0, 1.0])
    reduction: Literal["mean"] = "mean"
    spatial_term: bool = True
    wavelet_term: bool = True
    fourier_term: bool = True

    @field_validator("scale_weights")
    @classmethod
    def validate_scale_weights(cls, v: List[float]) -> List[float]:
        if len(v) != 3 or any(w < 0 for w in v):
            raise ValueError(f"scale_weights needs 3 non-negative entries, got {v}")
        return v

    @model_validator(mode="after")
    def check_any_term(self) -> "LossConfig":
        if not (self.spatial_term or self.wavelet_term or self.fourier_term):
            raise ValueError("At least one loss term must stay enabled")
        return self


class OptimConfig(_Section):
    """AdamW hyper-parameters."""
    beta1: float = Field(default=0.9, gt=0.0, lt=1.0)
    beta2: float = Field(default=0.999, gt=0.0, lt=1.0)
    eps: float = Field(default=1e-8, gt=0.0)
    weight_decay: float = Field(default=0.0, ge=0.0)


class Schedule(_Section):
    """Cosine annealing from ``lr_init`` down to ``lr_min`` over ``total_steps``."""
    lr_init: float = Field(default=1e-3, gt=0.0)
    lr_min: float = Field(default=1e-6, ge=0.0)
    total_steps: Optional[int] = Field(default=None, ge=0)

    @model_validator(mode="after")
    def check_order(self) -> "Schedule":
        if self.lr_min > self.lr_init:
            raise ValueError(f"lr_min ({self.lr_min}) exceeds lr_init ({self.lr_init})")
        return self


class TrainConfig(_Section):
    """Training loop settings."""
    steps: int = Field(default=2000, ge=0)
    batch_size: int = Field(default=4, ge=1)
    patch_size: int = Field(default=64, ge=8)
    seed: int = Field(default=0, ge=0)
    clip_grad_norm: Optional[float] = Field(default=None, gt=0.0)
    checkpoint_every: int = Field(default=0, ge=0)
    log_every: int = Field(default=10, ge=1)
    resume_from: Optional[str] = None


class DegradationSpec(_Section):
    """One synthetic degradation; unset parameters take the kind's defaults."""
    kind: Literal["rain_streaks", "haze", "gaussian_blur", "low_light", "snow"]
    params: Dict[str, float] = Field(default_factory=dict)
    seed: int = Field(default=0, ge=0, lt=2**64)

    @model_validator(mode="after")
    def check_param_names(self) -> "DegradationSpec":
        unknown = set(self.params) - set(DEGRADATION_DEFAULTS[self.kind])
        if unknown:
            raise ValueError(f"Unknown {self.kind} parameters: {', '.join(sorted(unknown))}")
        return self

    def resolved(self) -> Dict[str, float]:
        return {**DEGRADATION_DEFAULTS[self.kind], **self.params}


class DataConfig(_Section):
    """Where training pairs come from."""
    source: Literal["synthetic", "folder"] = "synthetic"
    root: Optional[str] = None
    n_images: int = Field(default=8, ge=1)
    image_size: int = Field(default=64, ge=8)
    degradations: List[DegradationSpec] = Field(
        default_factory=lambda: [DegradationSpec(kind="rain_streaks")]
    )
    seed: int = Field(default=0, ge=0)

    @model_validator(mode="after")
    def check_root(self) -> "DataConfig":
        if self.source == "folder" and not self.root:
            raise ValueError("data.root is required when data.source is folder")
        if not self.degradations:
            raise ValueError("data.degradations must name at least one degradation")
        return self


class EvalConfig(_Section):
    """Metric evaluation inputs."""
    restored_dir: Optional[str] = None
    reference_dir: Optional[str] = None
    degraded_dir: Optional[str] = None
    checkpoint: Optional[str] = None
    y_channel: bool = False
    report_name: str = "metrics.jsonl"


class InferConfig(_Section):
    """Batch restoration inputs."""
    input_dir: Optional[str] = None
    checkpoint: Optional[str] = None


class AnalysisConfig(_Section):
    """Degradation analysis inputs."""
    clean_dir: Optional[str] = None
    degraded_dir: Optional[str] = None
    swap_bands: List[str] = Field(default_factory=lambda: ["LL"])

    @field_validator("swap_bands")
    @classmethod
    def validate_bands(cls, v: List[str]) -> List[str]:
        bands = [b.upper() for b in v]
        unknown = [b for b in bands if b not in BANDS]
        if unknown:
            raise ValueError(f"Unknown sub-bands: {unknown}")
        return bands


class GradCheckConfig(_Section):
    """Finite-difference verification settings."""
    tol: float = Field(default=1e-3, ge=0.0)
    step: float = Field(default=1e-4, gt=0.0)
    image_size: int = Field(default=16, ge=8)
    max_elements: int = Field(default=16, ge=1)


class SWFormerConfig(_Section):
    """Complete experiment configuration."""
    model: ModelConfig = Field(default_factory=ModelConfig)
    loss: LossConfig = Field(default_factory=LossConfig)
    optim: OptimConfig = Field(default_factory=OptimConfig)
    schedule: Schedule = Field(default_factory=Schedule)
    train: TrainConfig = Field(default_factory=TrainConfig)
    data: DataConfig = Field(default_factory=DataConfig)
    eval: EvalConfig = Field(default_factory=EvalConfig)
    infer: InferConfig = Field(default_factory=InferConfig)
    analysis: AnalysisConfig = Field(default_factory=AnalysisConfig)
    gradcheck: GradCheckConfig = Field(default_factory=GradCheckConfig)

    @classmethod
    def from_dict(cls, data: Optional[Mapping[str, Any]]) -> "SWFormerConfig":
        """Build from nested sections, flat dotted keys, or a mix of both."""
        try:
            return cls.model_validate(_nest(data or {}))
        except ValidationError as e:
            raise ConfigError(f"Invalid configuration: {e}") from e

    @classmethod
    def from_yaml(cls, config_path: Path) -> "SWFormerConfig":
        """Load configuration from a YAML file.

        Args:
            config_path: Path to YAML configuration file

        Returns:
            SWFormerConfig instance
        """
        config_path = Path(config_path)
        if not config_path.exists():
            raise InputNotFoundError(config_path, "configuration file")

        with open(config_path, "r", encoding="utf-8") as f:
            try:
                config_data = yaml.safe_load(f)
            except yaml.YAMLError as e:
                raise ConfigError(f"Cannot parse {config_path}: {e}") from e

        if config_data is not None and not isinstance(config_data, dict):
            raise ConfigError(f"{config_path} must hold a mapping at top level")

        logger.info("Loaded configuration from %s", config_path)
        return cls.from_dict(config_data)

    def to_yaml(self, config_path: Path) -> None:
        """Save configuration to a YAML file."""
        config_data = self.model_dump(mode="json")

        with open(config_path, "w", encoding="utf-8") as f:
            yaml.dump(config_data, f, default_flow_style=False, sort_keys=False, indent=2)

    def apply_overrides(self, overrides: Mapping[str, str]) -> "SWFormerConfig":
        """Merge ``section.key=value`` overrides; overrides win.

        Values are coerced to the type of the field they replace.

        Returns:
            New SWFormerConfig instance with merged values
        """
        config_dict = self.model_dump(mode="json")

        for key, raw in overrides.items():
            parts = key.split(".")
            current: Any = config_dict
            for part in parts[:-1]:
                if not isinstance(current, dict) or part not in current:
                    raise ConfigError(f"Unknown configuration key: {key}")
                current = current[part]
            final_key = parts[-1]
            if not isinstance(current, dict) or final_key not in current:
                raise ConfigError(f"Unknown configuration key: {key}")
            current[final_key] = _coerce(current[final_key], raw, key)
            logger.debug("Override %s=%r", key, current[final_key])

        return SWFormerConfig.from_dict(config_dict)

    def resolved_schedule(self) -> Schedule:
        """Schedule whose horizon defaults to the training step count."""
        if self.schedule.total_steps is not None:
            return self.schedule
        return self.schedule.model_copy(update={"total_steps": self.train.steps})

    def canonical_json(self) -> str:
        return json.dumps(self.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))

    def sha256(self) -> str:
        """Digest of the canonical JSON form, recorded in run manifests."""
        return hashlib.sha256(self.canonical_json().encode("utf-8")).hexdigest()


def load_config(
    config_path: Optional[Path] = None,
    overrides: Optional[Mapping[str, str]] = None,
) -> SWFormerConfig:
    """File (or defaults) first, then overrides."""
    config = SWFormerConfig.from_yaml(config_path) if config_path else SWFormerConfig()
    if overrides:
        config = config.apply_overrides(overrides)
    return config


def parse_overrides(items: Optional[List[str]]) -> Dict[str, str]:
    """Turn ``["a.b=1", ...]`` into a mapping."""
    overrides: Dict[str, str] = {}
    for item in items or []:
        key, sep, value = item.partition("=")
        if not sep or not key.strip():
            raise ConfigError(f"Override must look like key=value: {item!r}")
        overrides[key.strip()] = value.strip()
    return overrides


def _nest(data: Mapping[str, Any]) -> Dict[str, Any]:
    nested: Dict[str, Any] = {}
    for key, value in data.items():
        if not isinstance(key, str):
            raise ConfigError(f"Configuration keys must be strings: {key!r}")
        parts = key.split(".")
        current = nested
        for part in parts[:-1]:
            current = current.setdefault(part, {})
            if not isinstance(current, dict):
                raise ConfigError(f"Conflicting configuration key: {key}")
        leaf = parts[-1]
        if isinstance(value, dict) and isinstance(current.get(leaf), dict):
            current[leaf].update(_nest(value))
        elif isinstance(value, dict):
            current[leaf] = _nest(value)
        else:
            current[leaf] = copy.deepcopy(value)
    return nested


def _coerce(current: Any, raw: str, key: str) -> Any:
    text = raw.strip()
    try:
        if isinstance(current, bool):
            lowered = text.lower()
            if lowered in ("true", "1", "yes", "on"):
                return True
            if lowered in ("false", "0", "no", "off"):
                return False
            raise ValueError(f"not a boolean: {raw}")
        if isinstance(current, int):
            return int(text)
        if isinstance(current, float):
            return float(text)
        if isinstance(current, list):
            if text.startswith("["):
                value = yaml.safe_load(text)
                if not isinstance(value, list):
                    raise ValueError(f"not a list: {raw}")
                return value
            items = [item.strip() for item in text.split(",") if item.strip()]
            if current and not isinstance(current[0], (dict, list)):
                return [_coerce(current[0], item, key) for item in items]
            return [yaml.safe_load(item) for item in items]
        if current is None or isinstance(current, dict):
            return yaml.safe_load(text)
    except (ValueError, yaml.YAMLError) as e:
        raise ConfigError(f"Cannot convert {key}={raw!r}: {e}") from e
    return raw
