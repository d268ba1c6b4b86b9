"""Configuration management for the CXR pre-processing pipeline."""

import hashlib
import json
from enum import Enum
from pathlib import Path
from typing import Any
from typing import Literal
from typing import Optional

import yaml
from pydantic import BaseModel
from pydantic import ConfigDict
from pydantic import Field
from pydantic import ValidationError
from pydantic import model_validator
from pydantic_settings import BaseSettings
from pydantic_settings import SettingsConfigDict

from cxr_preproc.augment import AugConfig
from cxr_preproc.dataset import PreprocessConfig
from cxr_preproc.dataset import SplitConfig
from cxr_preproc.dataset import Variant
from cxr_preproc.errors import ConfigurationError
from cxr_preproc.model import ModelConfig
from cxr_preproc.model import TrainConfig

CONFIG_VERSION = 1
MAX_ENSEMBLE_MEMBERS = 100


class Settings(BaseSettings):
    """Runtime settings read from the environment."""

    log_level: str = Field(default="INFO", description="Logging level")
    log_format: str = Field(default="text", description="Logging format (json or text)")
    cache_dir: Optional[Path] = Field(
        default=None,
        description="Overrides paths.cache_dir of the pipeline config",
    )
    workers: int = Field(default=1, ge=1, description="Default worker processes")
    environment: str = Field(default="development", description="Environment name")

    model_config = SettingsConfigDict(
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        env_prefix="CXR_PREPROC_",
    )


def get_settings() -> Settings:
    """Get application settings instance."""
    return Settings()


# Global settings instance
settings = get_settings()


class Experiment(str, Enum):
    """The six experiments of the protocol."""

    NORMAL = "normal"
    BS = "bs"
    LUNG = "lung"
    BS_LUNG = "bs_lung"
    EN_NORMAL = "en_normal"
    EN_PREPROCESSED = "en_preprocessed"


SINGLE_EXPERIMENT_VARIANTS: dict[Experiment, Variant] = {
    Experiment.NORMAL: Variant.NORMAL,
    Experiment.BS: Variant.BONE_SUPPRESSED,
    Experiment.LUNG: Variant.LUNG_CROPPED,
    Experiment.BS_LUNG: Variant.COMBINED,
}


class PathsConfig(BaseModel):
    """Filesystem locations used by a run."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    image_dir: Path
    label_file: Path
    cache_dir: Path
    output_dir: Path


class PipelineConfig(BaseModel):
    """Resolved experiment configuration."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    version: Literal[1]
    paths: PathsConfig
    preprocessing: PreprocessConfig = Field(default_factory=PreprocessConfig)
    augment: AugConfig = Field(default_factory=AugConfig)
    model: ModelConfig = Field(default_factory=ModelConfig)
    train: TrainConfig = Field(default_factory=TrainConfig)
    splits: SplitConfig = Field(default_factory=SplitConfig)
    experiments: tuple[Experiment, ...] = tuple(Experiment)
    en_normal_members: int = Field(default=4, ge=2, le=MAX_ENSEMBLE_MEMBERS)

    @model_validator(mode="after")
    def _check_consistency(self) -> "PipelineConfig":
        if not self.experiments:
            raise ValueError("experiments must not be empty")
        if len(set(self.experiments)) != len(self.experiments):
            raise ValueError("experiments must not repeat")
        if Experiment.EN_PREPROCESSED in self.experiments:
            missing = [
                e.value for e in SINGLE_EXPERIMENT_VARIANTS if e not in self.experiments
            ]
            if missing:
                raise ValueError(
                    "en_preprocessed averages the four single-variant models; "
                    f"missing experiments: {', '.join(missing)}"
                )
        if self.model.input_size != self.augment.crop_size:
            raise ValueError("model.input_size must equal augment.crop_size")
        if self.augment.train_size != self.model.input_size:
            raise ValueError("augment.train_size must equal model.input_size")
        if self.augment.crop_size > self.augment.test_size:
            raise ValueError("augment.crop_size must not exceed augment.test_size")
        return self

    def experiment_hash(self, inputs: Optional[str] = None) -> str:
        """Hash of every setting that influences trained models and reports.

        Paths are left out; pass a digest of the input files to tie the hash to
        the corpus contents instead.
        """
        payload = self.model_dump(mode="json", exclude={"paths"})
        if inputs is not None:
            payload["inputs"] = inputs
        return config_hash(payload)

    def required_variants(self) -> list[Variant]:
        """Image variants that the selected experiments train on."""
        variants: set[Variant] = set()
        for experiment in self.experiments:
            if experiment in SINGLE_EXPERIMENT_VARIANTS:
                variants.add(SINGLE_EXPERIMENT_VARIANTS[experiment])
            elif experiment is Experiment.EN_NORMAL:
                variants.add(Variant.NORMAL)
            else:
                variants.update(SINGLE_EXPERIMENT_VARIANTS.values())
        return [v for v in Variant if v in variants]

    def validate_paths(self) -> None:
        """Check that the input paths exist.

        Raises:
            ConfigurationError: If the image directory or label file is missing
        """
        if not self.paths.image_dir.is_dir():
            raise ConfigurationError(f"Image directory not found: {self.paths.image_dir}")
        if not self.paths.label_file.is_file():
            raise ConfigurationError(f"Label file not found: {self.paths.label_file}")

    def to_yaml(self) -> str:
        """Serialize the resolved configuration."""
        return yaml.safe_dump(self.model_dump(mode="json"), sort_keys=False)


def config_hash(payload: Any) -> str:
    """SHA-256 of the canonical JSON form of a configuration payload."""
    if isinstance(payload, BaseModel):
        payload = payload.model_dump(mode="json")
    canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def parse_pipeline_config(
    raw: dict[str, Any], runtime: Optional[Settings] = None
) -> PipelineConfig:
    """Build a PipelineConfig from a parsed mapping.

    Relative paths are kept as given; the cache root can be overridden through
    the environment.

    Args:
        raw: Mapping as read from the YAML file
        runtime: Settings providing the cache override (defaults to global)

    Returns:
        Validated pipeline configuration

    Raises:
        ConfigurationError: If the mapping violates the schema
    """
    runtime = runtime or settings
    if not isinstance(raw, dict):
        raise ConfigurationError("Configuration must be a mapping")
    if raw.get("version") != CONFIG_VERSION:
        raise ConfigurationError(
            f"Unsupported config version {raw.get('version')!r}, expected {CONFIG_VERSION}"
        )
    if runtime.cache_dir is not None:
        paths = dict(raw.get("paths") or {})
        paths["cache_dir"] = str(runtime.cache_dir)
        raw = {**raw, "paths": paths}
    try:
        return PipelineConfig.model_validate(raw)
    except ValidationError as e:
        raise ConfigurationError(f"Invalid configuration: {e}") from e


def load_pipeline_config(path: Path, runtime: Optional[Settings] = None) -> PipelineConfig:
    """Load and validate a pipeline config file.

    Args:
        path: YAML config path
        runtime: Settings providing the cache override

    Returns:
        Validated pipeline configuration

    Raises:
        ConfigurationError: If the file is unreadable or invalid
    """
    try:
        raw = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
    except (OSError, yaml.YAMLError) as e:
        raise ConfigurationError(f"Cannot read config {path}: {e}") from e
    return parse_pipeline_config(raw, runtime)
