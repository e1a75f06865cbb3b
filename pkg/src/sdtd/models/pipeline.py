"""PipelineConfig: the aggregate configuration and its key=value text form.

The text form is one ``section.field = value`` line per leaf setting, with
JSON literals as values (bare words are read as strings) and ``#``
comments. :meth:`PipelineConfig.to_key_values` produces exactly this form,
so a logged config can be fed back to reproduce a run.
"""

import hashlib
import json
import os
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Optional, Tuple, Union

from pydantic import Field, ValidationError, field_validator

from sdtd.models.base import SdtdModel
from sdtd.models.configs import (
    ArchitectureConfig,
    ClipSpec,
    DatasetSpec,
    EgomotionConfig,
    FlowConfig,
    FusionConfig,
    PreprocessSpec,
    TrainingConfig,
    TrajectoryConfig,
    TtiConfig,
)
from sdtd.models.exceptions import ConfigError

DATA_ROOT_ENV = "SDTD_DATA_ROOT"


class PipelineConfig(SdtdModel):
    """Every setting of a pipeline run.

    Attributes:
        seed: Global seed for data generation, RANSAC and training
        jobs: Worker processes for per-video stages
        work_dir: Root of cached per-video artifacts
        flow: Optical flow solver settings
        egomotion: Camera-motion compensation settings
        trajectory: Dense trajectory settings
        tti: Trajectory Texture image settings
        clip: Clip sampling
        preprocess: Resize and crop geometry
        architecture: CNN-RNN topology
        training: Training hyperparameters
        fusion: Late-fusion weights
        dataset: Synthetic dataset layout
    """

    seed: int = 0
    jobs: int = 1
    work_dir: str = "work"
    flow: FlowConfig = Field(default_factory=FlowConfig)
    egomotion: EgomotionConfig = Field(default_factory=EgomotionConfig)
    trajectory: TrajectoryConfig = Field(default_factory=TrajectoryConfig)
    tti: TtiConfig = Field(default_factory=TtiConfig)
    clip: ClipSpec = Field(default_factory=ClipSpec)
    preprocess: PreprocessSpec = Field(default_factory=PreprocessSpec)
    architecture: ArchitectureConfig = Field(default_factory=ArchitectureConfig)
    training: TrainingConfig = Field(default_factory=TrainingConfig)
    fusion: FusionConfig = Field(default_factory=FusionConfig)
    dataset: DatasetSpec = Field(default_factory=DatasetSpec)

    @field_validator("jobs")
    @classmethod
    def validate_jobs(cls, value: int) -> int:
        if value < 1:
            raise ValueError(f"jobs must be >= 1, got {value}")
        return value

    def to_key_values(self) -> List[str]:
        """Echo the configuration as sorted ``key=value`` lines."""
        flat = _flatten(self.to_dict())
        return [f"{key}={json.dumps(value)}" for key, value in sorted(flat.items())]

    def to_text(self) -> str:
        """Echo the configuration as the text of a config file."""
        return "\n".join(self.to_key_values()) + "\n"

    def config_hash(self) -> str:
        """SHA-256 of the echoed configuration."""
        return hashlib.sha256(self.to_text().encode("utf-8")).hexdigest()

    @classmethod
    def from_key_values(
        cls,
        lines: Iterable[str],
        base: Optional["PipelineConfig"] = None,
    ) -> "PipelineConfig":
        """Build a configuration from ``key=value`` lines.

        Args:
            lines: Config lines; blank lines and ``#`` comments are skipped
            base: Configuration the lines override (defaults when omitted)

        Returns:
            Validated configuration

        Raises:
            ConfigError: On malformed lines, unknown keys or invalid values
        """
        overrides: Dict[str, Any] = {}
        for number, raw in enumerate(lines, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"line {number}: expected key=value, got {raw.strip()!r}")
            key, value = (part.strip() for part in line.split("=", 1))
            overrides[key] = parse_value(value)
        return (base or cls()).apply_overrides(overrides)

    @classmethod
    def from_file(cls, path: Union[str, Path]) -> "PipelineConfig":
        """Load a key=value config file.

        Raises:
            ConfigError: If the file is missing or invalid
        """
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        return cls.from_key_values(path.read_text(encoding="utf-8").splitlines())

    def apply_overrides(self, overrides: Mapping[str, Any]) -> "PipelineConfig":
        """Return a copy with dotted-key overrides applied.

        Raises:
            ConfigError: On unknown keys or values failing validation
        """
        data = self.to_dict()
        known = _flatten(data)
        for key, value in overrides.items():
            if key not in known:
                raise ConfigError(f"unknown config key: {key}")
            _assign(data, key.split("."), value)
        try:
            return type(self).from_dict(data)
        except ValidationError as exc:
            raise ConfigError(f"invalid configuration: {exc}") from exc

    def resolve_path(self, path: Union[str, Path]) -> Path:
        """Prefix a relative path with ``$SDTD_DATA_ROOT`` when it is set."""
        return resolve_data_path(path)


def resolve_data_path(path: Union[str, Path]) -> Path:
    """Prefix a relative path with ``$SDTD_DATA_ROOT`` when it is set."""
    path = Path(path)
    root = os.environ.get(DATA_ROOT_ENV)
    if root and not path.is_absolute():
        return Path(root) / path
    return path


def parse_value(text: str) -> Any:
    """Parse a config value: a JSON literal, else the bare string."""
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _flatten(data: Mapping[str, Any], prefix: str = "") -> Dict[str, Any]:
    flat: Dict[str, Any] = {}
    for key, value in data.items():
        dotted = f"{prefix}{key}"
        if isinstance(value, Mapping):
            flat.update(_flatten(value, dotted + "."))
        else:
            flat[dotted] = value
    return flat


def _assign(data: Dict[str, Any], path: List[str], value: Any) -> None:
    node = data
    for part in path[:-1]:
        node = node[part]
    node[path[-1]] = value


def split_override(token: str) -> Tuple[str, str]:
    """Split a ``--key=value`` command-line token into key and raw value.

    Raises:
        ConfigError: If the token is not of that form
    """
    if not token.startswith("--") or "=" not in token:
        raise ConfigError(f"unrecognized argument: {token}")
    key, value = token[2:].split("=", 1)
    return key, value
