"""JSON serialization for sdtd records, reports and run logs."""

import dataclasses
import json
import logging
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Sequence, Union

import numpy as np

from sdtd.models.base import SdtdModel
from sdtd.models.exceptions import DataError, FormatError

logger = logging.getLogger(__name__)

# Keys that legitimately differ between two otherwise identical runs
VOLATILE_KEYS = ("timestamp", "elapsed_seconds")


class EnhancedJSONEncoder(json.JSONEncoder):
    """JSON encoder that understands the value types used across sdtd.

    Handles pydantic models (by field alias), ``str`` enums, numpy arrays
    and scalars, paths and dataclasses. Nonfinite floats are written as
    ``null`` so every emitted document is strict JSON.
    """

    def default(self, obj: Any) -> Any:
        """Convert object to JSON-serializable format.

        Args:
            obj: Object to serialize

        Returns:
            JSON-serializable representation
        """
        if isinstance(obj, SdtdModel):
            return obj.to_dict()
        if isinstance(obj, Enum):
            return obj.value
        if isinstance(obj, np.ndarray):
            return _sanitize(obj.tolist())
        if isinstance(obj, np.bool_):
            return bool(obj)
        if isinstance(obj, np.integer):
            return int(obj)
        if isinstance(obj, np.floating):
            return _finite_or_none(float(obj))
        if isinstance(obj, Path):
            return str(obj)
        if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
            return _sanitize({f.name: getattr(obj, f.name) for f in dataclasses.fields(obj)})
        return super().default(obj)

    def iterencode(self, o: Any, _one_shot: bool = False):
        return super().iterencode(_sanitize(o), _one_shot)


def _finite_or_none(value: float) -> Optional[float]:
    return value if np.isfinite(value) else None


def _sanitize(obj: Any) -> Any:
    if isinstance(obj, float):
        return _finite_or_none(obj)
    if isinstance(obj, Mapping):
        return {(k.value if isinstance(k, Enum) else str(k)): _sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_sanitize(v) for v in obj]
    return obj


def to_json(obj: Any, indent: Optional[int] = 2) -> str:
    """Serialize an object with :class:`EnhancedJSONEncoder`.

    Keys are sorted so equal inputs always give identical text.
    """
    return json.dumps(obj, cls=EnhancedJSONEncoder, indent=indent, sort_keys=True)


def save_json(obj: Any, path: Union[str, Path]) -> Path:
    """Write an object as sorted, indented JSON.

    Args:
        obj: Object to serialize
        path: Destination file; parent directories are created

    Returns:
        The written path
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(to_json(obj) + "\n", encoding="utf-8")
    logger.debug("wrote %s", path)
    return path


def load_json(path: Union[str, Path]) -> Any:
    """Read a JSON document.

    Raises:
        DataError: If the file does not exist
        FormatError: If the file is not valid JSON
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"missing file: {path}")
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON ({exc.msg})") from exc


def strip_volatile(document: Any) -> Any:
    """Drop timestamp-like keys recursively, for run-to-run comparison."""
    if isinstance(document, Mapping):
        return {k: strip_volatile(v) for k, v in document.items() if k not in VOLATILE_KEYS}
    if isinstance(document, list):
        return [strip_volatile(v) for v in document]
    return document


def build_run_log(
    command: str,
    config: Any,
    inputs: Sequence[Union[str, Path]] = (),
    outputs: Sequence[Union[str, Path]] = (),
    metrics: Optional[Mapping[str, Any]] = None,
    warnings: Sequence[str] = (),
    exit_code: int = 0,
) -> Dict[str, Any]:
    """Assemble the JSON run log written by every command.

    Args:
        command: Subcommand name
        config: Resolved :class:`~sdtd.models.pipeline.PipelineConfig`
        inputs: Input paths
        outputs: Artifact paths written by the run
        metrics: Command-specific results
        warnings: Non-fatal problems encountered
        exit_code: Process exit status

    Returns:
        Run log dictionary
    """
    return {
        "command": command,
        "config": config.to_key_values(),
        "config_hash": config.config_hash(),
        "seed": config.seed,
        "inputs": [str(p) for p in inputs],
        "outputs": [str(p) for p in outputs],
        "metrics": dict(metrics or {}),
        "warnings": list(warnings),
        "exit_code": exit_code,
        "timestamp": datetime.now(timezone.utc).isoformat(),
    }
