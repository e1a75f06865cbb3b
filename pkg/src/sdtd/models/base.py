"""Base model class and common functionality for sdtd models.

This module provides the foundational SdtdModel class that serves as the base
for every configuration and record model in the toolkit. It establishes the
common patterns for validation, serialization and copying with overrides.
"""

from typing import Any, Dict, TypeVar

from pydantic import BaseModel, ConfigDict

M = TypeVar("M", bound="SdtdModel")


class SdtdModel(BaseModel):
    """Base model for all sdtd configuration and record models.

    Configuration:
    - use_enum_values: Enums are stored as their string values, so a field
      compares equal to the corresponding ``str`` enum member
    - validate_assignment: Validates fields when assigned after creation
    - extra="forbid": Rejects any fields not defined in the model, which
      catches typos in config files
    - strict=True: Strict type checking for values built in code. Text-based
      inputs (config files, CLI overrides) go through :meth:`from_dict`,
      which validates in lax mode.

    Example:
        >>> from sdtd.models.configs import Tvl1Params
        >>> params = Tvl1Params(warps=3)
        >>> restored = Tvl1Params.from_json(params.to_json())
    """

    model_config = ConfigDict(
        use_enum_values=True,
        validate_assignment=True,
        extra="forbid",
        arbitrary_types_allowed=False,
        strict=True,
        populate_by_name=True,
    )

    def to_dict(self) -> Dict[str, Any]:
        """Convert model to a JSON-compatible dictionary.

        Field aliases are used as keys so the result can be fed back to
        :meth:`from_dict`.

        Returns:
            Dict[str, Any]: Dictionary representation of the model
        """
        return self.model_dump(mode="json", by_alias=True)

    def to_json(self) -> str:
        """Convert model to a compact JSON string."""
        return self.model_dump_json(by_alias=True)

    @classmethod
    def from_dict(cls: type[M], data: Dict[str, Any]) -> M:
        """Create a model instance from a JSON-compatible dictionary.

        The dictionary may come from :meth:`to_dict` or from a parsed file,
        so validation runs in lax mode (lists become tuples, strings become
        enum members).

        Args:
            data: Dictionary keyed by field name or alias

        Returns:
            New validated model instance

        Raises:
            pydantic.ValidationError: If the data doesn't conform to the schema
        """
        return cls.model_validate(data, strict=False)

    @classmethod
    def from_json(cls: type[M], json_str: str) -> M:
        """Create a model instance from a JSON string."""
        return cls.model_validate_json(json_str, strict=False)

    def with_updates(self: M, **updates: Any) -> M:
        """Return a validated copy with some fields replaced.

        Unlike ``model_copy(update=...)`` the result is re-validated, so an
        invalid override raises instead of producing an inconsistent model.

        Args:
            **updates: Field values to replace

        Returns:
            New validated model instance
        """
        data = self.model_dump(by_alias=False)
        data.update(updates)
        return type(self).model_validate(data, strict=False)
