from typing import Any, Optional

from pydantic import BaseModel, Field, field_validator

from app.schemas.provenance import ProvenanceRecord

BOUNDARY_MARKER = "▁"


class ModelMetadata(BaseModel):
    """Schema for tokenizer metadata stored next to a TFV1 file."""
    name: str = ""
    languages: list[str] = Field(default_factory=list)
    boundary_marker: str = Field(default=BOUNDARY_MARKER, description="Word-boundary marker character")
    add_dummy_prefix: bool = Field(default=True, description="Prepend one marker to non-empty input")
    normalization: str = Field(default="none", description="Normalization applied before segmentation")
    provenance: Optional[ProvenanceRecord] = None
    notes: dict[str, Any] = Field(default_factory=dict)

    @field_validator("boundary_marker")
    @classmethod
    def single_character(cls, value: str) -> str:
        if len(value) != 1:
            raise ValueError("boundary marker must be exactly one character")
        return value
