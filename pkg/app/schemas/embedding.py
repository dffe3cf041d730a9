import enum
from typing import Any, Optional

from pydantic import BaseModel, ConfigDict, Field

from app.schemas.provenance import ProvenanceRecord


class InitKind(str, enum.Enum):
    """How rows of added tokens are initialized."""
    RANDOM = "random"
    MEAN_ALL = "mean_all"
    NACHOS = "nachos"


class InitStrategy(BaseModel):
    """Schema for embedding initialization settings."""
    model_config = ConfigDict(frozen=True)

    kind: InitKind = InitKind.NACHOS
    rng_seed: int = 0
    random_scale: Optional[float] = Field(
        default=None, gt=0, description="Std of random rows; default is the std of existing rows"
    )


class EmbeddingMetadata(BaseModel):
    """Schema for the sidecar written next to an EMB1 file."""
    name: str = ""
    strategy: Optional[InitStrategy] = None
    provenance: Optional[ProvenanceRecord] = None
    notes: dict[str, Any] = Field(default_factory=dict)
