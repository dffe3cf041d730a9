from pathlib import Path
from typing import Optional

from pydantic import BaseModel, Field, model_validator

from app.config import get_settings
from app.exceptions import DataError
from app.schemas.embedding import InitStrategy
from app.schemas.merge import MergeConfig
from app.schemas.metrics import NewrConfig
from app.schemas.provenance import ProvenanceRecord
from app.schemas.text import NormalizationConfig
from app.schemas.trainer import TrainerConfig
from app.services.rulepack_service import RULEPACK_DIR, UnknownLanguageError


class MissingInputError(DataError):
    """Raised when a pipeline input path does not exist."""
    pass


class PipelineConfig(BaseModel):
    """
    Schema for one pipeline stage invocation.

    Validation checks that every input exists and, when a rule pack is
    needed, that the language has one.
    """
    stage: str
    language: Optional[str] = None
    rng_seed: int = 0
    inputs: dict[str, Path] = Field(default_factory=dict)
    outputs: dict[str, Path] = Field(default_factory=dict)
    normalization: Optional[NormalizationConfig] = None
    trainer: Optional[TrainerConfig] = None
    merge: Optional[MergeConfig] = None
    init: Optional[InitStrategy] = None
    newr: Optional[NewrConfig] = None
    requires_rulepack: bool = False
    data_dir: Optional[Path] = None

    @model_validator(mode="after")
    def inputs_exist(self) -> "PipelineConfig":
        for name, path in self.inputs.items():
            if not path.exists():
                raise MissingInputError(f"Input '{name}' not found: {path}")
        return self

    @model_validator(mode="after")
    def rulepack_available(self) -> "PipelineConfig":
        if self.requires_rulepack:
            if not self.language:
                raise UnknownLanguageError(f"Stage '{self.stage}' needs a language tag")
            root = (self.data_dir or Path(get_settings().DATA_DIR)) / RULEPACK_DIR
            if not (root / self.language).is_dir():
                raise UnknownLanguageError(f"No rule pack for language '{self.language}' in {root}")
        return self

    def provenance(self) -> ProvenanceRecord:
        """Provenance of the stage: its configuration and input hashes."""
        config = self.model_dump(mode="json", exclude={"outputs", "data_dir", "requires_rulepack"}, exclude_none=True)
        return ProvenanceRecord.build(self.stage, config, self.inputs)
