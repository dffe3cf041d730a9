import enum
from typing import Optional

from pydantic import BaseModel, ConfigDict, Field


class OverlapScope(str, enum.Enum):
    """Which shared pieces take their score from the target tokenizer."""
    NON_ASCII_ONLY = "non_ascii_only"
    ALL = "all"


class EvictionOrder(str, enum.Enum):
    """Order in which non-English pieces give up their ids."""
    ASCENDING_SCORE = "ascending_score"
    LONGEST_FIRST = "longest_first"


class Disposition(str, enum.Enum):
    """What the merge did with one id of the original tokenizer."""
    KEPT_ENGLISH = "kept_english"
    KEPT_SERVICE = "kept_service"
    RETAINED = "retained"
    OVERLAPPED = "overlapped"
    REPLACED = "replaced"


class MergeConfig(BaseModel):
    """Schema for vocabulary merge settings."""
    model_config = ConfigDict(frozen=True)

    overlap_scope: OverlapScope = OverlapScope.NON_ASCII_ONLY
    eviction_order: EvictionOrder = EvictionOrder.ASCENDING_SCORE
    max_new_tokens: Optional[int] = Field(default=None, ge=0, description="None means unlimited")
    target_vocab_size: Optional[int] = Field(
        default=None, gt=0, description="If set, must equal the original vocabulary size"
    )


class AuditRecord(BaseModel):
    """One line of the merge audit JSONL file."""
    id: int
    disposition: Disposition
    old_piece: Optional[str] = None
    new_piece: Optional[str] = None
    old_score: Optional[float] = None
    new_score: Optional[float] = None


class MergeSummary(BaseModel):
    """Counts per disposition, printed by the merge command."""
    vocab_size: int
    kept_english: int
    kept_service: int
    retained: int
    overlapped: int
    evicted: int
    added: int
    unused: int
    categories: dict[str, int] = Field(default_factory=dict)
