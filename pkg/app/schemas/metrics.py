from typing import Optional

from pydantic import BaseModel, ConfigDict, Field


class FertilityReport(BaseModel):
    """Schema for a fertility measurement."""
    token_count: int = Field(..., ge=0)
    word_count: int = Field(..., gt=0)
    fertility: float = Field(..., gt=0, description="token_count / word_count")
    documents: int = 0
    corpus_id: str = Field("", description="SHA-256 of the corpus text")
    tokenizer_hash: str = Field("", description="SHA-256 of the tokenizer's TFV1 serialization")


class ParityReport(BaseModel):
    """Target-language fertility relative to English on parallel text."""
    english: FertilityReport
    target: FertilityReport
    parity: float


class VocabStats(BaseModel):
    """Vocabulary composition; the counts partition vocab_size."""
    vocab_size: int
    target: int
    english: int
    byte: int
    control: int
    other: int


class NewrConfig(BaseModel):
    """Schema for the words left out of the NEWR denominator."""
    model_config = ConfigDict(frozen=True)

    exclude_numbers: bool = True
    exclude_punctuation: bool = True
    exclude_foreign: bool = Field(default=False, description="Needs a target alphabet")
    exclude_proper_names: bool = Field(default=False, description="Capitalized words that are not sentence-initial")


class NewrReport(BaseModel):
    """Schema for a Non-Existing Words Ratio result."""
    ratio: float = Field(..., ge=0, le=1)
    total_words: int
    counted_words: int
    missing_words: int
    excluded_words: int
    offending: list[str] = Field(default_factory=list, description="Missing words in text order")
    wordset_source: str = ""


class WordVerdict(BaseModel):
    """CSWR decision for one word."""
    word: str
    start: int
    end: int
    verdict: str = Field(..., description="target | neutral | whitelisted | violation | sentence_violation")
    rule: Optional[str] = None


class CswrReport(BaseModel):
    """Schema for a Code Switching Word Ratio result."""
    language: str
    ratio: float = Field(..., ge=0, le=1)
    total_words: int
    violations: int
    whitelisted: int
    verdicts: list[WordVerdict] = Field(default_factory=list)


class AdoptionSlice(BaseModel):
    """Category fractions of one slice of a token stream."""
    slice: str
    tokens: int
    counts: dict[str, int]
    fractions: dict[str, float]


class AdoptionReport(BaseModel):
    """Per-slice token adoption fractions; each slice sums to 1."""
    slices: list[AdoptionSlice] = Field(default_factory=list)
    total: Optional[AdoptionSlice] = None
