from pydantic import BaseModel, ConfigDict, Field


class NormalizationConfig(BaseModel):
    """Schema for the text normalization pass."""
    strip_html: bool = Field(default=True, description="Remove HTML formatting tags")
    fold_accents: bool = Field(default=True, description="Fold marks listed in the fold table")
    unicode_nfc: bool = Field(default=True, description="Compose output to Unicode NFC")

    model_config = ConfigDict(frozen=True)


class SplitConfig(BaseModel):
    """Schema for word splitting."""
    detach_punctuation: bool = Field(
        default=True, description="Detach leading/trailing punctuation from words"
    )
    keep_punctuation: bool = Field(
        default=False, description="Emit detached and punctuation-only runs as words"
    )

    model_config = ConfigDict(frozen=True)


class StemmerConfig(BaseModel):
    """Schema for the light stemming pass."""
    enabled: bool = True
    prefix_list: tuple[str, ...] = Field(default=(), description="Prefixes, any order")
    suffix_list: tuple[str, ...] = Field(default=(), description="Suffixes, any order")
    min_stem_len: int = Field(default=2, ge=1, description="Minimum characters left after stripping")

    model_config = ConfigDict(frozen=True)
