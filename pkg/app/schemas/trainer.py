from pydantic import BaseModel, ConfigDict, Field, model_validator


class TrainerConfig(BaseModel):
    """Schema for unigram trainer settings."""
    model_config = ConfigDict(frozen=True)

    target_vocab_size: int = Field(default=8000, gt=0, description="Normal pieces in the final model")
    seed_vocab_size: int = Field(default=100_000, gt=0, description="Multi-character seed candidates")
    max_piece_len: int = Field(default=16, ge=1, description="Longest piece in characters")
    em_iterations: int = Field(default=2, ge=1, description="EM rounds before each pruning round")
    prune_fraction_per_round: float = Field(default=0.25, gt=0, lt=1)
    required_char_coverage: float = Field(default=0.9995, gt=0, le=1)
    whole_word_min_count: int = Field(
        default=100, ge=1, description="Words this frequent seed as whole pieces; fragments come from the rest"
    )
    rng_seed: int = 0

    @model_validator(mode="after")
    def seed_covers_target(self) -> "TrainerConfig":
        if self.seed_vocab_size < self.target_vocab_size:
            raise ValueError(
                f"seed_vocab_size ({self.seed_vocab_size}) must be >= target_vocab_size ({self.target_vocab_size})"
            )
        return self
