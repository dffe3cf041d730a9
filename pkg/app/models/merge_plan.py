from dataclasses import dataclass, field
from typing import Any, NamedTuple

from app.models.tokenizer import TokenizerModel


class PlacedPiece(NamedTuple):
    """A piece with the id it occupies and its score."""
    id: int
    piece: str
    score: float


@dataclass(frozen=True)
class MergePlan:
    """
    Token-by-token record of a vocabulary merge.

    kept_english, kept_service, retained, overlapped and the evicted ids
    partition the id space of the original model; evicted[i]'s id is reused
    by added[i].

    Attributes:
        kept_english: ASCII-only normal pieces kept with id and score
        kept_service: Byte and control ids
        retained: Other ids left untouched (no replacement was available)
        overlapped: id -> (original score, target score) for shared pieces
        evicted: Original pieces that gave up their ids, in eviction order
        added: Target pieces placed into the evicted ids, in the same order
        resulting_model: The merged model
        notes: Diagnostics (score means, counts)
    """
    kept_english: frozenset[int]
    kept_service: frozenset[int]
    retained: frozenset[int]
    overlapped: dict[int, tuple[float, float]]
    evicted: tuple[PlacedPiece, ...]
    added: tuple[PlacedPiece, ...]
    resulting_model: TokenizerModel
    notes: dict[str, Any] = field(default_factory=dict)

    @property
    def added_ids(self) -> frozenset[int]:
        return frozenset(piece.id for piece in self.added)
