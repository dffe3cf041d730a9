import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping


@dataclass(frozen=True)
class CandidateTable:
    """
    Candidate pieces of a unigram model under training.

    Attributes:
        scores: Piece -> log-probability
        freqs: Piece -> frequency estimate (seed counts, then expected counts)
        required: Single characters kept for coverage; never pruned
    """
    scores: dict[str, float] = field(default_factory=dict)
    freqs: dict[str, float] = field(default_factory=dict)
    required: frozenset[str] = frozenset()

    def __len__(self) -> int:
        return len(self.scores)

    def __contains__(self, piece: str) -> bool:
        return piece in self.scores

    @property
    def max_piece_len(self) -> int:
        return max((len(piece) for piece in self.scores), default=0)

    def total_probability(self) -> float:
        """Sum of exp(score); at most 1 after an M-step."""
        return math.fsum(math.exp(score) for score in self.scores.values())

    def removable(self) -> list[str]:
        """Pieces pruning may drop: everything multi-character and not required."""
        return sorted(p for p in self.scores if len(p) > 1 and p not in self.required)

    def with_scores(self, scores: Mapping[str, float], freqs: Mapping[str, float]) -> "CandidateTable":
        return replace(self, scores=dict(scores), freqs=dict(freqs))

    def without(self, pieces: Iterable[str]) -> "CandidateTable":
        dropped = set(pieces)
        return replace(
            self,
            scores={p: s for p, s in self.scores.items() if p not in dropped},
            freqs={p: f for p, f in self.freqs.items() if p not in dropped},
        )

    def ranked(self) -> list[tuple[str, float]]:
        """Pieces by descending score, ties by piece."""
        return sorted(self.scores.items(), key=lambda item: (-item[1], item[0]))
