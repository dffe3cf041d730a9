import enum
import math
from dataclasses import dataclass
from typing import Iterable, Iterator, NamedTuple, Optional

from app.exceptions import DataError, ValidationIssue
from app.schemas.tokenizer import ModelMetadata

BYTE_COUNT = 256


class TokenKind(str, enum.Enum):
    """Enum for vocabulary entry kinds."""
    NORMAL = "normal"
    BYTE = "byte"
    CONTROL = "control"
    UNUSED = "unused"


class TokenClass(str, enum.Enum):
    """Coarse token classes used by the merger."""
    ENGLISH = "english"
    BYTE = "byte"
    CONTROL = "control"
    OTHER = "other"


def byte_piece(value: int) -> str:
    """Piece text of the byte-fallback entry for one byte value."""
    return f"<0x{value:02X}>"


BYTE_PIECES = {byte_piece(value): value for value in range(BYTE_COUNT)}


@dataclass(frozen=True, slots=True)
class TokenEntry:
    """
    One vocabulary entry.

    Attributes:
        id: Dense non-negative token id
        piece: Piece text (byte entries are `<0xNN>`)
        score: Log-probability; <= 0 for normal pieces
        kind: Entry kind
    """
    id: int
    piece: str
    score: float
    kind: TokenKind = TokenKind.NORMAL

    @property
    def byte_value(self) -> Optional[int]:
        if self.kind is not TokenKind.BYTE:
            return None
        return BYTE_PIECES.get(self.piece)


class Token(NamedTuple):
    """A token id with the source byte span it covers."""
    id: int
    start: int
    end: int


@dataclass(frozen=True)
class TokenSequence:
    """Token ids in order; spans tile the source text exactly."""
    tokens: tuple[Token, ...] = ()

    @property
    def ids(self) -> list[int]:
        return [token.id for token in self.tokens]

    @property
    def spans(self) -> list[tuple[int, int]]:
        return [(token.start, token.end) for token in self.tokens]

    def __len__(self) -> int:
        return len(self.tokens)

    def __iter__(self) -> Iterator[Token]:
        return iter(self.tokens)


class ModelValidationError(DataError):
    """Raised when vocabulary entries break a TokenizerModel invariant."""
    pass


def validate_entries(entries: tuple[TokenEntry, ...]) -> list[ValidationIssue]:
    """
    Check every TokenizerModel invariant.

    Returns:
        One issue per violation; empty when the entries are well-formed.
    """
    issues = []
    seen_normal: dict[str, int] = {}
    seen_bytes: set[int] = set()

    for position, entry in enumerate(entries):
        if entry.id != position:
            issues.append(ValidationIssue(message=f"id {entry.id} at position {position}; ids must be dense"))
        if not math.isfinite(entry.score):
            issues.append(ValidationIssue(message=f"id {entry.id}: score is not finite"))
        if entry.kind is TokenKind.NORMAL:
            if not entry.piece:
                issues.append(ValidationIssue(message=f"id {entry.id}: empty normal piece"))
            elif entry.piece in seen_normal:
                issues.append(ValidationIssue(
                    message=f"duplicate piece {entry.piece!r} at ids {seen_normal[entry.piece]} and {entry.id}"
                ))
            else:
                seen_normal[entry.piece] = entry.id
        elif entry.kind is TokenKind.BYTE:
            value = entry.byte_value
            if value is None:
                issues.append(ValidationIssue(message=f"id {entry.id}: malformed byte piece {entry.piece!r}"))
            elif value in seen_bytes:
                issues.append(ValidationIssue(message=f"id {entry.id}: duplicate byte piece {entry.piece!r}"))
            else:
                seen_bytes.add(value)

    missing = [byte_piece(v) for v in range(BYTE_COUNT) if v not in seen_bytes]
    if missing:
        shown = ", ".join(missing[:8]) + (" ..." if len(missing) > 8 else "")
        issues.append(ValidationIssue(message=f"{len(missing)} byte piece(s) missing: {shown}"))
    return issues


class TokenizerModel:
    """
    Unigram tokenizer model: scored vocabulary plus lookup tables.

    A model is immutable once built; derived models are new instances.

    Attributes:
        entries: Vocabulary entries ordered by id
        metadata: Name, language tags, boundary convention, provenance
        piece_index: Normal piece -> (id, score)
        byte_ids: Byte value -> id of its fallback entry
        max_piece_len: Length in characters of the longest normal piece
    """

    def __init__(
        self,
        entries: Iterable[TokenEntry],
        metadata: Optional[ModelMetadata] = None,
    ):
        self.entries: tuple[TokenEntry, ...] = tuple(entries)
        self.metadata = metadata or ModelMetadata()

        issues = validate_entries(self.entries)
        if issues:
            raise ModelValidationError("Invalid tokenizer model", issues)

        self.piece_index: dict[str, tuple[int, float]] = {}
        self.byte_ids: list[int] = [0] * BYTE_COUNT
        for entry in self.entries:
            if entry.kind is TokenKind.NORMAL:
                self.piece_index[entry.piece] = (entry.id, entry.score)
            elif entry.kind is TokenKind.BYTE:
                self.byte_ids[entry.byte_value] = entry.id
        self.max_piece_len = max((len(piece) for piece in self.piece_index), default=0)
        self._service = None

    @property
    def vocab_size(self) -> int:
        return len(self.entries)

    @property
    def marker(self) -> str:
        return self.metadata.boundary_marker

    def __len__(self) -> int:
        return len(self.entries)

    def __getitem__(self, token_id: int) -> TokenEntry:
        return self.entries[token_id]

    def id_of(self, piece: str) -> Optional[int]:
        """Id of a normal piece, or None."""
        found = self.piece_index.get(piece)
        return found[0] if found else None

    def normal_entries(self) -> Iterator[TokenEntry]:
        return (entry for entry in self.entries if entry.kind is TokenKind.NORMAL)

    def __getstate__(self):
        state = self.__dict__.copy()
        state["_service"] = None
        return state

    def __repr__(self):
        return f"<TokenizerModel(name='{self.metadata.name}', vocab_size={self.vocab_size})>"
