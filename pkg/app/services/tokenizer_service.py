"""
Unigram segmentation with UTF-8 byte fallback.

Whitespace follows the SentencePiece convention: every space becomes the
boundary marker, and with `add_dummy_prefix` one marker is prepended to
non-empty input. Pieces never cross a word boundary; each chunk (a run of
markers followed by the next word) is segmented on its own.

The best segmentation of a chunk is chosen lexicographically:
    1. fewest characters emitted as byte fallback
    2. highest total piece score
    3. longest leftmost piece
"""
import logging
from dataclasses import dataclass, field
from typing import Iterable, Literal, Optional, Union

from app.exceptions import DataError
from app.models.tokenizer import (
    Token,
    TokenClass,
    TokenEntry,
    TokenizerModel,
    TokenKind,
    TokenSequence,
)
from app.services.text_service import decode_utf8

logger = logging.getLogger(__name__)

# Step of a best path: (unit offset inside the segment, length, is_fallback)
Step = tuple[int, int, bool]

CACHE_LIMIT = 1 << 16


class DetokenizeError(DataError):
    """Raised for unknown ids or byte runs that are not valid UTF-8."""
    pass


@dataclass
class _Units:
    """Input characters as segmentation units, with their source byte spans."""
    display: list[str] = field(default_factory=list)
    blocked: list[bool] = field(default_factory=list)
    fallback: list[bytes] = field(default_factory=list)
    starts: list[int] = field(default_factory=list)
    ends: list[int] = field(default_factory=list)

    def add(self, display: str, fallback: bytes, start: int, end: int, blocked: bool = False):
        self.display.append(display)
        self.blocked.append(blocked)
        self.fallback.append(fallback)
        self.starts.append(start)
        self.ends.append(end)

    def __len__(self) -> int:
        return len(self.display)


class TokenizerService:
    """
    Read-only segmentation engine bound to one TokenizerModel.

    Safe to share between threads; the only mutable state is a memo of
    chunk segmentations, which is a pure function of the chunk text.
    """

    def __init__(self, model: TokenizerModel):
        self.model = model
        self.marker = model.marker
        self._cache: dict[str, tuple[Step, ...]] = {}

    # ------------------------------------------------------------------
    # Viterbi
    # ------------------------------------------------------------------

    def best_path(self, segment: str) -> tuple[Step, ...]:
        """
        Best segmentation of a boundary-free segment.

        Runs a backward DP so that, among equally good completions, the
        longest piece at the leftmost position is kept: candidates are
        visited longest first and replace the incumbent only on strict
        improvement.
        """
        cached = self._cache.get(segment)
        if cached is not None:
            return cached

        index = self.model.piece_index
        max_len = self.model.max_piece_len
        n = len(segment)
        fallbacks = [0] * (n + 1)
        scores = [0.0] * (n + 1)
        choice: list[Step] = [(0, 0, False)] * n

        for i in range(n - 1, -1, -1):
            best: Optional[tuple[int, float, Step]] = None
            for length in range(min(max_len, n - i), 0, -1):
                hit = index.get(segment[i:i + length])
                if hit is None:
                    continue
                fb = fallbacks[i + length]
                score = scores[i + length] + hit[1]
                if best is None or fb < best[0] or (fb == best[0] and score > best[1]):
                    best = (fb, score, (i, length, False))
            # byte fallback of one character is the last resort
            fb = fallbacks[i + 1] + 1
            if best is None or fb < best[0] or (fb == best[0] and scores[i + 1] > best[1]):
                best = (fb, scores[i + 1], (i, 1, True))
            fallbacks[i], scores[i], choice[i] = best

        path = []
        i = 0
        while i < n:
            step = choice[i]
            path.append(step)
            i += step[1]
        result = tuple(path)

        if len(self._cache) >= CACHE_LIMIT:
            self._cache.clear()
        self._cache[segment] = result
        return result

    # ------------------------------------------------------------------
    # Encoding
    # ------------------------------------------------------------------

    def _units(self, text: str, dummy_prefix: bool, raw_marker: bool) -> _Units:
        units = _Units()
        if dummy_prefix and text:
            units.add(self.marker, b" ", 0, 0)
        pos = 0
        for ch in text:
            encoded = ch.encode("utf-8")
            end = pos + len(encoded)
            if ch == " ":
                units.add(self.marker, b" ", pos, end)
            elif ch == self.marker:
                if raw_marker:
                    units.add(self.marker, b" ", pos, end)
                else:
                    units.add(ch, encoded, pos, end, blocked=True)
            else:
                units.add(ch, encoded, pos, end)
            pos = end
        return units

    def _segments(self, units: _Units) -> Iterable[tuple[int, int]]:
        """Yield (start, end) unit ranges segmented independently."""
        start = 0
        prev_marker = False
        for i in range(len(units)):
            if units.blocked[i]:
                if start < i:
                    yield start, i
                yield i, i + 1
                start = i + 1
                prev_marker = False
                continue
            is_marker = units.display[i] == self.marker
            if is_marker and not prev_marker and start < i:
                yield start, i
                start = i
            prev_marker = is_marker
        if start < len(units):
            yield start, len(units)

    def _emit(self, units: _Units, offset: int, step: Step, out: list[Token]):
        i, length, is_fallback = step
        i += offset
        if not is_fallback:
            piece = "".join(units.display[i:i + length])
            out.append(Token(self.model.piece_index[piece][0], units.starts[i], units.ends[i + length - 1]))
            return

        data = units.fallback[i]
        start, end = units.starts[i], units.ends[i]
        per_byte = len(data) == end - start
        for k, value in enumerate(data):
            token_id = self.model.byte_ids[value]
            if per_byte:
                out.append(Token(token_id, start + k, start + k + 1))
            elif k == 0:
                out.append(Token(token_id, start, end))
            else:
                out.append(Token(token_id, end, end))

    def _encode_units(self, units: _Units) -> TokenSequence:
        out: list[Token] = []
        for start, end in self._segments(units):
            if units.blocked[start]:
                self._emit(units, start, (0, 1, True), out)
                continue
            segment = "".join(units.display[start:end])
            for step in self.best_path(segment):
                self._emit(units, start, step, out)
        return TokenSequence(tuple(out))

    def encode(self, text: Union[str, bytes]) -> TokenSequence:
        """
        Segment text into tokens whose byte spans tile the UTF-8 input.

        Raises:
            TextDecodeError: If `text` is bytes and not valid UTF-8
        """
        text = decode_utf8(text)
        units = self._units(text, self.model.metadata.add_dummy_prefix, raw_marker=False)
        return self._encode_units(units)

    def segment(self, piece: str) -> list[int]:
        """Segment a raw piece string; marker characters stay markers, no dummy prefix."""
        return self._encode_units(self._units(piece, dummy_prefix=False, raw_marker=True)).ids

    # ------------------------------------------------------------------
    # Decoding
    # ------------------------------------------------------------------

    def decode(
        self,
        tokens: Union[TokenSequence, Iterable[int]],
        errors: Literal["strict", "replace"] = "strict",
    ) -> str:
        """
        Reassemble text from token ids.

        Normal pieces contribute their text with markers turned back into
        spaces, byte tokens their raw byte; control and unused ids decode
        to nothing.

        Raises:
            DetokenizeError: On an out-of-range id, or on an invalid byte run
                when errors is "strict"
        """
        ids = tokens.ids if isinstance(tokens, TokenSequence) else list(tokens)
        entries = self.model.entries
        buffer = bytearray()
        for position, token_id in enumerate(ids):
            if not 0 <= token_id < len(entries):
                raise DetokenizeError(
                    f"Token id {token_id} at position {position} is outside [0, {len(entries)})"
                )
            entry = entries[token_id]
            if entry.kind is TokenKind.NORMAL:
                buffer += entry.piece.replace(self.marker, " ").encode("utf-8")
            elif entry.kind is TokenKind.BYTE:
                buffer.append(entry.byte_value)

        try:
            text = bytes(buffer).decode("utf-8", errors=errors)
        except UnicodeDecodeError as e:
            raise DetokenizeError(f"Byte-fallback run is not valid UTF-8 at decoded byte offset {e.start}") from e

        if self.model.metadata.add_dummy_prefix and text.startswith(" "):
            text = text[1:]
        return text


def get_tokenizer(model: TokenizerModel) -> TokenizerService:
    """Segmentation engine of a model, created once and reused."""
    if model._service is None:
        model._service = TokenizerService(model)
    return model._service


def tokenize(model: TokenizerModel, text: Union[str, bytes]) -> TokenSequence:
    return get_tokenizer(model).encode(text)


def detokenize(
    model: TokenizerModel,
    tokens: Union[TokenSequence, Iterable[int]],
    errors: Literal["strict", "replace"] = "strict",
) -> str:
    return get_tokenizer(model).decode(tokens, errors=errors)


def segment_piece(model: TokenizerModel, piece: str) -> list[int]:
    """Ids of the Viterbi segmentation of a single piece string."""
    return get_tokenizer(model).segment(piece)


def path_score(model: TokenizerModel, tokens: TokenSequence) -> float:
    """Sum of the scores of the normal pieces in a token sequence."""
    return sum(model[t.id].score for t in tokens if model[t.id].kind is TokenKind.NORMAL)


def is_english_piece(piece: str, marker: str = "▁") -> bool:
    """True if every character of the piece, ignoring markers, is ASCII."""
    return all(ch.isascii() for ch in piece if ch != marker)


def classify_token(entry: TokenEntry, marker: Optional[str] = None) -> TokenClass:
    """
    Coarse class of a vocabulary entry.

    english iff the entry is a normal piece made only of ASCII characters
    (the boundary marker aside); byte and control by kind; everything else,
    unused slots included, is other.
    """
    if entry.kind is TokenKind.BYTE:
        return TokenClass.BYTE
    if entry.kind is TokenKind.CONTROL:
        return TokenClass.CONTROL
    if entry.kind is TokenKind.NORMAL and is_english_piece(entry.piece, marker or "▁"):
        return TokenClass.ENGLISH
    return TokenClass.OTHER
