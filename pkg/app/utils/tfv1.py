"""
TFV1 tokenizer model codec.

Line 1: `TFV1\\t<vocab_size>\\t<boundary_marker_codepoint_hex>`.
Then one line per entry, sorted by id:
`<id>\\t<kind>\\t<score>\\t<piece>` with tab, newline and backslash in the
piece backslash-escaped. Scores use the shortest round-trip decimal.

Everything else about a model (name, languages, provenance...) is kept in a
JSON sidecar `<file>.meta.json`.
"""
import hashlib
import logging
import math
from pathlib import Path
from typing import Optional

from app.exceptions import DataError, ValidationIssue
from app.models.tokenizer import (
    BYTE_PIECES,
    ModelValidationError,
    TokenEntry,
    TokenizerModel,
    TokenKind,
)
from app.schemas.tokenizer import ModelMetadata
from app.utils.datafiles import PathLike

logger = logging.getLogger(__name__)

MAGIC = "TFV1"
SIDECAR_SUFFIX = ".meta.json"

_ESCAPES = {"\\": "\\\\", "\t": "\\t", "\n": "\\n"}
_UNESCAPES = {"\\": "\\", "t": "\t", "n": "\n"}


def escape_piece(piece: str) -> str:
    return "".join(_ESCAPES.get(ch, ch) for ch in piece)


def unescape_piece(text: str) -> str:
    """Undo `escape_piece`; raises ValueError on a dangling or unknown escape."""
    out = []
    chars = iter(text)
    for ch in chars:
        if ch != "\\":
            out.append(ch)
            continue
        code = next(chars, None)
        if code not in _UNESCAPES:
            raise ValueError(f"bad escape sequence '\\{code or ''}'")
        out.append(_UNESCAPES[code])
    return "".join(out)


def format_score(score: float) -> str:
    """Shortest decimal that round-trips to the same 64-bit float."""
    return repr(float(score))


def sidecar_path(path: PathLike) -> Path:
    path = Path(path)
    return path.with_name(path.name + SIDECAR_SUFFIX)


def dumps(model: TokenizerModel) -> str:
    """Serialize a model to TFV1 text."""
    lines = [f"{MAGIC}\t{model.vocab_size}\t{ord(model.marker):04X}"]
    for entry in model.entries:
        lines.append(
            f"{entry.id}\t{entry.kind.value}\t{format_score(entry.score)}\t{escape_piece(entry.piece)}"
        )
    return "\n".join(lines) + "\n"


def model_fingerprint(model: TokenizerModel) -> str:
    """SHA-256 of the model's TFV1 serialization."""
    return hashlib.sha256(dumps(model).encode("utf-8")).hexdigest()


def parse(text: str, source: str = "<string>") -> tuple[list[TokenEntry], str]:
    """
    Parse TFV1 text.

    Returns:
        (entries ordered by id, boundary marker)

    Raises:
        ModelValidationError: Listing every problem with its line number
    """
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise ModelValidationError(f"{source}: empty TFV1 file")

    header = lines[0].split("\t")
    if len(header) != 3 or header[0] != MAGIC:
        raise ModelValidationError(
            f"{source}: bad header", [ValidationIssue(line=1, message=f"expected 'TFV1<TAB>size<TAB>marker', got {lines[0]!r}")]
        )
    try:
        vocab_size = int(header[1])
        marker = chr(int(header[2], 16))
    except ValueError as e:
        raise ModelValidationError(f"{source}: bad header", [ValidationIssue(line=1, message=str(e))]) from e

    issues: list[ValidationIssue] = []
    entries: list[TokenEntry] = []
    normal_lines: dict[str, int] = {}
    byte_lines: dict[str, int] = {}

    if len(lines) - 1 != vocab_size:
        issues.append(ValidationIssue(
            line=1, message=f"header declares {vocab_size} entries, file has {len(lines) - 1}"
        ))

    for number, line in enumerate(lines[1:], start=2):
        fields = line.split("\t")
        if len(fields) != 4:
            issues.append(ValidationIssue(line=number, message=f"expected 4 fields, got {len(fields)}"))
            continue
        raw_id, raw_kind, raw_score, raw_piece = fields
        try:
            token_id = int(raw_id)
            kind = TokenKind(raw_kind)
            score = float(raw_score)
            piece = unescape_piece(raw_piece)
        except ValueError as e:
            issues.append(ValidationIssue(line=number, message=str(e)))
            continue

        expected_id = len(entries)
        if token_id != expected_id:
            issues.append(ValidationIssue(line=number, message=f"expected id {expected_id}, found {token_id}; ids must be dense and sorted"))
            continue
        if not math.isfinite(score):
            issues.append(ValidationIssue(line=number, message=f"score {raw_score} is not finite"))
            continue

        if kind is TokenKind.NORMAL:
            if piece in normal_lines:
                issues.append(ValidationIssue(
                    line=number, message=f"duplicate piece {piece!r} (first on line {normal_lines[piece]}, again on line {number})"
                ))
                continue
            normal_lines[piece] = number
        elif kind is TokenKind.BYTE:
            if piece not in BYTE_PIECES:
                issues.append(ValidationIssue(line=number, message=f"malformed byte piece {piece!r}"))
                continue
            if piece in byte_lines:
                issues.append(ValidationIssue(
                    line=number, message=f"duplicate byte piece {piece!r} (first on line {byte_lines[piece]})"
                ))
                continue
            byte_lines[piece] = number
        entries.append(TokenEntry(token_id, piece, score, kind))

    missing = sorted(set(BYTE_PIECES) - set(byte_lines))
    if missing and not issues:
        shown = ", ".join(missing[:8]) + (" ..." if len(missing) > 8 else "")
        issues.append(ValidationIssue(message=f"{len(missing)} byte piece(s) missing: {shown}"))

    if issues:
        raise ModelValidationError(f"{source}: invalid TFV1 model", issues)
    return entries, marker


def loads(text: str, metadata: Optional[ModelMetadata] = None, source: str = "<string>") -> TokenizerModel:
    """Build a validated model from TFV1 text."""
    entries, marker = parse(text, source)
    metadata = metadata or ModelMetadata()
    if metadata.boundary_marker != marker:
        metadata = metadata.model_copy(update={"boundary_marker": marker})
    return TokenizerModel(entries, metadata)


def save_model(model: TokenizerModel, path: PathLike) -> Path:
    """
    Write a model as TFV1 plus its metadata sidecar.

    Returns:
        Path of the TFV1 file
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as handle:
        handle.write(dumps(model))
    sidecar_path(path).write_text(model.metadata.model_dump_json(indent=2), encoding="utf-8")
    logger.info(f"Saved model '{model.metadata.name}' ({model.vocab_size} entries) to {path}")
    return path


def load_model(path: PathLike) -> TokenizerModel:
    """
    Load and validate a TFV1 model; the sidecar is optional.

    Raises:
        DataError: If the file is missing or not UTF-8
        ModelValidationError: On any invariant violation, naming the line
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"Model file not found: {path}")
    try:
        with path.open("r", encoding="utf-8", newline="") as handle:
            text = handle.read()
    except UnicodeDecodeError as e:
        raise DataError(f"{path}: invalid UTF-8 at byte offset {e.start}") from e

    metadata = None
    meta_file = sidecar_path(path)
    if meta_file.is_file():
        metadata = ModelMetadata.model_validate_json(meta_file.read_text(encoding="utf-8"))
    return loads(text, metadata, source=str(path))
