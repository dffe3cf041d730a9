"""
Text preparation shared by every other stage.

Normalization, word splitting and Arabic light stemming live here so that the
trainer, the fertility metric and the code-switching metric all agree on what
a "word" is.
"""
import logging
import unicodedata
from functools import lru_cache
from pathlib import Path
from typing import Iterable, Iterator, Optional, Union

import regex

from app.config import get_settings
from app.exceptions import DataError
from app.models.text import StemResult, Word, WordStream
from app.schemas.text import NormalizationConfig, SplitConfig, StemmerConfig
from app.utils.datafiles import PathLike, iter_entries, read_entries

logger = logging.getLogger(__name__)

HTML_TAG = regex.compile(r"<!--.*?-->|</?[A-Za-z][^<>]*>", regex.DOTALL)
NON_SPACE_RUN = regex.compile(r"\S+")
EDGE_PUNCTUATION = regex.compile(r"^(\p{P}*)(.*?)(\p{P}*)$", regex.DOTALL)
FOLD_ENTRY = regex.compile(r"^U\+([0-9A-Fa-f]{4,6})(?:\t.*)?$")

FOLD_TABLE_FILE = "accent_folds.txt"
ARABIC_PREFIX_FILE = "affixes/arabic_prefixes.txt"
ARABIC_SUFFIX_FILE = "affixes/arabic_suffixes.txt"


class TextDecodeError(DataError):
    """Raised when input bytes are not valid UTF-8."""

    def __init__(self, offset: int, source: Optional[str] = None):
        self.offset = offset
        where = f"{source}: " if source else ""
        super().__init__(f"{where}invalid UTF-8 at byte offset {offset}")


def decode_utf8(data: Union[bytes, str], source: Optional[str] = None, base_offset: int = 0) -> str:
    """Decode UTF-8 strictly; strings pass through unchanged."""
    if isinstance(data, str):
        return data
    try:
        return data.decode("utf-8")
    except UnicodeDecodeError as e:
        raise TextDecodeError(base_offset + e.start, source) from e


# ---------------------------------------------------------------------------
# Data files
# ---------------------------------------------------------------------------

def load_fold_table(path: PathLike) -> frozenset[str]:
    """
    Load the accent fold table.

    Each entry is a `U+XXXX` code point of a combining mark, optionally
    followed by a tab and a descriptive name.
    """
    marks = set()
    for number, entry in iter_entries(path):
        match = FOLD_ENTRY.match(entry.strip())
        if not match:
            raise DataError(f"{path}: line {number}: expected 'U+XXXX', got {entry!r}")
        marks.add(chr(int(match.group(1), 16)))
    return frozenset(marks)


def load_affixes(path: PathLike) -> tuple[str, ...]:
    """Load an affix list, one affix per line."""
    return tuple(entry.strip() for entry in read_entries(path))


@lru_cache(maxsize=8)
def _default_fold_table(data_dir: Path) -> frozenset[str]:
    return load_fold_table(data_dir / FOLD_TABLE_FILE)


def default_fold_table() -> frozenset[str]:
    """Fold table shipped in the configured data directory."""
    return _default_fold_table(Path(get_settings().DATA_DIR))


def arabic_stemmer_config(data_dir: Optional[PathLike] = None, min_stem_len: int = 2) -> StemmerConfig:
    """Stemmer configuration built from the shipped Arabic affix lists."""
    root = Path(data_dir or get_settings().DATA_DIR)
    return StemmerConfig(
        enabled=True,
        prefix_list=load_affixes(root / ARABIC_PREFIX_FILE),
        suffix_list=load_affixes(root / ARABIC_SUFFIX_FILE),
        min_stem_len=min_stem_len,
    )


# ---------------------------------------------------------------------------
# Normalization
# ---------------------------------------------------------------------------

def strip_html(text: str) -> str:
    """Remove HTML tags and comments until none are left."""
    while True:
        stripped = HTML_TAG.sub("", text)
        if stripped == text:
            return text
        text = stripped


def fold_marks(text: str, marks: frozenset[str]) -> str:
    """
    Drop the listed combining marks.

    A precomposed character whose decomposition contains a listed mark is
    replaced by its recomposed remainder; every other character is left in
    its original form.
    """
    if not marks:
        return text
    folded = []
    for ch in text:
        if ch.isascii():
            folded.append(ch)
            continue
        if ch in marks:
            continue
        decomposed = unicodedata.normalize("NFD", ch)
        if len(decomposed) > 1 and any(c in marks for c in decomposed):
            remainder = "".join(c for c in decomposed if c not in marks)
            folded.append(unicodedata.normalize("NFC", remainder))
        else:
            folded.append(ch)
    return "".join(folded)


def normalize(
    text: Union[str, bytes],
    cfg: NormalizationConfig = NormalizationConfig(),
    marks: Optional[frozenset[str]] = None,
) -> str:
    """
    Normalize raw text.

    Args:
        text: Raw text, `bytes` are decoded as strict UTF-8
        cfg: Which passes to apply
        marks: Fold table override (defaults to the shipped table)

    Returns:
        Normalized text; applying normalize again returns it unchanged.

    Raises:
        TextDecodeError: If bytes are not valid UTF-8
    """
    text = decode_utf8(text)
    marks = default_fold_table() if marks is None else marks
    # a pass can expose a tag or a composable pair, so repeat to a fixed point
    while True:
        result = text
        if cfg.strip_html:
            result = strip_html(result)
        if cfg.fold_accents:
            result = fold_marks(result, marks)
        if cfg.unicode_nfc:
            result = unicodedata.normalize("NFC", result)
        if result == text:
            return result
        text = result


def fold_key(text: str, marks: Optional[frozenset[str]] = None) -> str:
    """Lookup key for word sets and gazetteers: accent-folded, NFC, case-folded."""
    folded = fold_marks(text, default_fold_table() if marks is None else marks)
    return unicodedata.normalize("NFC", folded).casefold()


# ---------------------------------------------------------------------------
# Word splitting
# ---------------------------------------------------------------------------

def iter_word_chars(text: str, cfg: SplitConfig = SplitConfig()) -> Iterator[tuple[str, int, int]]:
    """Yield (word, char start, char end) for every word of the text."""
    for match in NON_SPACE_RUN.finditer(text):
        run, start, end = match.group(), match.start(), match.end()
        if not cfg.detach_punctuation:
            yield run, start, end
            continue
        leading, core, trailing = EDGE_PUNCTUATION.match(run).groups()
        if not core:
            if cfg.keep_punctuation:
                yield run, start, end
            continue
        core_start = start + len(leading)
        core_end = core_start + len(core)
        if leading and cfg.keep_punctuation:
            yield leading, start, core_start
        yield core, core_start, core_end
        if trailing and cfg.keep_punctuation:
            yield trailing, core_end, end


def split_words(text: str, cfg: SplitConfig = SplitConfig(), base_offset: int = 0) -> WordStream:
    """
    Split normalized text into words.

    Words are maximal runs of non-whitespace; leading and trailing punctuation
    is detached per config. Spans are UTF-8 byte offsets into `text`
    (shifted by `base_offset`).
    """
    words: WordStream = []
    char_pos, byte_pos = 0, base_offset
    for word, start, end in iter_word_chars(text, cfg):
        byte_pos += len(text[char_pos:start].encode("utf-8"))
        length = len(word.encode("utf-8"))
        words.append(Word(word, byte_pos, byte_pos + length))
        byte_pos += length
        char_pos = end
    return words


def iter_words(lines: Iterable[str], cfg: SplitConfig = SplitConfig()) -> Iterator[Word]:
    """
    Split a line-delimited stream.

    Spans are byte offsets into the stream as if the lines were joined
    with a single newline each.
    """
    offset = 0
    for line in lines:
        line = line.rstrip("\n")
        yield from split_words(line, cfg, base_offset=offset)
        offset += len(line.encode("utf-8")) + 1


def iter_corpus(path: PathLike) -> Iterator[str]:
    """
    Read a corpus: one document per line.

    `path` is a UTF-8 text file or a directory whose `*.txt` files are read
    in name order.

    Raises:
        DataError: If the path does not exist
        TextDecodeError: On invalid UTF-8, naming the file and byte offset
    """
    path = Path(path)
    if path.is_dir():
        files = sorted(p for p in path.glob("*.txt") if p.is_file())
    elif path.is_file():
        files = [path]
    else:
        raise DataError(f"Corpus not found: {path}")

    for file in files:
        offset = 0
        with file.open("rb") as handle:
            for raw in handle:
                line = decode_utf8(raw, source=str(file), base_offset=offset)
                offset += len(raw)
                yield line.rstrip("\r\n")


# ---------------------------------------------------------------------------
# Light stemming
# ---------------------------------------------------------------------------

def _longest_affix(candidates: Iterable[str], keep: int, matches) -> str:
    for affix in sorted(candidates, key=lambda a: (-len(a), a)):
        if affix and matches(affix) and keep - len(affix) >= 0:
            return affix
    return ""


def light_stem(word: str, cfg: StemmerConfig) -> StemResult:
    """
    Strip at most one prefix and then at most one suffix.

    Affixes are tried longest first; an affix is stripped only if at least
    `min_stem_len` characters remain. Words shorter than `min_stem_len`,
    and every word when stemming is disabled, pass through unchanged.
    """
    if not cfg.enabled or len(word) < cfg.min_stem_len:
        return StemResult(word)

    prefix = _longest_affix(
        cfg.prefix_list, len(word) - cfg.min_stem_len, word.startswith
    )
    rest = word[len(prefix):]
    suffix = _longest_affix(
        cfg.suffix_list, len(rest) - cfg.min_stem_len, rest.endswith
    )
    stem = rest[: len(rest) - len(suffix)]
    return StemResult(
        stem=stem,
        prefixes=(prefix,) if prefix else (),
        suffixes=(suffix,) if suffix else (),
    )


def stem_text(text: str, cfg: StemmerConfig, split_cfg: SplitConfig = SplitConfig()) -> str:
    """
    Rewrite text with stripped affixes as separate words.

    Every word becomes `prefix stem suffix` joined by single spaces; the
    surrounding whitespace and punctuation are preserved.
    """
    pieces = []
    pos = 0
    for word, start, end in iter_word_chars(text, split_cfg):
        pieces.append(text[pos:start])
        result = light_stem(word, cfg)
        pieces.append(" ".join([*result.prefixes, result.stem, *result.suffixes]))
        pos = end
    pieces.append(text[pos:])
    return "".join(pieces)
