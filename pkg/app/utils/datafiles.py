import hashlib
from pathlib import Path
from typing import Iterator, Union

from app.exceptions import DataError

PathLike = Union[str, Path]


def iter_entries(path: PathLike) -> Iterator[tuple[int, str]]:
    """
    Iterate over the entries of an editable data file.

    One entry per line; blank lines and lines starting with `#` are skipped.
    Trailing newline characters are removed, other whitespace is kept.

    Yields:
        (1-based line number, entry text)
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"Data file not found: {path}")
    with path.open("r", encoding="utf-8", newline="") as handle:
        for number, line in enumerate(handle, start=1):
            entry = line.rstrip("\r\n")
            if not entry.strip() or entry.lstrip().startswith("#"):
                continue
            yield number, entry


def read_entries(path: PathLike) -> list[str]:
    """Read all entries of a data file in file order."""
    return [entry for _, entry in iter_entries(path)]


def iter_tsv(path: PathLike, min_columns: int = 1) -> Iterator[tuple[int, list[str]]]:
    """Iterate over tab-separated rows of a data file, checking the column count."""
    for number, entry in iter_entries(path):
        columns = entry.split("\t")
        if len(columns) < min_columns:
            raise DataError(
                f"{path}: line {number} has {len(columns)} column(s), expected at least {min_columns}"
            )
        yield number, columns


def sha256_file(path: PathLike) -> str:
    """Hex SHA-256 of a file's bytes."""
    digest = hashlib.sha256()
    with Path(path).open("rb") as handle:
        for block in iter(lambda: handle.read(1 << 20), b""):
            digest.update(block)
    return digest.hexdigest()


def sha256_text(text: str) -> str:
    """Hex SHA-256 of a string's UTF-8 bytes."""
    return hashlib.sha256(text.encode("utf-8")).hexdigest()
