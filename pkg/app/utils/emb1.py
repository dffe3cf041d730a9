"""
EMB1 embedding matrix codec.

Layout (little-endian, no padding):
    8 bytes   magic `EMB1\\0\\0\\0\\0`
    u32       row count
    u32       dims
    rows*dims float32 values, row-major
"""
import logging
import struct
from pathlib import Path

import numpy as np

from app.exceptions import DataError
from app.utils.datafiles import PathLike

logger = logging.getLogger(__name__)

MAGIC = b"EMB1\0\0\0\0"
HEADER = struct.Struct("<8sII")
DTYPE = np.dtype("<f4")


class EmbeddingFormatError(DataError):
    """Raised when an EMB1 file or buffer is malformed."""
    pass


def check_finite(values: np.ndarray, source: str = "matrix"):
    """Raise EmbeddingFormatError naming the first row holding NaN or Inf."""
    bad = ~np.isfinite(values)
    if bad.any():
        row = int(np.argwhere(bad)[0][0])
        raise EmbeddingFormatError(f"{source}: row {row} contains non-finite values")


def dumps(values: np.ndarray) -> bytes:
    values = np.ascontiguousarray(values, dtype=DTYPE)
    if values.ndim != 2:
        raise EmbeddingFormatError(f"expected a 2-d matrix, got shape {values.shape}")
    check_finite(values)
    rows, dims = values.shape
    return HEADER.pack(MAGIC, rows, dims) + values.tobytes(order="C")


def loads(data: bytes, source: str = "<bytes>") -> np.ndarray:
    """
    Parse EMB1 bytes into a (rows, dims) float32 array.

    Raises:
        EmbeddingFormatError: Bad magic, length mismatch or non-finite values
    """
    if len(data) < HEADER.size:
        raise EmbeddingFormatError(
            f"{source}: truncated header, expected {HEADER.size} bytes, got {len(data)}"
        )
    magic, rows, dims = HEADER.unpack_from(data)
    if magic != MAGIC:
        raise EmbeddingFormatError(f"{source}: bad magic {magic!r}")

    expected = HEADER.size + rows * dims * DTYPE.itemsize
    if len(data) != expected:
        raise EmbeddingFormatError(
            f"{source}: header declares {rows}x{dims}, expected {expected} bytes, got {len(data)}"
        )
    values = np.frombuffer(data, dtype=DTYPE, count=rows * dims, offset=HEADER.size)
    values = values.reshape(rows, dims).astype(np.float32)
    check_finite(values, source)
    return values


def save_matrix(values: np.ndarray, path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(dumps(values))
    logger.info(f"Saved {values.shape[0]}x{values.shape[1]} matrix to {path}")
    return path


def load_matrix(path: PathLike) -> np.ndarray:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"Embedding file not found: {path}")
    return loads(path.read_bytes(), source=str(path))
