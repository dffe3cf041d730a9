"""
Embedding initialization for tokens added by a vocabulary merge.

Rows of ids the merge kept are copied bit for bit. Rows of added ids are
filled by one of three strategies:
    nachos    mean of the rows of the original tokens the new piece splits into
    mean_all  mean of every pre-existing row
    random    zero-mean normal draws
Rows of unused slots are zero.

The same operation applies to any matrix aligned with the vocabulary, input
embeddings and LM head alike.
"""
import logging
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from app.exceptions import DataError
from app.models.embedding import EmbeddingMatrix
from app.models.merge_plan import MergePlan
from app.models.tokenizer import TokenizerModel, TokenKind
from app.schemas.embedding import EmbeddingMetadata, InitKind, InitStrategy
from app.services.tokenizer_service import segment_piece
from app.utils import emb1
from app.utils.datafiles import PathLike
from app.utils.tfv1 import sidecar_path

logger = logging.getLogger(__name__)

DEFAULT_RANDOM_SCALE = 0.02


class EmbeddingInitError(DataError):
    """Raised when embeddings cannot be initialized for a merge."""
    pass


# ---------------------------------------------------------------------------
# IO
# ---------------------------------------------------------------------------

def save_embeddings(matrix: EmbeddingMatrix, path: PathLike) -> Path:
    """Write an EMB1 file and its JSON sidecar."""
    path = emb1.save_matrix(matrix.values, path)
    sidecar_path(path).write_text(matrix.metadata.model_dump_json(indent=2), encoding="utf-8")
    return path


def load_embeddings(path: PathLike) -> EmbeddingMatrix:
    """Read an EMB1 file; the sidecar is optional."""
    values = emb1.load_matrix(path)
    metadata = None
    meta_file = sidecar_path(path)
    if meta_file.is_file():
        metadata = EmbeddingMetadata.model_validate_json(meta_file.read_text(encoding="utf-8"))
    return EmbeddingMatrix(values, metadata)


# ---------------------------------------------------------------------------
# Strategies
# ---------------------------------------------------------------------------

def _existing_mask(rows: int, excluded: Sequence[int]) -> np.ndarray:
    mask = np.ones(rows, dtype=bool)
    mask[list(excluded)] = False
    return mask


def mean_all_init(values: np.ndarray, added_ids: Sequence[int], excluded: Sequence[int] = ()) -> np.ndarray:
    """
    Rows for added ids: the mean of every pre-existing row.

    Pre-existing rows are all rows except the added ids and `excluded`.
    The mean is accumulated in float64.
    """
    mask = _existing_mask(values.shape[0], [*added_ids, *excluded])
    if not mask.any():
        raise EmbeddingInitError("No pre-existing rows to average")
    mean = values[mask].astype(np.float64).mean(axis=0)
    return np.tile(mean.astype(np.float32), (len(added_ids), 1))


def random_init(
    values: np.ndarray,
    added_ids: Sequence[int],
    strat: InitStrategy,
    excluded: Sequence[int] = (),
) -> np.ndarray:
    """
    Rows for added ids drawn from N(0, scale^2) with `strat.rng_seed`.

    The scale is `strat.random_scale`, or the standard deviation of the
    pre-existing rows when unset.
    """
    scale = strat.random_scale
    if scale is None:
        mask = _existing_mask(values.shape[0], [*added_ids, *excluded])
        scale = float(values[mask].astype(np.float64).std()) if mask.any() else 0.0
        if scale == 0.0:
            scale = DEFAULT_RANDOM_SCALE
    rng = np.random.default_rng(strat.rng_seed)
    return rng.normal(0.0, scale, size=(len(added_ids), values.shape[1])).astype(np.float32)


def nachos_row(values: np.ndarray, original: TokenizerModel, piece: str) -> np.ndarray:
    """
    Mean of the rows of the original tokens a new piece segments into.

    Byte-fallback tokens in the segmentation take part in the mean.
    """
    ids = segment_piece(original, piece)
    if not ids:
        raise EmbeddingInitError(f"Piece {piece!r} segments to an empty sequence")
    return values[ids].astype(np.float64).mean(axis=0).astype(np.float32)


def nachos_init(values: np.ndarray, original: TokenizerModel, pieces: Sequence[str]) -> np.ndarray:
    rows = np.empty((len(pieces), values.shape[1]), dtype=np.float32)
    for k, piece in enumerate(pieces):
        rows[k] = nachos_row(values, original, piece)
    return rows


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

def init_new_embeddings(
    matrix: EmbeddingMatrix,
    original: TokenizerModel,
    plan: MergePlan,
    strat: InitStrategy = InitStrategy(),
    metadata: Optional[EmbeddingMetadata] = None,
) -> EmbeddingMatrix:
    """
    Build the embedding matrix of the merged model.

    Raises:
        EmbeddingInitError: If the matrix is not aligned with the original
            tokenizer, or a new piece segments to nothing
    """
    merged = plan.resulting_model
    if matrix.rows != original.vocab_size:
        raise EmbeddingInitError(
            f"Embedding matrix has {matrix.rows} rows but the original tokenizer has {original.vocab_size} ids"
        )
    if merged.vocab_size != original.vocab_size:
        raise EmbeddingInitError(
            f"Merged vocab size {merged.vocab_size} differs from the original {original.vocab_size}"
        )

    values = matrix.values
    added_ids = [placed.id for placed in plan.added]
    unused_ids = [entry.id for entry in merged.entries if entry.kind is TokenKind.UNUSED]
    result = values.copy()

    if added_ids:
        if strat.kind is InitKind.NACHOS:
            rows = nachos_init(values, original, [placed.piece for placed in plan.added])
        elif strat.kind is InitKind.MEAN_ALL:
            rows = mean_all_init(values, added_ids, excluded=unused_ids)
        else:
            rows = random_init(values, added_ids, strat, excluded=unused_ids)
        result[added_ids] = rows
    if unused_ids:
        result[unused_ids] = 0.0

    logger.info(f"Initialized {len(added_ids)} row(s) with '{strat.kind.value}', zeroed {len(unused_ids)} unused")
    metadata = metadata or EmbeddingMetadata(name=merged.metadata.name)
    metadata = metadata.model_copy(update={"strategy": strat})
    return EmbeddingMatrix(result, metadata)
