from typing import Optional

import numpy as np

from app.schemas.embedding import EmbeddingMetadata
from app.utils.emb1 import EmbeddingFormatError, check_finite


class EmbeddingMatrix:
    """
    Embedding rows aligned with a tokenizer: row i belongs to token id i.

    Values are float32 and always finite. The array is made read-only;
    derived matrices are new instances.
    """

    def __init__(self, values: np.ndarray, metadata: Optional[EmbeddingMetadata] = None):
        values = np.array(values, dtype=np.float32, copy=True)
        if values.ndim != 2:
            raise EmbeddingFormatError(f"expected a 2-d matrix, got shape {values.shape}")
        check_finite(values)
        values.setflags(write=False)
        self.values = values
        self.metadata = metadata or EmbeddingMetadata()

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def dims(self) -> int:
        return self.values.shape[1]

    def __len__(self) -> int:
        return self.rows

    def __getitem__(self, token_id: int) -> np.ndarray:
        return self.values[token_id]

    def __repr__(self):
        return f"<EmbeddingMatrix(rows={self.rows}, dims={self.dims})>"
