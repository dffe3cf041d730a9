import os
from pathlib import Path
from typing import Iterable, Mapping, Union

import pytest

from app.config import get_settings
from app.models.tokenizer import TokenEntry, TokenizerModel, TokenKind, byte_piece
from app.schemas.tokenizer import ModelMetadata
from app.services.rulepack_service import rulepack_for

Pieces = Union[Mapping[str, float], Iterable[tuple[str, float]]]


def make_model(
    pieces: Pieces,
    controls: tuple[str, ...] = ("<unk>", "<s>"),
    unused: int = 0,
    name: str = "toy",
    languages: tuple[str, ...] = (),
    add_dummy_prefix: bool = True,
) -> TokenizerModel:
    """Build a model laid out as: controls, the 256 byte pieces, normal pieces, unused slots."""
    items = list(pieces.items()) if isinstance(pieces, Mapping) else list(pieces)
    entries = [TokenEntry(i, piece, 0.0, TokenKind.CONTROL) for i, piece in enumerate(controls)]
    base = len(entries)
    entries.extend(TokenEntry(base + v, byte_piece(v), 0.0, TokenKind.BYTE) for v in range(256))
    for piece, score in items:
        entries.append(TokenEntry(len(entries), piece, score))
    for k in range(unused):
        entries.append(TokenEntry(len(entries), f"<unused{k}>", 0.0, TokenKind.UNUSED))
    metadata = ModelMetadata(name=name, languages=list(languages), add_dummy_prefix=add_dummy_prefix)
    return TokenizerModel(entries, metadata)


@pytest.fixture
def model_factory():
    """Factory for toy models with byte and control entries installed."""
    return make_model


@pytest.fixture(autouse=True)
def isolated_settings():
    """Restore BITOK_ variables and drop cached settings after each test."""
    saved = {key: value for key, value in os.environ.items() if key.startswith("BITOK_")}
    get_settings.cache_clear()
    yield
    for key in [key for key in os.environ if key.startswith("BITOK_")]:
        if key not in saved:
            del os.environ[key]
    os.environ.update(saved)
    get_settings.cache_clear()


@pytest.fixture
def celery_eager():
    """Run Celery tasks in-process."""
    from app.tasks.celery_app import celery_app

    previous = celery_app.conf.task_always_eager
    celery_app.conf.task_always_eager = True
    yield celery_app
    celery_app.conf.task_always_eager = previous


@pytest.fixture(scope="session")
def uk_pack():
    return rulepack_for("uk")


@pytest.fixture
def artifact_dir(tmp_path) -> Path:
    """Temporary directory for artifacts written by a test."""
    path = tmp_path / "artifacts"
    path.mkdir()
    return path
