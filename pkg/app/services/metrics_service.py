"""
Tokenizer and generated-text metrics: fertility, vocabulary composition,
Non-Existing Words Ratio and token adoption.

Corpus-level counts are reduced as integers; division happens once at the
end, so results do not depend on document order or parallelism.
"""
import csv
import io
import logging
import unicodedata
from collections import Counter
from typing import Iterable, Optional, Sequence, Union

from app.exceptions import DataError
from app.models.categories import Category, CategoryMap
from app.models.rulepack import WordSet
from app.models.tokenizer import TokenClass, TokenizerModel, TokenKind, TokenSequence
from app.schemas.metrics import (
    AdoptionReport,
    AdoptionSlice,
    FertilityReport,
    NewrConfig,
    NewrReport,
    ParityReport,
    VocabStats,
)
from app.schemas.text import SplitConfig
from app.services.text_service import iter_word_chars, split_words
from app.services.tokenizer_service import classify_token, tokenize
from app.utils.datafiles import sha256_text
from app.utils.parallel import map_ordered
from app.utils.tfv1 import model_fingerprint

logger = logging.getLogger(__name__)

CHUNK_LINES = 2000
SENTENCE_FINAL = ".!?…؟"


class EmptyInputError(DataError):
    """Raised when a metric is asked to score input with no words or tokens."""
    pass


class UnknownTokenError(DataError):
    """Raised when a token id is not covered by the category map."""
    pass


# ---------------------------------------------------------------------------
# Fertility
# ---------------------------------------------------------------------------

def _count_chunk(args: tuple[TokenizerModel, list[str], SplitConfig]) -> tuple[int, int]:
    model, lines, split_cfg = args
    tokens = words = 0
    for line in lines:
        tokens += len(tokenize(model, line))
        words += len(split_words(line, split_cfg))
    return tokens, words


def fertility(
    model: TokenizerModel,
    corpus: Iterable[str],
    split_cfg: SplitConfig = SplitConfig(),
    threads: Optional[int] = 1,
) -> FertilityReport:
    """
    Tokens per word over a corpus of documents (one per line).

    Raises:
        EmptyInputError: If the corpus holds no words
    """
    lines = [line for line in corpus]
    chunks = [(model, lines[k:k + CHUNK_LINES], split_cfg) for k in range(0, len(lines), CHUNK_LINES)]
    counts = map_ordered(_count_chunk, chunks, threads)
    token_count = sum(t for t, _ in counts)
    word_count = sum(w for _, w in counts)
    if word_count == 0:
        raise EmptyInputError("Cannot compute fertility of a corpus without words")

    report = FertilityReport(
        token_count=token_count,
        word_count=word_count,
        fertility=token_count / word_count,
        documents=len(lines),
        corpus_id=sha256_text("\n".join(lines)),
        tokenizer_hash=model_fingerprint(model),
    )
    logger.info(f"Fertility {report.fertility:.4f} ({token_count} tokens / {word_count} words)")
    return report


def fertility_parity(
    model: TokenizerModel,
    english: Iterable[str],
    target: Iterable[str],
    split_cfg: SplitConfig = SplitConfig(),
    threads: Optional[int] = 1,
) -> ParityReport:
    """Target fertility divided by English fertility on parallel corpora; 1.0 is parity."""
    english_report = fertility(model, english, split_cfg, threads)
    target_report = fertility(model, target, split_cfg, threads)
    return ParityReport(
        english=english_report,
        target=target_report,
        parity=target_report.fertility / english_report.fertility,
    )


def vocab_stats(model: TokenizerModel, alphabet: frozenset[str]) -> VocabStats:
    """
    Partition the vocabulary.

    A target piece is a normal piece made only of target-alphabet characters
    (the boundary marker aside) with at least one letter.
    """
    counts = Counter()
    marker = model.marker
    for entry in model.entries:
        if entry.kind is TokenKind.NORMAL:
            chars = [ch for ch in entry.piece if ch != marker]
            if chars and all(ch in alphabet for ch in chars) and any(ch.isalpha() for ch in chars):
                counts["target"] += 1
                continue
        token_class = classify_token(entry, marker)
        counts[token_class.value] += 1
    return VocabStats(
        vocab_size=model.vocab_size,
        target=counts["target"],
        english=counts[TokenClass.ENGLISH.value],
        byte=counts[TokenClass.BYTE.value],
        control=counts[TokenClass.CONTROL.value],
        other=counts[TokenClass.OTHER.value],
    )


# ---------------------------------------------------------------------------
# NEWR
# ---------------------------------------------------------------------------

def _is_number(word: str) -> bool:
    return any(unicodedata.category(ch)[0] == "N" for ch in word) and not any(ch.isalpha() for ch in word)


def _is_punctuation(word: str) -> bool:
    return all(unicodedata.category(ch)[0] in "PS" for ch in word)


def _is_foreign(word: str, alphabet: frozenset[str]) -> bool:
    return any(ch.isalpha() and ch not in alphabet for ch in word)


def newr(
    generated: str,
    words: WordSet,
    cfg: NewrConfig = NewrConfig(),
    alphabet: Optional[frozenset[str]] = None,
    split_cfg: SplitConfig = SplitConfig(),
) -> NewrReport:
    """
    Fraction of counted words of generated text missing from the word set.

    Raises:
        EmptyInputError: If no word is left to count
        DataError: If foreign words are excluded but no alphabet is given
    """
    if cfg.exclude_foreign and alphabet is None:
        raise DataError("exclude_foreign needs a target alphabet")

    sentence_initial = True
    total = excluded = 0
    counted = []
    for word, start, end in iter_word_chars(generated, split_cfg):
        total += 1
        initial, sentence_initial = sentence_initial, _ends_sentence(generated, end)
        if cfg.exclude_numbers and _is_number(word):
            excluded += 1
        elif cfg.exclude_punctuation and _is_punctuation(word):
            excluded += 1
        elif cfg.exclude_foreign and _is_foreign(word, alphabet):
            excluded += 1
        elif cfg.exclude_proper_names and not initial and word[:1].isupper():
            excluded += 1
        else:
            counted.append(word)

    if not counted:
        raise EmptyInputError("Cannot compute NEWR: no countable words")
    offending = [word for word in counted if word not in words]
    return NewrReport(
        ratio=len(offending) / len(counted),
        total_words=total,
        counted_words=len(counted),
        missing_words=len(offending),
        excluded_words=excluded,
        offending=offending,
        wordset_source=words.source,
    )


def _ends_sentence(text: str, end: int) -> bool:
    """True if the word ends its line or is followed by sentence-final punctuation."""
    rest = text[end:end + 64]
    if not rest.strip(" \t") or rest.lstrip(" \t").startswith("\n"):
        return True
    run = rest.split(None, 1)[0] if not rest[0].isspace() else ""
    return any(ch in SENTENCE_FINAL for ch in run)


# ---------------------------------------------------------------------------
# Token adoption
# ---------------------------------------------------------------------------

def categorize_stream(
    tokens: Union[TokenSequence, Sequence[int]],
    category_map: CategoryMap,
    slice_name: str = "all",
) -> AdoptionSlice:
    """
    Category fractions of one slice of a token stream.

    Raises:
        UnknownTokenError: If an id is outside the map
        EmptyInputError: If the slice holds no tokens
    """
    ids = tokens.ids if isinstance(tokens, TokenSequence) else list(tokens)
    if not ids:
        raise EmptyInputError(f"Slice '{slice_name}' holds no tokens")
    counts = Counter()
    for token_id in ids:
        if not 0 <= token_id < len(category_map):
            raise UnknownTokenError(f"Token id {token_id} in slice '{slice_name}' is outside the category map")
        counts[category_map[token_id]] += 1
    return AdoptionSlice(
        slice=slice_name,
        tokens=len(ids),
        counts={c.value: counts.get(c, 0) for c in Category},
        fractions={c.value: counts.get(c, 0) / len(ids) for c in Category},
    )


def adoption_report(
    slices: Iterable[tuple[str, Sequence[int]]],
    category_map: CategoryMap,
) -> AdoptionReport:
    """Per-slice fractions plus the fractions over all slices together."""
    per_slice = [categorize_stream(ids, category_map, name) for name, ids in slices]
    if not per_slice:
        raise EmptyInputError("Token stream holds no slices")
    counts = Counter()
    for item in per_slice:
        counts.update(item.counts)
    total = sum(item.tokens for item in per_slice)
    overall = AdoptionSlice(
        slice="total",
        tokens=total,
        counts={c.value: counts.get(c.value, 0) for c in Category},
        fractions={c.value: counts.get(c.value, 0) / total for c in Category},
    )
    return AdoptionReport(slices=per_slice, total=overall)


ADOPTION_COLUMNS = {
    "existing": Category.EXISTING_TARGET,
    "new": Category.NEW_TARGET,
    "english": Category.ENGLISH,
    "byte": Category.BYTE,
    "other": Category.OTHER,
}


def adoption_csv(report: AdoptionReport) -> str:
    """CSV with columns `slice,existing,new,english,byte,other`."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["slice", *ADOPTION_COLUMNS])
    for item in report.slices:
        writer.writerow([item.slice, *(repr(item.fractions[c.value]) for c in ADOPTION_COLUMNS.values())])
    return buffer.getvalue()
