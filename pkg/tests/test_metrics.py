"""Tests for fertility, vocabulary composition, NEWR and token adoption."""
import pytest

from app.exceptions import DataError
from app.models.categories import Category, CategoryMap
from app.models.rulepack import WordSet
from app.schemas.metrics import NewrConfig
from app.services.metrics_service import (
    EmptyInputError,
    UnknownTokenError,
    adoption_csv,
    adoption_report,
    categorize_stream,
    fertility,
    fertility_parity,
    newr,
    vocab_stats,
)
from app.utils.tfv1 import model_fingerprint

ADOPTION_MAP = CategoryMap((
    Category.EXISTING_TARGET, Category.NEW_TARGET, Category.ENGLISH, Category.BYTE, Category.OTHER,
))
ADOPTION_IDS = [0] * 35 + [1] * 40 + [2] * 20 + [3] * 4 + [4]


@pytest.fixture
def word_model(model_factory):
    return model_factory({"▁hello": -1.0, "▁world": -1.0, "▁кі": -2.0, "т": -2.0})


def test_fertility_whole_words(word_model):
    """Test a corpus of known words has fertility 1.0."""
    report = fertility(word_model, ["hello world", "hello"])
    assert (report.token_count, report.word_count) == (3, 3)
    assert report.fertility == 1.0
    assert report.documents == 2
    assert report.tokenizer_hash == model_fingerprint(word_model)


def test_fertility_is_order_independent(word_model):
    """Test shuffling documents does not change the counts."""
    first = fertility(word_model, ["hello world", "кіт", "world"])
    second = fertility(word_model, ["world", "hello world", "кіт"])
    assert (first.token_count, first.word_count) == (second.token_count, second.word_count)


def test_fertility_empty_corpus(word_model):
    """Test a corpus without words is rejected."""
    with pytest.raises(EmptyInputError):
        fertility(word_model, ["", "   "])


def test_parity(word_model):
    """Test parity divides target fertility by English fertility."""
    report = fertility_parity(word_model, ["hello world"], ["кіт"])
    assert report.english.fertility == 1.0
    assert report.target.fertility == 2.0
    assert report.parity == 2.0


def test_vocab_stats_partition(model_factory, uk_pack):
    """Test the vocabulary counts add up to the vocabulary size."""
    model = model_factory({"▁кіт": -1.0, "▁the": -1.0, "▁é": -1.0})
    stats = vocab_stats(model, uk_pack.alphabet)
    assert (stats.target, stats.english, stats.byte, stats.control, stats.other) == (1, 1, 256, 2, 1)
    assert stats.target + stats.english + stats.byte + stats.control + stats.other == stats.vocab_size


def test_newr_fixture():
    """Test three invented words out of ten counted give 0.3."""
    words = WordSet(["кіт", "спить", "а", "пес", "бігає", "і", "мишка"], source="toy")
    report = newr("Кіт спить, а пес бігає і мурчить. Мишка глякає сонцегрій 42.", words)
    assert report.ratio == 0.3
    assert (report.total_words, report.counted_words, report.excluded_words) == (11, 10, 1)
    assert report.offending == ["мурчить", "глякає", "сонцегрій"]
    assert report.wordset_source == "toy"


def test_newr_excludes_proper_names():
    """Test capitalized words inside a sentence leave the denominator."""
    words = WordSet(["кіт", "бачив"])
    report = newr("кіт бачив Петра", words, NewrConfig(exclude_proper_names=True))
    assert report.ratio == 0.0
    assert report.excluded_words == 1


def test_newr_sentence_initial_capital_is_counted():
    """Test a capitalized first word is not treated as a proper name."""
    report = newr("Петро спить", WordSet(["спить"]), NewrConfig(exclude_proper_names=True))
    assert report.offending == ["Петро"]


def test_newr_excludes_foreign(uk_pack):
    """Test foreign-script words are skipped when asked."""
    report = newr("кіт smartphone", WordSet(["кіт"]), NewrConfig(exclude_foreign=True), uk_pack.alphabet)
    assert report.ratio == 0.0
    assert report.counted_words == 1


def test_newr_foreign_needs_alphabet():
    """Test excluding foreign words without an alphabet is an error."""
    with pytest.raises(DataError):
        newr("кіт", WordSet(["кіт"]), NewrConfig(exclude_foreign=True))


def test_newr_nothing_to_count():
    """Test text with only numbers and punctuation is rejected."""
    with pytest.raises(EmptyInputError):
        newr("42 !", WordSet())


def test_wordset_folds_case():
    """Test word set membership ignores case."""
    assert "КІТ" in WordSet(["кіт"])


def test_adoption_fractions():
    """Test category fractions of the reference stream."""
    item = categorize_stream(ADOPTION_IDS, ADOPTION_MAP)
    assert item.tokens == 100
    assert item.fractions == {
        "existing_target": 0.35, "new_target": 0.4, "english": 0.2, "byte": 0.04, "other": 0.01,
    }
    assert sum(item.counts.values()) == item.tokens


def test_adoption_csv():
    """Test the CSV has one row per slice with shortest decimals."""
    report = adoption_report([("all", ADOPTION_IDS)], ADOPTION_MAP)
    assert adoption_csv(report) == "slice,existing,new,english,byte,other\nall,0.35,0.4,0.2,0.04,0.01\n"


def test_adoption_total_over_slices():
    """Test the total row pools tokens of every slice."""
    report = adoption_report([("a", [0, 1]), ("b", [1, 1])], ADOPTION_MAP)
    assert report.total.tokens == 4
    assert report.total.fractions["new_target"] == 0.75


def test_adoption_unknown_token():
    """Test an id outside the category map is rejected."""
    with pytest.raises(UnknownTokenError):
        categorize_stream([0, 5], ADOPTION_MAP)


def test_adoption_empty_slice():
    """Test an empty slice is rejected."""
    with pytest.raises(EmptyInputError):
        categorize_stream([], ADOPTION_MAP, "empty")
