"""Tests for text preparation: normalization, word splitting and light stemming."""
import random

import pytest

from app.schemas.text import NormalizationConfig, SplitConfig, StemmerConfig
from app.services.text_service import (
    TextDecodeError,
    arabic_stemmer_config,
    fold_key,
    iter_corpus,
    light_stem,
    normalize,
    split_words,
    stem_text,
)


def test_normalize_strips_tags():
    """Test HTML tags are removed."""
    assert normalize("<b>кіт</b>") == "кіт"
    assert normalize("<p class=\"x\">a<br/>b</p><!-- note -->") == "ab"


def test_normalize_composes_nfc():
    """Test decomposed text is composed when accents are not folded."""
    cfg = NormalizationConfig(fold_accents=False)
    assert normalize("é", cfg) == "é"


def test_normalize_folds_stress_marks():
    """Test Ukrainian stress marks are folded onto the base letter."""
    assert normalize("заво́дити") == "заводити"
    assert normalize("á") == "a"


def test_normalize_keeps_script_changing_marks():
    """Test marks outside the fold table survive."""
    assert normalize("її") == "її"
    assert normalize("й") == "й"


def test_normalize_is_idempotent():
    """Test normalizing twice equals normalizing once for every config."""
    rng = random.Random(7)
    alphabet = ["a", "é", "é", "<i>", "</i>", " ", "і", "́", "<", ">", "ї", "x"]
    for strip_html in (True, False):
        for fold in (True, False):
            for nfc in (True, False):
                cfg = NormalizationConfig(strip_html=strip_html, fold_accents=fold, unicode_nfc=nfc)
                for _ in range(50):
                    text = "".join(rng.choice(alphabet) for _ in range(rng.randint(0, 20)))
                    once = normalize(text, cfg)
                    assert normalize(once, cfg) == once


def test_normalize_bytes_invalid_utf8():
    """Test invalid UTF-8 raises an error naming the byte offset."""
    with pytest.raises(TextDecodeError) as excinfo:
        normalize(b"abc\xffdef")
    assert excinfo.value.offset == 3
    assert "byte offset 3" in str(excinfo.value)


def test_split_words_empty():
    """Test empty text gives no words."""
    assert split_words("") == []


def test_split_words_simple():
    """Test words and byte spans of plain text."""
    words = split_words("hello world")
    assert [w.text for w in words] == ["hello", "world"]
    assert [(w.start, w.end) for w in words] == [(0, 5), (6, 11)]


def test_split_words_byte_spans():
    """Test spans are UTF-8 byte offsets."""
    words = split_words("кіт і пес")
    assert [w.text for w in words] == ["кіт", "і", "пес"]
    assert [(w.start, w.end) for w in words] == [(0, 6), (7, 9), (10, 16)]


def test_split_words_detaches_punctuation():
    """Test edge punctuation is detached and dropped by default."""
    words = split_words("«Привіт», — сказав він.")
    assert [w.text for w in words] == ["Привіт", "сказав", "він"]


def test_split_words_keep_punctuation():
    """Test detached punctuation becomes words when kept."""
    words = split_words("Hi, there!", SplitConfig(keep_punctuation=True))
    assert [w.text for w in words] == ["Hi", ",", "there", "!"]


def test_split_words_matches_whitespace_split():
    """Test the word count equals a naive split on text without punctuation."""
    rng = random.Random(11)
    vocabulary = ["кіт", "dog", "ქართული", "بيت", "12", "x"]
    for _ in range(100):
        text = "".join(rng.choice(vocabulary) + rng.choice([" ", "  ", "\t", "\n"]) for _ in range(rng.randint(0, 30)))
        words = split_words(text)
        assert [w.text for w in words] == text.split()
        assert all(a.end <= b.start for a, b in zip(words, words[1:]))


def test_light_stem_definite_article():
    """Test the definite article is stripped as a prefix."""
    cfg = arabic_stemmer_config()
    result = light_stem("الكتاب", cfg)
    assert result.prefixes == ("ال",)
    assert result.stem == "كتاب"
    assert result.affixes == ["ال"]


def test_light_stem_no_affix():
    """Test a word with no listed affix passes through."""
    cfg = StemmerConfig(prefix_list=("ال",), suffix_list=("ها",))
    result = light_stem("كتب", cfg)
    assert result.stem == "كتب"
    assert result.affixes == []


def test_light_stem_min_stem_len():
    """Test an affix is kept when the remainder would be too short."""
    cfg = StemmerConfig(prefix_list=("ال",), min_stem_len=3)
    assert light_stem("الكل", cfg).stem == "الكل"
    assert light_stem("ال", cfg).stem == "ال"


def test_light_stem_longest_match_first():
    """Test the longest listed prefix wins."""
    cfg = StemmerConfig(prefix_list=("ال", "وال"), suffix_list=("ه", "ها"))
    result = light_stem("والكتابها", cfg)
    assert result.prefixes == ("وال",)
    assert result.suffixes == ("ها",)
    assert result.stem == "كتاب"


def test_light_stem_round_trip():
    """Test prefixes + stem + suffixes rebuild every word."""
    cfg = arabic_stemmer_config()
    rng = random.Random(3)
    letters = "ابتثجحخدذرزسشصضطظعغفقكلمنهوية"
    for _ in range(300):
        word = "".join(rng.choice(letters) for _ in range(rng.randint(1, 9)))
        if rng.random() < 0.5:
            word = rng.choice(cfg.prefix_list) + word
        if rng.random() < 0.5:
            word = word + rng.choice(cfg.suffix_list)
        assert light_stem(word, cfg).join() == word


def test_light_stem_disabled():
    """Test nothing is stripped when stemming is disabled."""
    cfg = StemmerConfig(enabled=False, prefix_list=("ال",))
    assert light_stem("الكتاب", cfg).stem == "الكتاب"


def test_stem_text_separates_affixes():
    """Test stem_text writes affixes as separate words."""
    cfg = StemmerConfig(prefix_list=("ال",), suffix_list=())
    assert stem_text("الكتاب جميل.", cfg) == "ال كتاب جميل."


def test_fold_key_case_and_accents():
    """Test lookup keys fold case and stress marks."""
    assert fold_key("Ра́ЗОМ") == fold_key("разом")


def test_iter_corpus_directory(tmp_path):
    """Test a directory corpus is read file by file in name order."""
    (tmp_path / "b.txt").write_text("second\n", encoding="utf-8")
    (tmp_path / "a.txt").write_text("first\nline two\n", encoding="utf-8")
    (tmp_path / "skip.md").write_text("ignored\n", encoding="utf-8")
    assert list(iter_corpus(tmp_path)) == ["first", "line two", "second"]


def test_iter_corpus_invalid_utf8(tmp_path):
    """Test the decode error names the file offset."""
    path = tmp_path / "bad.txt"
    path.write_bytes(b"ok\nab\xc3(\n")
    with pytest.raises(TextDecodeError) as excinfo:
        list(iter_corpus(path))
    assert excinfo.value.offset == 5
