"""
Code Switching Word Ratio.

A word is suspicious when it holds a character that is not a letter of the
target alphabet, a digit, a punctuation mark or a symbol. A suspicious word
is forgiven when a rule of the pack covers it:

    - a regex rule match (URLs, hashtags, Roman numerals, formulas, quotes...)
    - a file name whose extension is a known file format
    - a gazetteer phrase (Latin phrases, encodings, medical terms...)
    - an entity recognizer plugin

Sentences with no target letter at all and at least one unforgiven word
count every one of their words as violations.
"""
import bisect
import logging
import unicodedata
from typing import Optional

import regex

from app.models.rulepack import GazetteerRecognizer, RulePack
from app.schemas.metrics import CswrReport, WordVerdict
from app.schemas.text import SplitConfig
from app.services.metrics_service import EmptyInputError
from app.services.text_service import fold_key, iter_word_chars

logger = logging.getLogger(__name__)

SENTENCE_BREAK = regex.compile(r"(?<=[.!?…؟።])\s+|\n+")
FILENAME = regex.compile(r"^[^\s/\\]+\.([\p{L}\p{N}]{1,10})$")
FILE_FORMATS = "file_formats"

TARGET, NEUTRAL, FOREIGN = "target", "neutral", "foreign"


def char_class(ch: str, alphabet: frozenset[str]) -> str:
    """Target letter, neutral (digit, punctuation, symbol or emoji) or foreign."""
    if ch in alphabet:
        return TARGET
    if unicodedata.category(ch)[0] in "NPS":
        return NEUTRAL
    return FOREIGN


def _script_runs(word: str, start: int, alphabet: frozenset[str]):
    """Split a word where it switches between target and foreign letters."""
    runs = []
    run_start = 0
    current: Optional[str] = None
    for i, ch in enumerate(word):
        kind = char_class(ch, alphabet)
        if kind == NEUTRAL:
            continue
        if current is not None and kind != current:
            runs.append((word[run_start:i], start + run_start, start + i))
            run_start = i
        current = kind
    runs.append((word[run_start:], start + run_start, start + len(word)))
    return runs


def _sentence_starts(text: str) -> list[int]:
    return [0] + [m.end() for m in SENTENCE_BREAK.finditer(text)]


def _regex_spans(text: str, pack: RulePack) -> list[tuple[int, int, str]]:
    spans = []
    for name, pattern in pack.regex_rules:
        for match in pattern.finditer(text):
            if match.end() > match.start():
                spans.append((match.start(), match.end(), name))
    return spans


def _covering_rule(start: int, end: int, spans: list[tuple[int, int, str]]) -> Optional[str]:
    for span_start, span_end, name in spans:
        if span_start <= start and end <= span_end:
            return name
    return None


def cswr(text: str, pack: RulePack, split_cfg: SplitConfig = SplitConfig()) -> CswrReport:
    """
    Code Switching Word Ratio of normalized text.

    Returns:
        Report with the ratio and a verdict per word, in text order

    Raises:
        EmptyInputError: If the text holds no words
    """
    alphabet = pack.alphabet
    words = []
    for word, start, end in iter_word_chars(text, split_cfg):
        if pack.split_script_runs:
            words.extend(_script_runs(word, start, alphabet))
        else:
            words.append((word, start, end))
    if not words:
        raise EmptyInputError("Cannot compute CSWR of text without words")

    classes = [{char_class(ch, alphabet) for ch in word} for word, _, _ in words]
    keys = [fold_key(word) for word, _, _ in words]

    # word index -> rule that forgives it
    forgiven: dict[int, str] = {}
    spans = _regex_spans(text, pack)
    formats = pack.gazetteers.get(FILE_FORMATS)
    for index, (word, start, end) in enumerate(words):
        if FOREIGN not in classes[index]:
            continue
        rule = _covering_rule(start, end, spans)
        if rule is None and formats is not None:
            match = FILENAME.match(word)
            if match and match.group(1) in formats:
                rule = "filename"
        if rule is not None:
            forgiven[index] = rule
    claimed = {r.gazetteer.name for r in pack.recognizers if isinstance(r, GazetteerRecognizer)}
    for name, gazetteer in sorted(pack.gazetteers.items()):
        if name in claimed:
            continue
        for first, last in gazetteer.match(keys):
            for index in range(first, last):
                forgiven.setdefault(index, f"gazetteer:{name}")
    plain = [word for word, _, _ in words]
    for recognizer in pack.recognizers:
        for index in recognizer.recognize(plain):
            forgiven.setdefault(index, recognizer.name)

    verdicts = []
    for index, (word, start, end) in enumerate(words):
        if FOREIGN not in classes[index]:
            verdict = TARGET if TARGET in classes[index] else NEUTRAL
            verdicts.append(WordVerdict(word=word, start=start, end=end, verdict=verdict))
        elif index in forgiven:
            verdicts.append(WordVerdict(word=word, start=start, end=end, verdict="whitelisted", rule=forgiven[index]))
        else:
            verdicts.append(WordVerdict(word=word, start=start, end=end, verdict="violation"))

    # sentences without any target letter
    starts = _sentence_starts(text)
    sentences: dict[int, list[int]] = {}
    for index, (_, start, _) in enumerate(words):
        sentences.setdefault(bisect.bisect_right(starts, start) - 1, []).append(index)
    for members in sentences.values():
        has_target = any(TARGET in classes[i] for i in members)
        has_violation = any(verdicts[i].verdict == "violation" for i in members)
        if not has_target and has_violation:
            for i in members:
                if verdicts[i].verdict != "violation":
                    verdicts[i] = verdicts[i].model_copy(update={"verdict": "sentence_violation"})

    violations = sum(1 for v in verdicts if v.verdict in ("violation", "sentence_violation"))
    whitelisted = sum(1 for v in verdicts if v.verdict == "whitelisted")
    ratio = violations / len(verdicts)
    logger.debug(f"CSWR {pack.language}: {violations}/{len(verdicts)} word(s) violate")
    return CswrReport(
        language=pack.language,
        ratio=ratio,
        total_words=len(verdicts),
        violations=violations,
        whitelisted=whitelisted,
        verdicts=verdicts,
    )
