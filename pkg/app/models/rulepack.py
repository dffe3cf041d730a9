from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Protocol, Sequence, runtime_checkable

import regex

from app.services.text_service import fold_key


@dataclass(frozen=True)
class Gazetteer:
    """
    Normalized phrase list.

    Attributes:
        name: File stem, e.g. `latin_phrases`
        phrases: Each phrase as a tuple of word keys
        size: Number of entries in the source file
    """
    name: str
    phrases: frozenset[tuple[str, ...]] = frozenset()
    size: int = 0

    @property
    def max_words(self) -> int:
        return max((len(p) for p in self.phrases), default=0)

    def __contains__(self, word: str) -> bool:
        return (fold_key(word),) in self.phrases

    def match(self, keys: Sequence[str]) -> list[tuple[int, int]]:
        """Every word range [start, end) whose keys form a phrase; matches may overlap."""
        found = []
        limit = self.max_words
        for i in range(len(keys)):
            for length in range(1, min(limit, len(keys) - i) + 1):
                if tuple(keys[i:i + length]) in self.phrases:
                    found.append((i, i + length))
        return found


@runtime_checkable
class EntityRecognizer(Protocol):
    """Plugin that marks words belonging to named entities."""
    name: str

    def recognize(self, words: Sequence[str]) -> Iterable[int]:
        """Indices of words that are part of an entity."""
        ...


class GazetteerRecognizer:
    """Entity recognizer backed by a proper-name gazetteer."""

    def __init__(self, gazetteer: Gazetteer):
        self.gazetteer = gazetteer
        self.name = f"entity:{gazetteer.name}"

    def recognize(self, words: Sequence[str]) -> Iterable[int]:
        keys = [fold_key(word) for word in words]
        for start, end in self.gazetteer.match(keys):
            yield from range(start, end)


@dataclass
class RulePack:
    """
    Language-specific whitelist for the code-switching metric.

    Attributes:
        language: Language tag
        alphabet: Letters of the target language
        regex_rules: (rule name, compiled pattern) applied to the whole text
        gazetteers: Gazetteer name -> phrases
        recognizers: Entity recognizer plugins
        split_script_runs: Judge target-script and foreign-script runs of one
            word separately
        source: Directory the pack was loaded from
    """
    language: str
    alphabet: frozenset[str]
    regex_rules: list[tuple[str, regex.Pattern]] = field(default_factory=list)
    gazetteers: dict[str, Gazetteer] = field(default_factory=dict)
    recognizers: list[EntityRecognizer] = field(default_factory=list)
    split_script_runs: bool = False
    source: Optional[Path] = None

    def add_recognizer(self, recognizer: EntityRecognizer):
        self.recognizers.append(recognizer)

    def counts(self) -> dict[str, int]:
        return {name: g.size for name, g in sorted(self.gazetteers.items())}

    def __repr__(self):
        return f"<RulePack(language='{self.language}', rules={len(self.regex_rules)}, gazetteers={self.counts()})>"


class WordSet:
    """
    Reference vocabulary for NEWR.

    Membership is tested on accent-folded, NFC, case-folded keys, the same
    normalization text preparation applies.
    """

    def __init__(self, words: Iterable[str] = (), source: str = ""):
        self.keys = frozenset(fold_key(word) for word in words)
        self.source = source

    @property
    def size(self) -> int:
        return len(self.keys)

    def __len__(self) -> int:
        return len(self.keys)

    def __contains__(self, word: str) -> bool:
        return fold_key(word) in self.keys

    def with_words(self, words: Iterable[str]) -> "WordSet":
        extended = WordSet(source=self.source)
        extended.keys = self.keys | {fold_key(word) for word in words}
        return extended
