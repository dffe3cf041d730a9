from typing import NamedTuple


class Word(NamedTuple):
    """
    One word of a WordStream.

    Attributes:
        text: The word itself (never empty)
        start: Byte offset of the first byte in the UTF-8 source
        end: Byte offset one past the last byte
    """
    text: str
    start: int
    end: int


# Ordered, non-overlapping, strictly increasing spans
WordStream = list[Word]


class StemResult(NamedTuple):
    """Light stemming result; prefixes + stem + suffixes rebuild the word."""
    stem: str
    prefixes: tuple[str, ...] = ()
    suffixes: tuple[str, ...] = ()

    @property
    def affixes(self) -> list[str]:
        """Stripped affixes in their original order."""
        return [*self.prefixes, *self.suffixes]

    def join(self) -> str:
        return "".join(self.prefixes) + self.stem + "".join(self.suffixes)
