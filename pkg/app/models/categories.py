import enum
from collections import Counter
from dataclasses import dataclass
from typing import Iterator


class Category(str, enum.Enum):
    """Token adoption categories, in report column order."""
    EXISTING_TARGET = "existing_target"
    NEW_TARGET = "new_target"
    ENGLISH = "english"
    BYTE = "byte"
    OTHER = "other"


@dataclass(frozen=True)
class CategoryMap:
    """Total map from every id of a merged model to its adoption category."""
    categories: tuple[Category, ...]

    def __len__(self) -> int:
        return len(self.categories)

    def __getitem__(self, token_id: int) -> Category:
        return self.categories[token_id]

    def __iter__(self) -> Iterator[Category]:
        return iter(self.categories)

    def histogram(self) -> dict[str, int]:
        counts = Counter(self.categories)
        return {category.value: counts.get(category, 0) for category in Category}
