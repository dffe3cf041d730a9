import logging
import os
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Iterable, Optional, TypeVar

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


def resolve_threads(threads: Optional[int]) -> int:
    """Worker count; 0 or None means every available CPU."""
    if not threads:
        return os.cpu_count() or 1
    return max(1, threads)


def map_ordered(fn: Callable[[T], R], items: Iterable[T], threads: Optional[int] = 1) -> list[R]:
    """
    Apply `fn` to every item, returning results in input order.

    Runs inline for a single worker, otherwise in a process pool; `fn` must
    then be a picklable top-level function.
    """
    items = list(items)
    workers = min(resolve_threads(threads), len(items))
    if workers <= 1:
        return [fn(item) for item in items]
    logger.debug(f"Mapping {len(items)} item(s) over {workers} processes")
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
