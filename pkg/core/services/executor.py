import logging
from collections.abc import Callable, Sequence
from concurrent.futures import ThreadPoolExecutor, as_completed
from typing import TypeVar

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


def ordered_map(fn: Callable[[T], R], items: Sequence[T], threads: int = 1) -> list[R]:
    """
    Apply `fn` to every item, fanning out over a thread pool when threads > 1.

    Results come back in the order of `items` whatever the completion order,
    so callers see the same output for any thread count.
    """
    if threads <= 1 or len(items) <= 1:
        return [fn(item) for item in items]

    results: list[tuple[int, R]] = []
    with ThreadPoolExecutor(max_workers=threads) as executor:
        futures = {executor.submit(fn, item): index for index, item in enumerate(items)}

        for future in as_completed(futures):
            index = futures[future]
            try:
                results.append((index, future.result()))
            except Exception:
                for pending in futures:
                    pending.cancel()
                logger.error(f"Work item {index} failed")
                raise

    results.sort(key=lambda x: x[0])
    return [result for _, result in results]
