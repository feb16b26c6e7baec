"""Ordered map over a thread pool.

Work items are indexed up front and results are gathered back in input
order, so output is identical for any worker count.
"""

import asyncio
import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List, Sequence, TypeVar

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


async def map_ordered_async(fn: Callable[[T], R], items: Sequence[T], workers: int = 1) -> List[R]:
    """Run ``fn`` over ``items`` in an executor; results keep input order."""
    loop = asyncio.get_running_loop()
    with ThreadPoolExecutor(max_workers=max(1, workers), thread_name_prefix="swformer") as executor:
        futures = [loop.run_in_executor(executor, fn, item) for item in items]
        return list(await asyncio.gather(*futures))


def map_ordered(fn: Callable[[T], R], items: Sequence[T], workers: int = 1) -> List[R]:
    """Blocking form of :func:`map_ordered_async`; one worker runs inline."""
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    logger.debug("Fanning %d items over %d workers", len(items), workers)
    return asyncio.run(map_ordered_async(fn, items, workers))
