# sosdetect/_parallel.py
# !/usr/bin/env python3

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List, Sequence, TypeVar

T = TypeVar("T")
R = TypeVar("R")


def map_ordered(func: Callable[[T], R], items: Sequence[T], threads: int = 1) -> List[R]:
    """
    Applies `func` to every item, on up to `threads` worker threads, and returns
    the results in input order. threads <= 1 runs serially in the caller.
    """
    if threads <= 1 or len(items) <= 1:
        return [func(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(func, items))
