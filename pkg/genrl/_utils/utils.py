import os
from collections.abc import Callable, Iterable, Sequence
from concurrent.futures import ThreadPoolExecutor
from typing import TypeVar

import numpy as np

T = TypeVar("T")
R = TypeVar("R")


def coalesce(*args):
    return next((a for a in args if a is not None), None)


def thread_count() -> int:
    """
    Number of worker threads for parallel rollouts.

    Read from GENRL_THREADS, falling back to the CPU count.
    """
    env_value = os.environ.get("GENRL_THREADS")
    if env_value is not None and env_value.strip().isdigit() and int(env_value) > 0:
        return int(env_value)
    return os.cpu_count() or 1


def rng_for(seed: int, *stream: int) -> np.random.Generator:
    """
    A random generator for one named stream of a seeded run.

    Streams are keyed by integers (e.g. iteration and direction index), so the numbers
    drawn never depend on the order in which work is scheduled.
    """
    return np.random.default_rng(np.random.SeedSequence([seed, *stream]))


def parallel_map(func: Callable[[T], R], items: Sequence[T] | Iterable[T]) -> list[R]:
    """
    Map `func` over `items` on a thread pool, keeping the input order.

    Each call must be independent: callers give every item its own random stream.
    """
    items = list(items)
    workers = min(thread_count(), len(items))
    if workers <= 1:
        return [func(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, items))
