"""Worker-count policy and an order-preserving parallel map."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, TypeVar

T = TypeVar("T")
R = TypeVar("R")

ENV_THREADS = "LACELAB_THREADS"


def worker_count(requested: int | None = None) -> int:
    """Workers to use: ``requested``, else ``$LACELAB_THREADS`` (0 = all cores)."""
    if requested is None:
        raw = os.environ.get(ENV_THREADS, "0").strip() or "0"
        try:
            requested = int(raw)
        except ValueError as exc:
            raise ValueError(f"{ENV_THREADS} must be an integer, got {raw!r}") from exc
    if requested < 0:
        raise ValueError("thread count must be >= 0")
    return requested or (os.cpu_count() or 1)


def pmap(fn: Callable[[T], R], items: Iterable[T], workers: int | None = None) -> list[R]:
    """``[fn(x) for x in items]``, possibly on threads; results keep input order."""
    items = list(items)
    n = min(worker_count(workers), max(1, len(items)))
    if n == 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as ex:
        return list(ex.map(fn, items))
