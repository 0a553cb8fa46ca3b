from __future__ import annotations

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List, Sequence, TypeVar

from semicon.errors import ConfigError
from semicon.utils.logging_utils import ProgressCb, emit_progress

log = logging.getLogger("semicon.pool")

THREADS_ENV = "SEMICON_THREADS"

T = TypeVar("T")
R = TypeVar("R")


def thread_count() -> int:
    """SEMICON_THREADS, or os.cpu_count() when unset / 0."""
    raw = os.environ.get(THREADS_ENV, "").strip()
    try:
        n = int(raw) if raw else 0
    except ValueError:
        raise ConfigError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None
    if n < 0:
        raise ConfigError(f"{THREADS_ENV} must be >= 0, got {n}")
    return n or (os.cpu_count() or 1)


def parallel_map(fn: Callable[[T], R], items: Sequence[T], progress_cb: ProgressCb = None) -> List[R]:
    """fn over items on a thread pool; results come back in input order."""
    items = list(items)
    if not items:
        return []
    workers = min(thread_count(), len(items))
    if workers == 1:
        out = []
        for i, item in enumerate(items, 1):
            out.append(fn(item))
            emit_progress(progress_cb, i * 100 // len(items), log)
        return out
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(fn, item) for item in items]
        out = []
        for i, fut in enumerate(futures, 1):
            out.append(fut.result())
            emit_progress(progress_cb, i * 100 // len(items), log)
        return out
