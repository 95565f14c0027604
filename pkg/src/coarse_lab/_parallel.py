"""Order-preserving fan-out over a thread pool.

``COARSE_LAB_THREADS`` caps the worker count.  Results always come back in
input order, so reductions over them are independent of the worker count.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

from .errors import ConfigError

ENV_VAR = "COARSE_LAB_THREADS"


def worker_count() -> int:
    raw = os.environ.get(ENV_VAR)
    if raw is None or raw == "":
        return min(4, os.cpu_count() or 1)
    try:
        value = int(raw)
    except ValueError:
        raise ConfigError(f"{ENV_VAR} must be a positive integer, got {raw!r}") from None
    if value < 1:
        raise ConfigError(f"{ENV_VAR} must be a positive integer, got {raw!r}")
    return value


def pmap(fn, items) -> list:
    items = list(items)
    workers = worker_count()
    if workers == 1 or len(items) < 64:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
