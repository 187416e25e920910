import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, List, Sequence, TypeVar

import numpy as np

from . import config

T = TypeVar("T")
R = TypeVar("R")

# Domain codes used as the first spawn key of dataset streams.
TARGET_CODE = 0

# Keys that never collide with a domain code.
BETA_STREAM = 10_000
CHUNK_STREAM = 10_001
GHOST_STREAM = 10_002
INSTANCE_STREAM = 10_003
RADEMACHER_STREAM = 10_004


def child_seed(seed: int, *keys: int) -> np.random.SeedSequence:
    """Derive a child SeedSequence of ``seed`` addressed by integer ``keys``."""
    return np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in keys))


def child_rng(seed: int, *keys: int) -> np.random.Generator:
    """A ``numpy`` Generator on the child stream ``(seed, *keys)``."""
    return np.random.default_rng(child_seed(seed, *keys))


def chunk_sizes(total: int, chunk: int) -> List[int]:
    """Split ``total`` work units into fixed-size chunks (last one may be short)."""
    sizes = [chunk] * (total // chunk)
    if total % chunk:
        sizes.append(total % chunk)
    return sizes


def parallel_map(fn: Callable[[T], R], items: Iterable[T], threads: int = 1) -> List[R]:
    """Apply ``fn`` to every item, preserving input order.

    Work runs inline when ``threads <= 1``. Callers reduce the returned list in
    order, so results never depend on the worker count.
    """
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def is_nonincreasing(values: Sequence[float], tol: float = 1e-9) -> bool:
    """True when each value is at most its predecessor (with relative slack)."""
    return all(b <= a + tol * max(1.0, abs(a)) for a, b in zip(values, values[1:]))


class _VerboseLogHandler(logging.Handler):
    """Logging handler that routes messages through vlog() when verbose is on."""

    def __init__(self, prefix: str):
        super().__init__()
        self.prefix = prefix

    def emit(self, record):
        if not config.VERBOSE:
            return
        try:
            from .verbose import vlog

            msg = self.format(record)
            # Truncate very long messages
            if len(msg) > 500:
                msg = msg[:497] + "..."
            vlog(f"[dim]\\[{self.prefix}][/dim] {msg}")
        except Exception:
            pass


_logging_setup = False


def setup_logging():
    """Route library logging through the verbose console and quiet plotting noise."""
    global _logging_setup
    if _logging_setup:
        return
    _logging_setup = True

    class _VerboseGate(logging.Filter):
        def filter(self, record):
            return config.VERBOSE

    # matplotlib chats about font caches and backends at INFO/DEBUG.
    logging.getLogger("matplotlib").addFilter(_VerboseGate())

    handler = _VerboseLogHandler("repda")
    handler.setLevel(logging.DEBUG)
    logger = logging.getLogger("repda")
    logger.addHandler(handler)
    logger.setLevel(logging.DEBUG)
    logger.propagate = False
