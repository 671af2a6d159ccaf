"""Thread-pool helper honouring ``SIMULWAVE_THREADS``.

Results are always collected in input order, so output never depends on
the schedule.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor


def max_workers() -> int:
    """Worker cap from ``SIMULWAVE_THREADS`` (default: CPU count, at most 8)."""
    raw = os.environ.get("SIMULWAVE_THREADS", "").strip()
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            return 1
    return max(1, min(8, os.cpu_count() or 1))


def map_ordered(fn, items):
    """``list(map(fn, items))``, threaded when more than one worker is allowed."""
    items = list(items)
    workers = min(max_workers(), len(items))
    if workers <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
