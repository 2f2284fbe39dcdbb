"""Replica-range worker pool.

Work is split into contiguous replica ranges.  Every replica draws from its
own keyed stream, so results are identical for any number of workers.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor


def split(total: int, parts: int) -> list:
    """Contiguous ``(lo, hi)`` ranges covering ``[0, total)``."""
    parts = max(1, min(parts, total))
    base, extra = divmod(total, parts)
    out, lo = [], 0
    for k in range(parts):
        hi = lo + base + (1 if k < extra else 0)
        out.append((lo, hi))
        lo = hi
    return out


def map_ranges(fn, total: int, jobs: int, *args) -> list:
    """Call ``fn(*args, lo, hi)`` on each range and return results in order."""
    ranges = split(total, jobs)
    if jobs <= 1 or len(ranges) <= 1:
        return [fn(*args, lo, hi) for lo, hi in ranges]
    with ProcessPoolExecutor(max_workers=len(ranges)) as pool:
        futures = [pool.submit(fn, *args, lo, hi) for lo, hi in ranges]
        return [f.result() for f in futures]
