"""Order-stable map over independent jobs."""

import os
from concurrent.futures import ProcessPoolExecutor


def default_workers():
    return os.cpu_count() or 1


def ordered_map(fn, items, workers=1):
    """``[fn(x) for x in items]``, optionally across a process pool.

    Results are returned in input order regardless of completion order,
    so seeded jobs give identical output for any worker count.
    """
    items = list(items)
    if workers is None:
        workers = default_workers()
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=min(workers, len(items))) as pool:
        return list(pool.map(fn, items))
