"""Thread-pool map honoring the OPTOMECH_THREADS cap."""

import os
from concurrent.futures import ThreadPoolExecutor


def max_threads():
    env = os.environ.get("OPTOMECH_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return min(8, os.cpu_count() or 1)


def pmap(fn, items):
    """Ordered parallel map; results do not depend on the thread count."""
    items = list(items)
    n = min(max_threads(), len(items))
    if n <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))
