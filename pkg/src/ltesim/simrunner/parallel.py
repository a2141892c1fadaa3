"""Order-preserving execution of independent drops."""

import os
from concurrent.futures import ProcessPoolExecutor


def worker_count():
    """Workers allowed by ``SIM_THREADS`` (default: CPU count)."""
    raw = os.environ.get("SIM_THREADS", "").strip()
    cap = os.cpu_count() or 1
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            return cap
    return cap


def map_drops(fn, args, workers=None):
    """``[fn(a) for a in args]``, possibly on a process pool, in input order."""
    args = list(args)
    workers = worker_count() if workers is None else workers
    if workers <= 1 or len(args) <= 1:
        return [fn(a) for a in args]
    with ProcessPoolExecutor(max_workers=min(workers, len(args))) as pool:
        return list(pool.map(fn, args, chunksize=max(1, len(args) // (4 * workers))))
