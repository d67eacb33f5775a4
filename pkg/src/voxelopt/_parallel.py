import os
from concurrent.futures import ThreadPoolExecutor

ENV_THREADS = "VOXELOPT_THREADS"


def worker_count():
    """Number of worker threads allowed by ``VOXELOPT_THREADS`` (0 or unset = all cores)."""
    raw = os.environ.get(ENV_THREADS, "0").strip() or "0"
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"{ENV_THREADS} must be an integer, got {raw!r}") from None
    if n < 0:
        raise ValueError(f"{ENV_THREADS} must be >= 0, got {n}")
    return n if n > 0 else (os.cpu_count() or 1)


def map_chunks(func, items, workers=None):
    """``[func(i) for i in items]``, spread over threads when more than one is allowed.

    numpy releases the GIL inside large elementwise kernels, so threads give
    real speedups here. Results keep input order.
    """
    items = list(items)
    workers = worker_count() if workers is None else workers
    if workers <= 1 or len(items) <= 1:
        return [func(i) for i in items]
    with ThreadPoolExecutor(max_workers=min(workers, len(items))) as pool:
        return list(pool.map(func, items))
