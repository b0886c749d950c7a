"""Per-replicate seeds and an order-preserving replicate map."""

from __future__ import annotations

import os
import zlib
from concurrent.futures import ProcessPoolExecutor

import numpy as np

WORKERS_ENV = "ABFPP_WORKERS"


def replicate_seed(seed: int, stream: str, index: int) -> int:
    """Field seed for replicate ``index`` of a named stream.

    Streams keep e.g. the frozen-speed runs independent of the sweep runs
    while every grid point of a sweep reuses the same seeds.
    """
    tag = zlib.crc32(stream.encode("utf-8"))
    ss = np.random.SeedSequence(int(seed), spawn_key=(tag, int(index)))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def default_workers() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


def run_replicates(func, jobs, workers: int = 1) -> list:
    """``[func(j) for j in jobs]``, optionally on a process pool; order is kept."""
    jobs = list(jobs)
    if workers <= 1 or len(jobs) < 2:
        return [func(j) for j in jobs]
    chunk = max(1, len(jobs) // (4 * workers))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, jobs, chunksize=chunk))
