"""
Replica blocks and an order-preserving worker pool.

Replicas are cut into fixed blocks that never depend on the thread count, and results
are returned in block order, so the merged output is identical for any number of workers.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List, Sequence, TypeVar

import numpy as np

from ..models.errors import InvalidArgumentError


T = TypeVar("T")
R = TypeVar("R")


def replica_blocks(n_replicas: int, block_size: int) -> List[range]:
    """
    Split replica indices 0..n-1 into consecutive blocks of ``block_size`` (the last may be short).

    Raises:
        InvalidArgumentError: If either argument is not positive
    """
    if n_replicas < 1 or block_size < 1:
        raise InvalidArgumentError("replica count and block size must be positive")
    return [range(start, min(start + block_size, n_replicas)) for start in range(0, n_replicas, block_size)]


def run_in_pool(task: Callable[[T], R], items: Sequence[T], threads: int = 1) -> List[R]:
    """
    Apply ``task`` to every item, in parallel when threads > 1; results keep the item order.

    The first exception raised by a task is re-raised here.
    """
    if threads < 1:
        raise InvalidArgumentError("threads must be at least 1")
    if threads == 1 or len(items) < 2:
        return [task(item) for item in items]
    logging.debug(f"Dispatching {len(items)} blocks to {threads} threads")
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(task, items))


def run_replica_blocks(task: Callable[[range], np.ndarray], n_replicas: int, block_size: int = 16,
                       threads: int = 1, axis: int = 0) -> np.ndarray:
    """
    Run ``task`` on every replica block and concatenate the per-block arrays along ``axis``.

    Args:
        task: Maps a block of replica indices to an array whose ``axis`` runs over that block
        n_replicas: Total number of replicas
        block_size: Replicas per block
        threads: Worker threads
        axis: Replica axis of the task's result

    Returns:
        The concatenated array, replicas in index order
    """
    parts = run_in_pool(task, replica_blocks(n_replicas, block_size), threads)
    return np.concatenate(parts, axis=axis)
