"""
Batched chain driver shared by the additive-noise SA and Q-learning recursions.

State arrays have shape (n_stepsizes, n_replicas, d). All stepsizes of a batch see
the same noise realization (the pairing used by Richardson-Romberg extrapolation
and the shared-noise coupling); every replica draws from its own stream.
"""

import logging
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from ..models.errors import DivergenceError
from ..models.rng import RngStream


DIVERGENCE_LIMIT = 1e9
CHUNK_STEPS = 4096

Draw = Callable[[RngStream, int], Tuple[np.ndarray, ...]]
Advance = Callable[..., np.ndarray]
Roll = Callable[[np.ndarray, np.ndarray, Tuple[np.ndarray, ...]], np.ndarray]


class ChainBatch:
    """
    Result of one batched run.

    Attributes:
        final: State after the last step, shape (n_stepsizes, n_replicas, d)
        tail_mean: Mean of theta_t over t in [tail_start, steps), or None
        records: Recorded states, shape (n_records, n_stepsizes, n_replicas, d), or None
    """

    def __init__(self, final: np.ndarray, tail_mean: Optional[np.ndarray], records: Optional[np.ndarray]):
        self.final = final
        self.tail_mean = tail_mean
        self.records = records


def draw_noise_block(streams: Sequence[RngStream], draw: Draw, n_steps: int) -> Tuple[np.ndarray, ...]:
    """
    Draw ``n_steps`` of per-step randomness for every replica.

    Returns:
        Tuple of arrays shaped (n_steps, n_replicas, ...)
    """
    per_replica = [draw(stream, n_steps) for stream in streams]
    return tuple(np.stack(parts, axis=1) for parts in zip(*per_replica))


def stepwise_roll(advance: Advance) -> Roll:
    """Wrap a one-step ``advance`` into a chunk ``roll`` that applies it once per draw."""
    def roll(state: np.ndarray, alphas: np.ndarray, block: Tuple[np.ndarray, ...]) -> np.ndarray:
        path = np.empty((block[0].shape[0],) + state.shape)
        for j, draws in enumerate(zip(*block)):
            state = advance(state, alphas, *draws)
            path[j] = state
        return path
    return roll


def _check_path(path: np.ndarray, t: int, stepsizes: np.ndarray, replica_ids: Sequence[int]) -> None:
    healthy = np.all(np.abs(path) <= DIVERGENCE_LIMIT, axis=-1)
    if healthy.all():
        return
    j, bad_alpha, bad_replica = np.argwhere(~healthy)[0]
    raise DivergenceError(t + int(j) + 1, float(stepsizes[bad_alpha]), replica_ids[bad_replica])


def simulate(
    state0: np.ndarray,
    stepsizes: Sequence[float],
    steps: int,
    streams: Sequence[RngStream],
    draw: Draw,
    advance: Advance,
    tail_start: Optional[int] = None,
    record_stride: Optional[int] = None,
    replica_ids: Optional[Sequence[int]] = None,
    roll: Optional[Roll] = None,
) -> ChainBatch:
    """
    Run ``steps`` steps of a batch of chains.

    Randomness is drawn ``CHUNK_STEPS`` steps at a time. Each chunk is rolled into a path
    array, then checked for divergence and folded into the tail sum and the records.

    Args:
        state0: Initial state, broadcastable to (n_stepsizes, n_replicas, d)
        stepsizes: One stepsize per leading row of the batch
        steps: Number of steps
        streams: One stream per replica
        draw: ``draw(stream, n)`` returns the tuple of per-step draws for n steps
        advance: ``advance(state, alphas, *draws_t)`` returns the next state; ``alphas`` has
            shape (n_stepsizes, 1, 1) and each ``draws_t`` has leading axis n_replicas
        tail_start: First step index included in the tail mean (None disables it)
        record_stride: Record every k-th state, including the initial one (None disables it)
        replica_ids: Replica labels used in divergence errors (defaults to 0..n-1)
        roll: ``roll(state, alphas, block)`` returning the n states after each step of a chunk;
            defaults to applying ``advance`` step by step

    Returns:
        ChainBatch

    Raises:
        DivergenceError: When any state leaves the divergence guard, with the first such step
    """
    alphas = np.asarray(stepsizes, dtype=float).reshape(-1, 1, 1)
    n_replicas = len(streams)
    state = np.array(np.broadcast_to(state0, (alphas.shape[0], n_replicas, np.shape(state0)[-1])), dtype=float)
    if replica_ids is None:
        replica_ids = list(range(n_replicas))
    if roll is None:
        roll = stepwise_roll(advance)

    tail_sum = np.zeros_like(state) if tail_start is not None else None
    records: Optional[List[np.ndarray]] = [] if record_stride else None

    t = 0
    while t < steps:
        n = min(CHUNK_STEPS, steps - t)
        block = draw_noise_block(streams, draw, n)
        with np.errstate(over="ignore", invalid="ignore"):
            path = roll(state, alphas, block)
        _check_path(path, t, alphas.reshape(-1), replica_ids)

        # visited[j] is the state at step t + j
        visited = np.concatenate([state[None], path[:-1]])
        if tail_sum is not None and t + n > tail_start:
            tail_sum += visited[max(tail_start - t, 0):].sum(axis=0)
        if records is not None:
            records.append(visited[(-t) % record_stride::record_stride])
        state = path[-1].copy()
        t += n
        logging.debug(f"Advanced {n_replicas} replicas x {alphas.shape[0]} stepsizes to step {t}/{steps}")

    if records is not None and steps % record_stride == 0:
        records.append(state[None])

    tail_mean = None
    if tail_sum is not None:
        tail_mean = tail_sum / max(steps - tail_start, 1)
    stacked = np.concatenate(records) if records is not None else None
    return ChainBatch(state, tail_mean, stacked)
