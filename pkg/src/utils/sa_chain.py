"""
The additive-noise SA recursion theta_{t+1} = theta_t + alpha (T(theta_t) - theta_t + w_t),
rescaled iterates and the prelimit couplings.
"""

import math
from typing import Optional, Sequence

import numpy as np
from scipy.signal import lfilter

from ..models.errors import InvalidArgumentError, UnsupportedConfigurationError
from ..models.operators import NoiseSpec, OperatorSpec
from ..models.rng import RngStream
from ..models.trajectory import Trajectory
from .chain_engine import ChainBatch, simulate


def _check_stepsize(alpha: float) -> None:
    if not 0.0 < alpha <= 1.0:
        raise InvalidArgumentError(f"stepsize must lie in (0, 1], got {alpha}")


def _as_state(theta, dimension: int, name: str = "theta") -> np.ndarray:
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    if theta.shape[-1] != dimension:
        raise InvalidArgumentError(f"{name} has dimension {theta.shape[-1]}, operator has {dimension}")
    return theta


def sa_step(theta, alpha: float, op: OperatorSpec, w) -> np.ndarray:
    """
    One SA step theta + alpha (T(theta) - theta + w).

    Raises:
        InvalidArgumentError: If alpha is outside (0, 1] or the dimensions disagree
    """
    _check_stepsize(alpha)
    theta = _as_state(theta, op.dimension)
    w = _as_state(w, op.dimension, "w")
    return theta + alpha * (op.apply(theta) - theta + w)


def _sa_advance(op: OperatorSpec):
    def advance(state: np.ndarray, alphas: np.ndarray, w: np.ndarray) -> np.ndarray:
        return state + alphas * (op.apply(state) - state + w)
    return advance


def _sa_roll(op: OperatorSpec):
    """
    Closed-form chunk for scalar affine maps, or None.

    With T(theta) = a theta + b the recursion is theta_{t+1} = c theta_t + alpha (b + w_t),
    c = 1 - alpha (1 - a): a first-order linear filter over the chunk.
    """
    if op.affine is None or op.dimension != 1:
        return None
    a = float(op.affine[0][0, 0])
    b = float(op.affine[1][0])

    def roll(state: np.ndarray, alphas: np.ndarray, block) -> np.ndarray:
        w = block[0][..., 0]
        path = np.empty((w.shape[0],) + state.shape)
        for e, alpha in enumerate(alphas.reshape(-1)):
            c = 1.0 - alpha * (1.0 - a)
            path[:, e, :, 0], _ = lfilter([1.0], [1.0, -c], alpha * (b + w), axis=0,
                                          zi=c * state[e, :, 0][None, :])
        return path
    return roll


def _noise_draw(noise: NoiseSpec):
    def draw(stream: RngStream, n: int):
        return (noise.sample(stream, n),)
    return draw


def _check_pair(op: OperatorSpec, noise: NoiseSpec) -> None:
    if noise.dimension != op.dimension:
        raise InvalidArgumentError(f"noise dimension {noise.dimension} does not match operator dimension {op.dimension}")


def run_replicas(
    theta0,
    stepsizes: Sequence[float],
    steps: int,
    op: OperatorSpec,
    noise: NoiseSpec,
    streams: Sequence[RngStream],
    tail_start: Optional[int] = None,
    record_stride: Optional[int] = None,
    replica_ids: Optional[Sequence[int]] = None,
) -> ChainBatch:
    """
    Run one chain per (stepsize, replica); chains of the same replica share its noise.

    Raises:
        InvalidArgumentError: If steps < 1, a stepsize is out of range or dimensions disagree
        DivergenceError: If any chain diverges
    """
    if steps < 1:
        raise InvalidArgumentError("steps must be at least 1")
    for alpha in stepsizes:
        _check_stepsize(alpha)
    _check_pair(op, noise)
    theta0 = _as_state(theta0, op.dimension, "theta0")
    return simulate(theta0, stepsizes, steps, streams, _noise_draw(noise), _sa_advance(op),
                    tail_start=tail_start, record_stride=record_stride, replica_ids=replica_ids,
                    roll=_sa_roll(op))


def run_chain(theta0, alpha: float, steps: int, op: OperatorSpec, noise: NoiseSpec,
              stream: RngStream, record_stride: int = 1) -> Trajectory:
    """
    Iterate ``sa_step`` ``steps`` times with fresh noise per step.

    Raises:
        InvalidArgumentError: If steps < 1 or the record stride is not positive
        DivergenceError: Carrying the step index of the first non-finite or exploding iterate
    """
    if record_stride < 1:
        raise InvalidArgumentError("record_stride must be positive")
    batch = run_replicas(theta0, [alpha], steps, op, noise, [stream], record_stride=record_stride)
    return Trajectory(alpha, batch.records[:, 0, 0, :], record_stride, steps, final_state=batch.final[0, 0])


def rescale(traj: Trajectory, theta_star) -> Trajectory:
    """
    Map every stored iterate to Y = (theta - theta*) / sqrt(alpha).

    Raises:
        InvalidArgumentError: If theta* has the wrong dimension
    """
    theta_star = _as_state(theta_star, traj.dimension, "theta*")
    root = math.sqrt(traj.stepsize)
    return Trajectory(
        traj.stepsize,
        (traj.iterates - theta_star) / root,
        traj.record_stride,
        traj.total_steps,
        final_state=(traj.final_state - theta_star) / root,
        mode=traj.mode,
        rescaled_around=theta_star,
    )


def unrescale(traj: Trajectory) -> Trajectory:
    """Inverse of ``rescale``: theta = theta* + sqrt(alpha) Y."""
    if traj.rescaled_around is None:
        raise InvalidArgumentError("trajectory is not rescaled")
    root = math.sqrt(traj.stepsize)
    theta_star = traj.rescaled_around
    return Trajectory(
        traj.stepsize,
        traj.iterates * root + theta_star,
        traj.record_stride,
        traj.total_steps,
        final_state=traj.final_state * root + theta_star,
        mode=traj.mode,
    )


def shared_noise_distances(theta0_a, theta0_b, alpha: float, steps: int, op: OperatorSpec,
                           noise: NoiseSpec, streams: Sequence[RngStream],
                           replica_ids: Optional[Sequence[int]] = None) -> np.ndarray:
    """
    Squared c-norm distances of chain pairs started at theta0_a and theta0_b, one pair per stream.

    Returns:
        Array of shape (n_replicas, steps + 1), column t holding ||theta_t^[1] - theta_t^[2]||_c^2
    """
    _check_stepsize(alpha)
    if steps < 1:
        raise InvalidArgumentError("steps must be at least 1")
    _check_pair(op, noise)
    start = np.stack([_as_state(theta0_a, op.dimension, "theta0_a"), _as_state(theta0_b, op.dimension, "theta0_b")])
    # both chains sit on the stepsize axis so they consume the same noise
    batch = simulate(start[:, None, :], [alpha, alpha], steps, streams, _noise_draw(noise), _sa_advance(op),
                     record_stride=1, replica_ids=replica_ids, roll=_sa_roll(op))
    gaps = batch.records[:, 0] - batch.records[:, 1]
    return (op.norm(gaps) ** 2).T


def coupled_shared_noise(theta0_a, theta0_b, alpha: float, steps: int, op: OperatorSpec,
                         noise: NoiseSpec, stream: RngStream) -> np.ndarray:
    """
    Two chains driven by one noise realization; per-step squared distances, length steps + 1.

    Raises:
        DivergenceError: As in ``run_chain``
    """
    return shared_noise_distances(theta0_a, theta0_b, alpha, steps, op, noise, [stream])[0]


def geometric_bound(alpha: float, modulus: float, steps: int) -> np.ndarray:
    """(1 - alpha (1 - sqrt(gamma)))^t for t = 0..steps."""
    rate = 1.0 - alpha * (1.0 - math.sqrt(modulus))
    return rate ** np.arange(steps + 1)


def stepsize_ratio_distances(alpha: float, k: int, steps: int, op: OperatorSpec, noise: NoiseSpec,
                             streams: Sequence[RngStream], theta_star, theta0=None,
                             independent_streams: Optional[Sequence[RngStream]] = None,
                             replica_ids: Optional[Sequence[int]] = None) -> np.ndarray:
    """
    Rescaled squared distances ||Y_t^(alpha) - Y_{kt}^(alpha/k)||_c^2 under the k-step coupling.

    The slow chain (stepsize alpha) is driven by (w_{kt} + ... + w_{kt+k-1}) / sqrt(k); the fast
    chain (stepsize alpha/k) takes the k individual draws. With ``independent_streams`` the fast
    chain instead draws from those streams, giving the uncoupled product-chain baseline.

    Returns:
        Array of shape (n_replicas, steps + 1)

    Raises:
        UnsupportedConfigurationError: If the noise is not Gaussian
        InvalidArgumentError: If k < 1, steps < 1 or alpha is out of range
        DivergenceError: If either chain diverges
    """
    if noise.kind != "gaussian":
        raise UnsupportedConfigurationError("the stepsize-ratio coupling needs Gaussian noise")
    if k < 1:
        raise InvalidArgumentError("k must be a positive integer")
    if steps < 1:
        raise InvalidArgumentError("steps must be at least 1")
    _check_stepsize(alpha)
    _check_pair(op, noise)
    theta_star = _as_state(theta_star, op.dimension, "theta*")
    theta0 = theta_star if theta0 is None else _as_state(theta0, op.dimension, "theta0")

    fast_alpha = alpha / k
    root_k = math.sqrt(k)
    n_replicas = len(streams)
    fast_streams = streams if independent_streams is None else independent_streams

    def draw(stream: RngStream, n: int):
        return (noise.sample(stream, n * k).reshape(n, k, op.dimension),)

    def advance(state: np.ndarray, alphas: np.ndarray, w: np.ndarray) -> np.ndarray:
        slow, fast = state[0], state[1]
        w_slow, w_fast = w[:, 0], w[:, 1]
        slow = slow + alpha * (op.apply(slow) - slow + w_slow.sum(axis=1) / root_k)
        for j in range(k):
            fast = fast + fast_alpha * (op.apply(fast) - fast + w_fast[:, j])
        return np.stack([slow, fast])

    def paired_draw(stream_pair, n: int):
        slow_stream, fast_stream = stream_pair
        slow_w = draw(slow_stream, n)[0]
        fast_w = slow_w if fast_stream is slow_stream else draw(fast_stream, n)[0]
        return (np.stack([slow_w, fast_w], axis=1),)

    # a replica's "stream" here is its (slow, fast) pair
    pairs = list(zip(streams, fast_streams))
    batch = simulate(theta0, [alpha, fast_alpha], steps, pairs, paired_draw, advance,
                     record_stride=1, replica_ids=replica_ids or list(range(n_replicas)))
    y_slow = (batch.records[:, 0] - theta_star) / math.sqrt(alpha)
    y_fast = (batch.records[:, 1] - theta_star) / math.sqrt(fast_alpha)
    return (op.norm(y_slow - y_fast) ** 2).T


def coupled_stepsize_ratio(alpha: float, k: int, steps: int, op: OperatorSpec, noise: NoiseSpec,
                           stream: RngStream, theta_star, theta0=None,
                           independent_stream: Optional[RngStream] = None) -> np.ndarray:
    """
    Single-replica form of ``stepsize_ratio_distances``; returns a vector of length steps + 1.
    """
    independent = [independent_stream] if independent_stream is not None else None
    return stepsize_ratio_distances(alpha, k, steps, op, noise, [stream], theta_star, theta0, independent)[0]


def coupled_shared_stepsizes(alpha_a: float, alpha_b: float, steps: int, op: OperatorSpec,
                             noise: NoiseSpec, streams: Sequence[RngStream], theta_star,
                             theta0=None) -> np.ndarray:
    """
    ||Y_t^(alpha_a) - Y_t^(alpha_b)||_c^2 for two real stepsizes sharing one noise sequence.

    Returns:
        Array of shape (n_replicas, steps + 1)
    """
    theta_star = _as_state(theta_star, op.dimension, "theta*")
    theta0 = theta_star if theta0 is None else theta0
    batch = run_replicas(theta0, [alpha_a, alpha_b], steps, op, noise, streams, record_stride=1)
    y_a = (batch.records[:, 0] - theta_star) / math.sqrt(alpha_a)
    y_b = (batch.records[:, 1] - theta_star) / math.sqrt(alpha_b)
    return (op.norm(y_a - y_b) ** 2).T
