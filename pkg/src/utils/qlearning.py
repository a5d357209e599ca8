"""
General Q-learning q_{t+1} = q_t + alpha D_t (gamma P_t f(q_t) - q_t + r_t) over an Mdp.

Every mode consumes the same per-step randomness from a stream:
one uniform selecting the updated pair (asynchronous), one uniform per pair selecting
its next state, and one standardized reward noise per pair. Matched seeds therefore
drive Synchronous and GeneralDPR with ``synchronous_sampler`` through identical paths.
"""

import math
from typing import Callable, Optional, Sequence, Tuple

import numpy as np

from ..models.errors import DivergenceError, InvalidArgumentError
from ..models.mdp import Mdp, bellman_apply
from ..models.rng import RngStream, categorical_from_uniforms
from ..models.trajectory import Trajectory
from .chain_engine import ChainBatch, simulate


SYNCHRONOUS = "synchronous"
ASYNCHRONOUS = "asynchronous"
GENERAL = "general"
MODE_KINDS = (SYNCHRONOUS, ASYNCHRONOUS, GENERAL)
REWARD_NOISE_KINDS = ("gaussian", "uniform")
CLIP_WIDTH = 5.0

# sampler(mdp, u_pair, u_next, z) -> (D diagonal, P_t, r_t)
Sampler = Callable[[Mdp, float, np.ndarray, np.ndarray], Tuple[np.ndarray, np.ndarray, np.ndarray]]


class QMode:
    """
    How (D_t, P_t, r_t) are drawn.

    Synchronous: D_t = I, every pair samples its next state. Asynchronous: D_t is a one-hot
    diagonal drawn from kappa_b. General: an explicit sampler supplies the triple.
    """

    def __init__(self, kind: str = SYNCHRONOUS, sampler: Optional[Sampler] = None,
                 reward_noise: str = "gaussian", clip_rewards: bool = False):
        """
        Initialize a mode.

        Args:
            kind: "synchronous", "asynchronous" or "general"
            sampler: Required for "general"
            reward_noise: "gaussian" (N(r_bar, sigma_r^2)) or "uniform" (variance-matched, bounded)
            clip_rewards: Clip rewards to [min r_bar - 5 sigma_r, max r_bar + 5 sigma_r] and check
                that iterates stay in the resulting box

        Raises:
            InvalidArgumentError: If the combination is invalid
        """
        if kind not in MODE_KINDS:
            raise InvalidArgumentError(f"unknown Q-learning mode '{kind}', expected one of {MODE_KINDS}")
        if kind == GENERAL and sampler is None:
            raise InvalidArgumentError("the general mode needs a (D, P, r) sampler")
        if reward_noise not in REWARD_NOISE_KINDS:
            raise InvalidArgumentError(f"unknown reward noise '{reward_noise}'")
        self.kind = kind
        self.sampler = sampler
        self.reward_noise = reward_noise
        self.clip_rewards = clip_rewards

    @classmethod
    def synchronous(cls, **kwargs) -> "QMode":
        return cls(SYNCHRONOUS, **kwargs)

    @classmethod
    def asynchronous(cls, **kwargs) -> "QMode":
        return cls(ASYNCHRONOUS, **kwargs)

    @classmethod
    def general(cls, sampler: Sampler, **kwargs) -> "QMode":
        return cls(GENERAL, sampler=sampler, **kwargs)

    def expected_weights(self, mdp: Mdp) -> np.ndarray:
        """E[diag(D_t)]: ones when synchronous, kappa_b when asynchronous."""
        if self.kind == ASYNCHRONOUS:
            return np.asarray(mdp.kappa_b)
        if self.kind == SYNCHRONOUS:
            return np.ones(mdp.n_pairs)
        raise InvalidArgumentError("the expected D of a general sampler is not known")

    def __str__(self) -> str:
        return self.kind


def reward_bounds(mdp: Mdp) -> Tuple[float, float]:
    """Clipping interval [min r_bar - 5 sigma_r, max r_bar + 5 sigma_r]."""
    width = CLIP_WIDTH * mdp.reward_noise_std
    return float(mdp.r_bar.min() - width), float(mdp.r_bar.max() + width)


def iterate_bounds(mdp: Mdp, q0) -> Tuple[float, float]:
    """
    Box that clipped-reward iterates never leave for alpha in (0, 1].

    Each update is a convex combination of q(s, a) and r + gamma max q, so the box
    [min(lo, (1-gamma) min q0), max(hi, (1-gamma) max q0)] / (1 - gamma) is invariant.
    """
    lo, hi = reward_bounds(mdp)
    q0 = np.asarray(q0, dtype=float)
    scale = 1.0 - mdp.gamma
    return min(lo, scale * q0.min()) / scale, max(hi, scale * q0.max()) / scale


def _draw(mdp: Mdp, mode: QMode):
    n_pairs = mdp.n_pairs

    def draw(stream: RngStream, n: int):
        if mode.reward_noise == "gaussian":
            uniforms, normals = stream.draw_steps(n, 1 + n_pairs, n_pairs)
            z = normals
        else:
            uniforms, _ = stream.draw_steps(n, 1 + 2 * n_pairs, 0)
            z = math.sqrt(3.0) * (2.0 * uniforms[:, 1 + n_pairs:] - 1.0)
        return uniforms[:, 0], uniforms[:, 1:1 + n_pairs], z
    return draw


def _rewards(mdp: Mdp, mode: QMode, z: np.ndarray) -> np.ndarray:
    rewards = mdp.r_bar + mdp.reward_noise_std * z
    if mode.clip_rewards:
        lo, hi = reward_bounds(mdp)
        rewards = np.clip(rewards, lo, hi)
    return rewards


def synchronous_sampler(mdp: Mdp, u_pair: float, u_next: np.ndarray, z: np.ndarray):
    """(D_t, P_t, r_t) of synchronous Q-learning from one step's raw draws."""
    next_states = categorical_from_uniforms(mdp.transition_cdf, u_next)
    P_t = np.zeros((mdp.n_pairs, mdp.n_states))
    P_t[np.arange(mdp.n_pairs), next_states] = 1.0
    return np.ones(mdp.n_pairs), P_t, mdp.r_bar + mdp.reward_noise_std * z


def asynchronous_sampler(mdp: Mdp, u_pair: float, u_next: np.ndarray, z: np.ndarray):
    """(D_t, P_t, r_t) of asynchronous Q-learning: only the kappa_b-drawn pair gets weight 1."""
    d, P_t, r_t = synchronous_sampler(mdp, u_pair, u_next, z)
    d = np.zeros(mdp.n_pairs)
    d[int(categorical_from_uniforms(mdp.kappa_cdf, np.asarray(u_pair)))] = 1.0
    return d, P_t, r_t


def _advance(mdp: Mdp, mode: QMode):
    gamma = mdp.gamma
    n_pairs = mdp.n_pairs

    def synchronous(q, alphas, u_pair, u_next, z):
        next_states = categorical_from_uniforms(mdp.transition_cdf, u_next)
        f = mdp.greedy_values(q)
        target = np.take_along_axis(f, np.broadcast_to(next_states, q.shape), axis=-1)
        return q + alphas * (gamma * target - q + _rewards(mdp, mode, z))

    def asynchronous(q, alphas, u_pair, u_next, z):
        rows = np.arange(q.shape[1])
        pairs = categorical_from_uniforms(mdp.kappa_cdf, u_pair)
        next_states = categorical_from_uniforms(mdp.transition_cdf[pairs], u_next[rows, pairs])
        rewards = _rewards(mdp, mode, z)[rows, pairs]
        f = mdp.greedy_values(q)
        current = q[:, rows, pairs]
        updated = q.copy()
        updated[:, rows, pairs] = current + alphas[:, :, 0] * (gamma * f[:, rows, next_states] - current + rewards)
        return updated

    def general(q, alphas, u_pair, u_next, z):
        updated = np.empty_like(q)
        f = mdp.greedy_values(q)
        for r in range(q.shape[1]):
            d, P_t, r_t = mode.sampler(mdp, u_pair[r], u_next[r], z[r])
            if mode.clip_rewards:
                r_t = np.clip(r_t, *reward_bounds(mdp))
            if d.shape != (n_pairs,) or P_t.shape != (n_pairs, mdp.n_states):
                raise InvalidArgumentError("sampler returned (D, P, r) of the wrong shape")
            updated[:, r] = q[:, r] + alphas[:, :, 0] * d * (gamma * (f[:, r] @ P_t.T) - q[:, r] + r_t)
        return updated

    return {SYNCHRONOUS: synchronous, ASYNCHRONOUS: asynchronous, GENERAL: general}[mode.kind]


def _check_stepsize(alpha: float) -> None:
    if not 0.0 < alpha <= 1.0:
        raise InvalidArgumentError(f"stepsize must lie in (0, 1], got {alpha}")


def _as_q(q, mdp: Mdp, name: str = "q") -> np.ndarray:
    q = np.asarray(q, dtype=float)
    if q.ndim == 0:
        q = np.full(mdp.n_pairs, float(q))
    if q.shape[-1] != mdp.n_pairs:
        raise InvalidArgumentError(f"{name} must have length {mdp.n_pairs}, got shape {q.shape}")
    return q


def _check_box(batch: ChainBatch, mdp: Mdp, q0: np.ndarray, stepsizes: Sequence[float], steps: int) -> None:
    lo, hi = iterate_bounds(mdp, q0)
    states = batch.records if batch.records is not None else batch.final[None]
    slack = 1e-9 * max(1.0, abs(lo), abs(hi))
    outside = (states < lo - slack) | (states > hi + slack)
    if np.any(outside):
        _, alpha_index, replica, _ = np.argwhere(outside)[0]
        raise DivergenceError(steps, float(stepsizes[alpha_index]), int(replica))


def run_q_replicas(
    q0,
    stepsizes: Sequence[float],
    steps: int,
    mdp: Mdp,
    mode: QMode,
    streams: Sequence[RngStream],
    tail_start: Optional[int] = None,
    record_stride: Optional[int] = None,
    replica_ids: Optional[Sequence[int]] = None,
) -> ChainBatch:
    """
    Run one Q-learning chain per (stepsize, replica); chains of a replica share its randomness.

    Raises:
        InvalidArgumentError: If steps < 1, a stepsize is out of range or q0 has the wrong length
        DivergenceError: If any chain diverges (or leaves the clipping box)
    """
    if steps < 1:
        raise InvalidArgumentError("steps must be at least 1")
    for alpha in stepsizes:
        _check_stepsize(alpha)
    q0 = _as_q(q0, mdp, "q0")
    if mode.kind == ASYNCHRONOUS and np.any(mdp.kappa_b <= 0):
        raise InvalidArgumentError("asynchronous Q-learning needs kappa_b > 0 on every pair")
    batch = simulate(q0, stepsizes, steps, streams, _draw(mdp, mode), _advance(mdp, mode),
                     tail_start=tail_start, record_stride=record_stride, replica_ids=replica_ids)
    if mode.clip_rewards:
        _check_box(batch, mdp, q0, stepsizes, steps)
    return batch


def q_step(q, alpha: float, mdp: Mdp, mode: QMode, stream: RngStream) -> np.ndarray:
    """
    One Q-learning step with fresh randomness from ``stream``.

    Raises:
        InvalidArgumentError: If alpha is outside (0, 1] or q has the wrong length
        DivergenceError: If the new iterate is non-finite or explodes
    """
    batch = run_q_replicas(q, [alpha], 1, mdp, mode, [stream])
    return batch.final[0, 0]


def run_q_chain(q0, alpha: float, steps: int, mdp: Mdp, mode: QMode, stream: RngStream,
                record_stride: int = 1) -> Trajectory:
    """
    Iterate ``q_step``; the Trajectory is tagged with the mode.

    Raises:
        DivergenceError: With the step index of the first offending iterate
    """
    if record_stride < 1:
        raise InvalidArgumentError("record_stride must be positive")
    batch = run_q_replicas(q0, [alpha], steps, mdp, mode, [stream], record_stride=record_stride)
    return Trajectory(alpha, batch.records[:, 0, 0, :], record_stride, steps,
                      final_state=batch.final[0, 0], mode=mode.kind)


def sample_one_step(q, alpha: float, mdp: Mdp, mode: QMode, stream: RngStream, n_samples: int) -> np.ndarray:
    """
    ``n_samples`` independent one-step updates from the same q, shape (n_samples, |S||A|).

    The draws are consecutive steps of ``stream``, each applied to q itself.
    """
    _check_stepsize(alpha)
    q = _as_q(q, mdp)
    uniform_pair, uniform_next, z = _draw(mdp, mode)(stream, n_samples)
    state = np.broadcast_to(q, (1, n_samples, mdp.n_pairs))
    alphas = np.full((1, 1, 1), float(alpha))
    return _advance(mdp, mode)(state, alphas, uniform_pair, uniform_next, z)[0]


def expected_step(q, alpha: float, mdp: Mdp, mode: QMode) -> np.ndarray:
    """q + alpha (H(q) - q) with H weighted by the mode's expected D."""
    q = _as_q(q, mdp)
    return q + alpha * (bellman_apply(q, mdp, mode.expected_weights(mdp)) - q)
