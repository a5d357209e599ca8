"""
Finite discounted MDPs: Bellman machinery, q* solving and tied/rooted classification.

State-action pairs are flattened in row-major order, pair (s, a) -> s * n_actions + a.
"""

import math
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .errors import InvalidArgumentError, NonConvergenceError
from .operators import OperatorSpec
from .rng import RngStream


DEFAULT_GAMMA = 0.9
DEFAULT_REWARD_NOISE_STD = math.sqrt(0.3)
ROOTED_TOL = 1e-12
DEFAULT_TIE_TOL = 1e-9
DEFAULT_Q_TOL = 1e-12
ULP_SLACK = 4
EPS = float(np.finfo(float).eps)

TYPE_A = "TypeA"
TYPE_B = "TypeB"


class Mdp:
    """
    Finite discounted MDP (S, A, P, r_bar, gamma) with reward noise and a behavior distribution.

    Instances are immutable after construction and safe to share across threads.
    """

    def __init__(
        self,
        n_states: int,
        n_actions: int,
        P,
        r_bar,
        gamma: float = DEFAULT_GAMMA,
        reward_noise_std: float = DEFAULT_REWARD_NOISE_STD,
        kappa_b=None,
    ):
        """
        Initialize an MDP.

        Args:
            n_states: |S|
            n_actions: |A|
            P: Row-stochastic matrix of shape (|S||A|, |S|)
            r_bar: Expected rewards, length |S||A|
            gamma: Discount factor in [0, 1)
            reward_noise_std: Standard deviation of observed rewards around r_bar
            kappa_b: Behavior distribution over pairs (defaults to uniform)

        Raises:
            InvalidArgumentError: If any field violates the MDP invariants
        """
        if n_states < 1 or n_actions < 1:
            raise InvalidArgumentError("an MDP needs at least one state and one action")
        n_pairs = n_states * n_actions
        P = np.array(P, dtype=float)
        r_bar = np.array(r_bar, dtype=float).reshape(-1)
        if P.shape != (n_pairs, n_states):
            raise InvalidArgumentError(f"P must have shape ({n_pairs}, {n_states}), got {P.shape}")
        if r_bar.shape != (n_pairs,):
            raise InvalidArgumentError(f"r_bar must have length {n_pairs}, got {r_bar.size}")
        if np.any(P < 0) or np.any(np.abs(P.sum(axis=1) - 1.0) > 1e-9):
            raise InvalidArgumentError("every row of P must be non-negative and sum to 1")
        if not 0.0 <= gamma < 1.0:
            raise InvalidArgumentError(f"gamma must lie in [0, 1), got {gamma}")
        if reward_noise_std < 0:
            raise InvalidArgumentError("reward_noise_std must be non-negative")

        if kappa_b is None:
            kappa_b = np.full(n_pairs, 1.0 / n_pairs)
        kappa_b = np.array(kappa_b, dtype=float).reshape(-1)
        if kappa_b.shape != (n_pairs,) or np.any(kappa_b < 0) or abs(kappa_b.sum() - 1.0) > 1e-9:
            raise InvalidArgumentError("kappa_b must be a probability vector over state-action pairs")

        self.n_states = int(n_states)
        self.n_actions = int(n_actions)
        self.P = P
        self.r_bar = r_bar
        self.gamma = float(gamma)
        self.reward_noise_std = float(reward_noise_std)
        self.kappa_b = kappa_b
        for array in (self.P, self.r_bar, self.kappa_b):
            array.setflags(write=False)

        self.transition_cdf = np.cumsum(P, axis=1)
        self.kappa_cdf = np.cumsum(kappa_b)
        self.transition_cdf.setflags(write=False)
        self.kappa_cdf.setflags(write=False)

    @property
    def n_pairs(self) -> int:
        return self.n_states * self.n_actions

    def pair(self, state: int, action: int) -> int:
        """Flat index of (state, action)."""
        return state * self.n_actions + action

    def greedy_values(self, q: np.ndarray) -> np.ndarray:
        """f(q): per-state max over actions, for arrays of shape (..., |S||A|)."""
        q = np.asarray(q, dtype=float)
        return q.reshape(q.shape[:-1] + (self.n_states, self.n_actions)).max(axis=-1)

    def replace(self, **changes) -> "Mdp":
        """Copy with some fields replaced."""
        fields = dict(
            n_states=self.n_states, n_actions=self.n_actions, P=self.P, r_bar=self.r_bar,
            gamma=self.gamma, reward_noise_std=self.reward_noise_std, kappa_b=self.kappa_b,
        )
        fields.update(changes)
        return Mdp(**fields)

    def __str__(self) -> str:
        return (f"Mdp(states={self.n_states}, actions={self.n_actions}, gamma={self.gamma}, "
                f"reward_noise_std={self.reward_noise_std})")


class StateClassification:
    """Per-state tie/root analysis."""

    def __init__(self, state: int, optimal_actions: Sequence[int], rooted: bool):
        self.state = state
        self.optimal_actions = tuple(optimal_actions)
        self.rooted = rooted

    @property
    def tied(self) -> bool:
        return len(self.optimal_actions) > 1

    def __repr__(self) -> str:
        return (f"StateClassification(state={self.state}, A*={list(self.optimal_actions)}, "
                f"tied={self.tied}, rooted={self.rooted})")


class MdpType:
    """TypeA when some state is tied and not rooted (the witness), TypeB otherwise."""

    def __init__(self, witness: Optional[int] = None):
        self.witness = witness

    @property
    def name(self) -> str:
        return TYPE_A if self.witness is not None else TYPE_B

    def __str__(self) -> str:
        if self.witness is None:
            return TYPE_B
        return f"{TYPE_A} (witness: state {self.witness})"


def _weights(mdp: Mdp, d_diag) -> np.ndarray:
    if d_diag is None:
        return np.ones(mdp.n_pairs)
    d_diag = np.broadcast_to(np.asarray(d_diag, dtype=float), (mdp.n_pairs,))
    if np.any(d_diag <= 0) or np.any(d_diag > 1):
        raise InvalidArgumentError("every D_ii must lie in (0, 1]")
    return d_diag


def bellman_apply(q, mdp: Mdp, d_diag=None) -> np.ndarray:
    """
    Weighted optimal Bellman operator H(q) = gamma D P f(q) + (I - D) q + D r_bar.

    Args:
        q: Q-vector(s), shape (..., |S||A|)
        mdp: The MDP
        d_diag: Diagonal of D, entries in (0, 1] (defaults to the identity)

    Returns:
        H(q) with the shape of q

    Raises:
        InvalidArgumentError: On dimension mismatch or invalid weights
    """
    q = np.asarray(q, dtype=float)
    if q.shape[-1:] != (mdp.n_pairs,):
        raise InvalidArgumentError(f"q must have last dimension {mdp.n_pairs}, got shape {q.shape}")
    d = _weights(mdp, d_diag)
    lookahead = mdp.greedy_values(q) @ mdp.P.T
    return mdp.gamma * d * lookahead + (1.0 - d) * q + d * mdp.r_bar


def gamma0(mdp: Mdp, d_diag) -> float:
    """
    Contraction modulus 1 - (1 - gamma) min_i D_ii of the weighted Bellman operator in ell-inf.

    Raises:
        InvalidArgumentError: If any weight is outside (0, 1]
    """
    d = _weights(mdp, d_diag)
    return 1.0 - (1.0 - mdp.gamma) * float(np.min(d))


def default_max_iters(mdp: Mdp, tol: float, initial_residual: float) -> int:
    """ceil(log(tol (1 - gamma) / residual_0) / log gamma) + 64."""
    if mdp.gamma == 0.0 or initial_residual <= 0.0:
        return 64
    target = tol * (1.0 - mdp.gamma) / initial_residual
    if target >= 1.0:
        return 64
    return int(math.ceil(math.log(target) / math.log(mdp.gamma))) + 64


def solve_q_star(mdp: Mdp, tol: float = DEFAULT_Q_TOL, max_iters: Optional[int] = None) -> np.ndarray:
    """
    Value iteration with D = I until ||H(q) - q||_inf <= tol (1 - gamma) / gamma.

    The returned q is then within tol of q* in the sup norm. The threshold never goes below
    ULP_SLACK units in the last place of max|q|, where the residual stops shrinking.

    Raises:
        InvalidArgumentError: If tol is not positive
        NonConvergenceError: If max_iters sweeps are not enough
    """
    if tol <= 0:
        raise InvalidArgumentError("tol must be positive")
    threshold = tol * (1.0 - mdp.gamma) / mdp.gamma if mdp.gamma > 0 else math.inf

    q = np.zeros(mdp.n_pairs)
    if max_iters is None:
        initial_residual = float(np.max(np.abs(bellman_apply(q, mdp))))
        max_iters = default_max_iters(mdp, tol, initial_residual)

    residual = math.inf
    for _ in range(max_iters):
        nxt = bellman_apply(q, mdp)
        residual = float(np.max(np.abs(nxt - q)))
        q = nxt
        if residual <= max(threshold, ULP_SLACK * EPS * float(np.max(np.abs(q)))):
            return q
    raise NonConvergenceError(max_iters, residual)


def classify(mdp: Mdp, q_star, tie_tol: float = DEFAULT_TIE_TOL) -> Tuple[List[StateClassification], MdpType]:
    """
    Tied/rooted flags per state and the MDP type.

    A*(s) holds the actions within ``tie_tol`` of max_a q*(s, a); s is rooted when no
    state-action pair reaches it with probability above 1e-12.

    Raises:
        InvalidArgumentError: If tie_tol is not positive or q* has the wrong length
    """
    if tie_tol <= 0:
        raise InvalidArgumentError("tie_tol must be positive")
    q_star = np.asarray(q_star, dtype=float)
    if q_star.shape != (mdp.n_pairs,):
        raise InvalidArgumentError(f"q* must have length {mdp.n_pairs}")

    table = q_star.reshape(mdp.n_states, mdp.n_actions)
    reach = mdp.P.max(axis=0)
    states = []
    witness = None
    for s in range(mdp.n_states):
        best = table[s].max()
        optimal = [a for a in range(mdp.n_actions) if table[s, a] >= best - tie_tol]
        entry = StateClassification(s, optimal, rooted=bool(reach[s] <= ROOTED_TOL))
        if witness is None and entry.tied and not entry.rooted:
            witness = s
        states.append(entry)
    return states, MdpType(witness)


def random_mdp(stream: RngStream, n_states: int, n_actions: int, gamma: float = DEFAULT_GAMMA,
               reward_noise_std: float = DEFAULT_REWARD_NOISE_STD) -> Mdp:
    """
    Random MDP with Dirichlet(1) transition rows and r_bar uniform on [0, 1]^{|S||A|}.

    Rows are drawn in pair order, then the rewards; kappa_b is uniform.

    Raises:
        InvalidArgumentError: If the sizes are not positive
    """
    if n_states < 1 or n_actions < 1:
        raise InvalidArgumentError("n_states and n_actions must be at least 1")
    n_pairs = n_states * n_actions
    ones = np.ones(n_states)
    P = np.array([stream.sample_dirichlet(ones) for _ in range(n_pairs)])
    r_bar = stream.uniforms(n_pairs)
    return Mdp(n_states, n_actions, P, r_bar, gamma, reward_noise_std)


def make_type_a(mdp: Mdp) -> Mdp:
    """
    Copy in which action 1 of state 0 shares action 0's transition row and expected reward.

    Raises:
        InvalidArgumentError: If the MDP has fewer than two actions
    """
    if mdp.n_actions < 2:
        raise InvalidArgumentError("make_type_a needs at least two actions")
    P = mdp.P.copy()
    r_bar = mdp.r_bar.copy()
    P[mdp.pair(0, 1)] = P[mdp.pair(0, 0)]
    r_bar[mdp.pair(0, 1)] = r_bar[mdp.pair(0, 0)]
    return mdp.replace(P=P, r_bar=r_bar)


def bellman_operator(mdp: Mdp, d_diag=None, tol: float = DEFAULT_Q_TOL) -> OperatorSpec:
    """The weighted Bellman map as an ell-inf contraction with modulus gamma0 and fixed point q*."""
    d = _weights(mdp, d_diag).copy()

    def apply(q: np.ndarray) -> np.ndarray:
        return bellman_apply(q, mdp, d)

    modulus = max(gamma0(mdp, d), 1e-12)
    return OperatorSpec(mdp.n_pairs, apply, modulus, "ellinf", solve_q_star(mdp, tol), name="bellman")
