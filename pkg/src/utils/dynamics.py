"""
Adapters giving additive-noise SA and Q-learning one interface for bias estimation and experiments.
"""

from typing import Optional, Sequence

import numpy as np

from ..models.mdp import DEFAULT_Q_TOL, Mdp, solve_q_star
from ..models.operators import NoiseSpec, OperatorSpec
from ..models.rng import RngStream
from .chain_engine import ChainBatch
from .qlearning import QMode, run_q_replicas
from .sa_chain import run_replicas


class SADynamic:
    """theta_{t+1} = theta_t + alpha (T(theta_t) - theta_t + w_t) for a given operator and noise."""

    def __init__(self, op: OperatorSpec, noise: NoiseSpec, theta0=None):
        self.op = op
        self.noise = noise
        self.initial = np.ones(op.dimension) if theta0 is None else np.atleast_1d(np.asarray(theta0, dtype=float))
        self._fixed_point = op.fixed_point

    @property
    def dimension(self) -> int:
        return self.op.dimension

    @property
    def norm_tag(self) -> str:
        return self.op.norm_tag

    @property
    def fixed_point(self) -> Optional[np.ndarray]:
        return self._fixed_point

    def run(self, stepsizes: Sequence[float], steps: int, streams: Sequence[RngStream],
            tail_start: Optional[int] = None, record_stride: Optional[int] = None,
            replica_ids: Optional[Sequence[int]] = None) -> ChainBatch:
        return run_replicas(self.initial, stepsizes, steps, self.op, self.noise, streams,
                            tail_start=tail_start, record_stride=record_stride, replica_ids=replica_ids)

    def describe(self) -> str:
        return f"{self.op} with {self.noise}"


class QDynamic:
    """Q-learning on an MDP in a given mode; q* comes from value iteration."""

    def __init__(self, mdp: Mdp, mode: QMode, q0=None, tol: float = DEFAULT_Q_TOL):
        self.mdp = mdp
        self.mode = mode
        if q0 is None:
            q0 = np.ones(mdp.n_pairs)
        q0 = np.asarray(q0, dtype=float)
        self.initial = np.full(mdp.n_pairs, float(q0)) if q0.ndim == 0 else q0
        self._tol = tol
        self._fixed_point: Optional[np.ndarray] = None

    @property
    def dimension(self) -> int:
        return self.mdp.n_pairs

    @property
    def norm_tag(self) -> str:
        return "ellinf"

    @property
    def fixed_point(self) -> np.ndarray:
        if self._fixed_point is None:
            self._fixed_point = solve_q_star(self.mdp, self._tol)
        return self._fixed_point

    def run(self, stepsizes: Sequence[float], steps: int, streams: Sequence[RngStream],
            tail_start: Optional[int] = None, record_stride: Optional[int] = None,
            replica_ids: Optional[Sequence[int]] = None) -> ChainBatch:
        return run_q_replicas(self.initial, stepsizes, steps, self.mdp, self.mode, streams,
                              tail_start=tail_start, record_stride=record_stride, replica_ids=replica_ids)

    def describe(self) -> str:
        return f"{self.mode} Q-learning on {self.mdp}"
