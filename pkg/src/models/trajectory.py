"""
Trajectory class for recorded chain iterates.
"""

from typing import Optional

import numpy as np
import pandas as pd

from .errors import InvalidArgumentError


class Trajectory:
    """
    Iterates theta_0, theta_s, theta_2s, ... of one chain, recorded every ``record_stride`` steps.
    """

    def __init__(
        self,
        stepsize: float,
        iterates: np.ndarray,
        record_stride: int,
        total_steps: int,
        final_state: Optional[np.ndarray] = None,
        mode: Optional[str] = None,
        rescaled_around: Optional[np.ndarray] = None,
    ):
        """
        Initialize a Trajectory.

        Args:
            stepsize: Stepsize alpha of the chain
            iterates: Array of shape (n_recorded, d)
            record_stride: Stride k between stored iterates
            total_steps: Number of steps the chain ran
            final_state: Iterate after ``total_steps`` steps (defaults to the last record)
            mode: Q-learning mode tag, None for additive-noise SA
            rescaled_around: theta* when the iterates are rescaled Y = (theta - theta*)/sqrt(alpha)

        Raises:
            InvalidArgumentError: If the number of records disagrees with stride and steps
        """
        iterates = np.asarray(iterates, dtype=float)
        if iterates.ndim != 2:
            raise InvalidArgumentError(f"iterates must be 2-D (n, d), got shape {iterates.shape}")
        if record_stride < 1:
            raise InvalidArgumentError("record_stride must be positive")
        expected = total_steps // record_stride + 1
        if iterates.shape[0] != expected:
            raise InvalidArgumentError(
                f"{iterates.shape[0]} records for {total_steps} steps at stride {record_stride}; expected {expected}"
            )

        self.stepsize = float(stepsize)
        self.iterates = iterates
        self.record_stride = int(record_stride)
        self.total_steps = int(total_steps)
        self.final_state = iterates[-1] if final_state is None else np.asarray(final_state, dtype=float)
        self.mode = mode
        self.rescaled_around = rescaled_around

    @property
    def dimension(self) -> int:
        return self.iterates.shape[1]

    @property
    def steps(self) -> np.ndarray:
        """Chain step index of every record."""
        return np.arange(self.iterates.shape[0]) * self.record_stride

    def __len__(self) -> int:
        return self.iterates.shape[0]

    def to_frame(self) -> pd.DataFrame:
        """Tabular form with columns step, component_0, ..., component_{d-1}."""
        frame = pd.DataFrame(
            self.iterates, columns=[f"component_{i}" for i in range(self.dimension)]
        )
        frame.insert(0, "step", self.steps)
        return frame

    def __str__(self) -> str:
        tag = f", mode={self.mode}" if self.mode else ""
        return (f"Trajectory(alpha={self.stepsize}, records={len(self)}, "
                f"stride={self.record_stride}, steps={self.total_steps}{tag})")
