"""
Report containers for bias estimates and Wasserstein-2 estimates.
"""

import math
from typing import Any, Dict, List, Optional

import numpy as np
import pandas as pd

from .errors import InvalidArgumentError
from .operators import norm


TA = "TA"
RR = "RR"
W2_METHODS = ("quantile_1d", "assignment")


class BiasEntry:
    """
    Bias estimates at one stepsize.

    Attributes:
        alpha: Stepsize
        bias: Estimator name -> bias vector (estimate minus fixed point)
        stderr: Estimator name -> cross-replica standard error vector
        replicas: Number of replicas R
        steps: Steps per replica
    """

    def __init__(self, alpha: float, bias: Dict[str, np.ndarray], stderr: Dict[str, np.ndarray],
                 replicas: int, steps: int):
        self.alpha = float(alpha)
        self.bias = {name: np.asarray(value, dtype=float) for name, value in bias.items()}
        self.stderr = {name: np.asarray(value, dtype=float) for name, value in stderr.items()}
        self.replicas = int(replicas)
        self.steps = int(steps)

    @property
    def estimators(self) -> List[str]:
        return list(self.bias)

    def magnitude(self, estimator: str, norm_tag: str) -> float:
        """Bias size in ``norm_tag`` ("ell2", "ellinf" or "ell1")."""
        if norm_tag == "ell1":
            return float(np.sum(np.abs(self.bias[estimator])))
        return float(norm(self.bias[estimator], norm_tag))

    def __repr__(self) -> str:
        return f"BiasEntry(alpha={self.alpha}, estimators={self.estimators}, replicas={self.replicas})"


class BiasReport:
    """Bias estimates over a stepsize sweep plus fitted log-log slopes."""

    def __init__(self, entries: List[BiasEntry], norm_tag: str,
                 slopes: Optional[Dict[str, Dict[str, Optional[float]]]] = None,
                 extra: Optional[Dict[str, Any]] = None):
        if not entries:
            raise InvalidArgumentError("a bias report needs at least one entry")
        self.entries = entries
        self.norm_tag = norm_tag
        self.slopes = slopes or {}
        self.extra = extra or {}

    @property
    def stepsizes(self) -> List[float]:
        return [entry.alpha for entry in self.entries]

    @property
    def estimators(self) -> List[str]:
        return self.entries[0].estimators

    def magnitudes(self, estimator: str, norm_tag: Optional[str] = None) -> List[float]:
        return [entry.magnitude(estimator, norm_tag or self.norm_tag) for entry in self.entries]

    def to_frame(self) -> pd.DataFrame:
        """Rows (alpha, estimator, component, bias, stderr), ordered by stepsize then estimator."""
        rows = []
        for entry in self.entries:
            for estimator in entry.estimators:
                for i, (bias, stderr) in enumerate(zip(entry.bias[estimator], entry.stderr[estimator])):
                    rows.append({"alpha": entry.alpha, "estimator": estimator, "component": i,
                                 "bias": float(bias), "stderr": float(stderr)})
        return pd.DataFrame(rows, columns=["alpha", "estimator", "component", "bias", "stderr"])

    def to_summary(self) -> Dict[str, Any]:
        """JSON-ready summary with slopes and per-stepsize c-norm and l1 magnitudes."""
        summary: Dict[str, Any] = {
            "stepsizes": self.stepsizes,
            "norm": self.norm_tag,
            "replicas": self.entries[0].replicas,
            "steps": self.entries[0].steps,
            "estimators": {},
        }
        for estimator in self.estimators:
            fit = self.slopes.get(estimator, {})
            summary["estimators"][estimator] = {
                "slope": fit.get("slope"),
                "slope_stderr": fit.get("stderr"),
                "magnitude_c": self.magnitudes(estimator),
                "magnitude_l1": self.magnitudes(estimator, "ell1"),
            }
        summary.update(self.extra)
        return summary


class W2Estimate:
    """Empirical Wasserstein-2 distance between two sample sets."""

    def __init__(self, value: float, method: str, n_x: int, n_y: int):
        if method not in W2_METHODS:
            raise InvalidArgumentError(f"unknown W2 method '{method}'")
        if not value >= 0 or math.isinf(value):
            raise InvalidArgumentError(f"W2 value must be finite and non-negative, got {value}")
        self.value = float(value)
        self.method = method
        self.n_x = int(n_x)
        self.n_y = int(n_y)

    def __float__(self) -> float:
        return self.value

    def __repr__(self) -> str:
        return f"W2Estimate({self.value!r}, {self.method}, n=({self.n_x}, {self.n_y}))"
