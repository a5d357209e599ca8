"""
Estimators over chain output: tail averages, Richardson-Romberg extrapolation, bias and
moment estimates with cross-replica error bars, empirical W2 distances and log-log slopes.
"""

import logging
import math
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.optimize import curve_fit, linear_sum_assignment
from scipy.spatial.distance import cdist
from scipy.stats import linregress

from ..models.errors import InvalidArgumentError, UnsupportedSizeError
from ..models.operators import norm
from ..models.reports import RR, TA, BiasEntry, BiasReport, W2Estimate
from ..models.rng import RngStream
from ..models.trajectory import Trajectory
from .dynamics import QDynamic, SADynamic
from .replica_pool import run_replica_blocks


DEFAULT_ASSIGNMENT_CAP = 256
MOMENT_ORDERS = (2, 4, 6, 8)

Dynamic = Union[SADynamic, QDynamic]


def tail_average(traj: Trajectory, k0: int, k: Optional[int] = None) -> np.ndarray:
    """
    Mean of the recorded iterates with index in [k0, k).

    Indices refer to records, so a strided trajectory yields the average of every
    ``record_stride``-th iterate.

    Args:
        traj: Recorded trajectory
        k0: First record included
        k: One past the last record included (defaults to the number of records)

    Returns:
        Tail-average vector

    Raises:
        InvalidArgumentError: If the window is empty or out of range
    """
    k = len(traj) if k is None else k
    if not 0 <= k0 < k <= len(traj):
        raise InvalidArgumentError(f"empty or invalid averaging window [{k0}, {k}) for {len(traj)} records")
    return traj.iterates[k0:k].mean(axis=0)


def rr_extrapolate(avg_alpha, avg_2alpha, beta: float = 0.5) -> np.ndarray:
    """
    Richardson-Romberg combination (2^beta avg_alpha - avg_2alpha) / (2^beta - 1).

    Cancels a leading bias term proportional to alpha^beta.
    """
    if beta <= 0:
        raise InvalidArgumentError("beta must be positive")
    avg_alpha = np.asarray(avg_alpha, dtype=float)
    avg_2alpha = np.asarray(avg_2alpha, dtype=float)
    if avg_alpha.shape != avg_2alpha.shape:
        raise InvalidArgumentError(f"averages have shapes {avg_alpha.shape} and {avg_2alpha.shape}")
    weight = 2.0 ** beta
    return (weight * avg_alpha - avg_2alpha) / (weight - 1.0)


def mean_and_stderr(samples: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Mean over the first axis and its standard error std(ddof=1)/sqrt(n)."""
    samples = np.asarray(samples, dtype=float)
    n = samples.shape[0]
    if n < 2:
        raise InvalidArgumentError("a standard error needs at least two samples")
    return samples.mean(axis=0), samples.std(axis=0, ddof=1) / math.sqrt(n)


def replica_tail_means(dynamic: Dynamic, stepsizes: Sequence[float], replicas: int, steps: int,
                       stream: RngStream, tail_start: int, threads: int = 1,
                       block_size: int = 16) -> np.ndarray:
    """
    Tail means of ``replicas`` independent chains per stepsize, shape (n_stepsizes, replicas, d).

    Replica r draws from ``stream.split(r)`` and all stepsizes of a replica share its noise.
    """
    def run_block(block: range) -> np.ndarray:
        streams = stream.splits(block)
        batch = dynamic.run(stepsizes, steps, streams, tail_start=tail_start, replica_ids=list(block))
        return batch.tail_mean

    return run_replica_blocks(run_block, replicas, block_size, threads, axis=1)


def estimate_bias(
    dynamic: Dynamic,
    alpha: float,
    replicas: int,
    steps: int,
    stream: RngStream,
    k0_fraction: float = 0.5,
    apply_rr: Optional[float] = None,
    threads: int = 1,
    block_size: int = 16,
) -> BiasEntry:
    """
    Estimate the asymptotic bias at stepsize ``alpha`` from independent replicas.

    Every replica tail-averages theta_{k0}, ..., theta_{steps-1} with k0 = floor(k0_fraction steps).
    With ``apply_rr = beta`` each replica also runs a 2 alpha chain on the same noise and the two
    averages are combined by ``rr_extrapolate``.

    Args:
        dynamic: SADynamic or QDynamic
        alpha: Stepsize
        replicas: Number of replicas R (at least 2)
        steps: Steps per replica
        stream: Stream of this stepsize; replica r uses ``stream.split(r)``
        k0_fraction: Burn-in fraction in [0, 1)
        apply_rr: RR exponent beta, or None for tail averaging only
        threads: Worker threads
        block_size: Replicas per work unit

    Returns:
        BiasEntry with estimator "TA" (and "RR" when requested)

    Raises:
        InvalidArgumentError: If R < 2, the window is empty or no fixed point is available
        DivergenceError: Naming the replica and stepsize that diverged
    """
    if replicas < 2:
        raise InvalidArgumentError("estimate_bias needs at least two replicas")
    if not 0.0 <= k0_fraction < 1.0:
        raise InvalidArgumentError("k0_fraction must lie in [0, 1)")
    tail_start = int(math.floor(k0_fraction * steps))
    if tail_start >= steps:
        raise InvalidArgumentError("burn-in leaves no steps to average")
    theta_star = dynamic.fixed_point
    if theta_star is None:
        raise InvalidArgumentError("the dynamic has no known fixed point")

    stepsizes = [alpha] if apply_rr is None else [alpha, 2.0 * alpha]
    means = replica_tail_means(dynamic, stepsizes, replicas, steps, stream, tail_start, threads, block_size)

    bias, stderr = {}, {}
    bias[TA], stderr[TA] = mean_and_stderr(means[0] - theta_star)
    if apply_rr is not None:
        bias[RR], stderr[RR] = mean_and_stderr(rr_extrapolate(means[0], means[1], apply_rr) - theta_star)
    entry = BiasEntry(alpha, bias, stderr, replicas, steps)
    logging.info(f"alpha={alpha}: TA bias {entry.magnitude(TA, dynamic.norm_tag):.6g}"
                 + (f", RR bias {entry.magnitude(RR, dynamic.norm_tag):.6g}" if apply_rr is not None else ""))
    return entry


def build_bias_report(entries: List[BiasEntry], norm_tag: str, extra: Optional[dict] = None) -> BiasReport:
    """
    Assemble a BiasReport and fit log ||bias||_c against log alpha per estimator.

    A slope is reported as None when fewer than three stepsizes are available or any
    magnitude is not strictly positive.
    """
    report = BiasReport(entries, norm_tag, extra=extra)
    alphas = report.stepsizes
    for estimator in report.estimators:
        magnitudes = report.magnitudes(estimator)
        if len(alphas) >= 3 and min(magnitudes) > 0:
            slope, stderr = fit_loglog_slope(alphas, magnitudes)
            report.slopes[estimator] = {"slope": slope, "stderr": stderr}
        else:
            report.slopes[estimator] = {"slope": None, "stderr": None}
    return report


def bias_sweep(dynamic: Dynamic, alphas: Sequence[float], replicas: int, steps: int, master: RngStream,
               k0_fraction: float = 0.5, apply_rr: Optional[float] = None, threads: int = 1,
               block_size: int = 16) -> BiasReport:
    """``estimate_bias`` at every stepsize; stepsize index e uses ``master.split(e)``."""
    entries = [
        estimate_bias(dynamic, alpha, replicas, steps, master.split(e), k0_fraction, apply_rr, threads, block_size)
        for e, alpha in enumerate(alphas)
    ]
    return build_bias_report(entries, dynamic.norm_tag)


def _as_1d_sample(values, name: str) -> np.ndarray:
    values = np.asarray(values, dtype=float).reshape(-1)
    if values.size == 0:
        raise InvalidArgumentError(f"{name} is empty")
    if not np.all(np.isfinite(values)):
        raise InvalidArgumentError(f"{name} contains non-finite values")
    return values


def empirical_w2_1d(xs, ys) -> W2Estimate:
    """
    Exact W2 between two empirical laws on the real line.

    Equal counts pair the sorted samples. Unequal counts integrate the squared gap of the
    two empirical quantile functions over the merged breakpoint grid.

    Raises:
        InvalidArgumentError: If either sample is empty or non-finite
    """
    xs = np.sort(_as_1d_sample(xs, "xs"))
    ys = np.sort(_as_1d_sample(ys, "ys"))
    n, m = xs.size, ys.size
    if n == m:
        return W2Estimate(math.sqrt(float(np.mean((xs - ys) ** 2))), "quantile_1d", n, m)

    grid = np.unique(np.concatenate([np.arange(1, n + 1) / n, np.arange(1, m + 1) / m, [0.0]]))
    lower, upper = grid[:-1], grid[1:]
    middle = 0.5 * (lower + upper)
    x_q = xs[np.minimum((middle * n).astype(int), n - 1)]
    y_q = ys[np.minimum((middle * m).astype(int), m - 1)]
    value = math.sqrt(float(np.sum((upper - lower) * (x_q - y_q) ** 2)))
    return W2Estimate(value, "quantile_1d", n, m)


def _as_points(values, name: str) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    if values.ndim == 1:
        values = values.reshape(-1, 1)
    if values.ndim != 2 or values.shape[0] == 0:
        raise InvalidArgumentError(f"{name} must be a non-empty (n, d) array")
    return values


def empirical_w2_assignment(xs, ys, norm_tag: str = "ell2", cap: int = DEFAULT_ASSIGNMENT_CAP) -> W2Estimate:
    """
    W2 between two equal-size point clouds via the optimal assignment with cost ||x - y||_c^2.

    Raises:
        InvalidArgumentError: If the counts or dimensions differ
        UnsupportedSizeError: If n exceeds ``cap``; use empirical_w2_1d for d = 1
    """
    xs = _as_points(xs, "xs")
    ys = _as_points(ys, "ys")
    if xs.shape != ys.shape:
        raise InvalidArgumentError(f"assignment W2 needs equal shapes, got {xs.shape} and {ys.shape}")
    n = xs.shape[0]
    if n > cap:
        raise UnsupportedSizeError(
            f"{n} points exceed the assignment cap of {cap}; use the 1-D quantile estimate or subsample"
        )
    if norm_tag == "ell2":
        cost = cdist(xs, ys, "sqeuclidean")
    elif norm_tag == "ellinf":
        cost = cdist(xs, ys, "chebyshev") ** 2
    else:
        raise InvalidArgumentError(f"unknown norm tag '{norm_tag}'")
    rows, cols = linear_sum_assignment(cost)
    return W2Estimate(math.sqrt(float(cost[rows, cols].mean())), "assignment", n, n)


def moment_estimate(traj: Trajectory, theta_star, norm_tag: str, order: int, k0: int = 0) -> float:
    """Tail-sample mean of ||theta_t - theta*||_c^order over records k0 onward."""
    if order not in MOMENT_ORDERS:
        raise InvalidArgumentError(f"order must be one of {MOMENT_ORDERS}, got {order}")
    if not 0 <= k0 < len(traj):
        raise InvalidArgumentError(f"k0={k0} outside the {len(traj)} records")
    gaps = norm(traj.iterates[k0:] - np.asarray(theta_star, dtype=float), norm_tag)
    return float(np.mean(gaps ** order))


def _line(x, intercept, slope):
    return intercept + slope * x


def fit_loglog_slope(alphas: Sequence[float], magnitudes: Sequence[float],
                     weights: Optional[Sequence[float]] = None) -> Tuple[float, float]:
    """
    Least-squares slope of log(magnitude) on log(alpha) with its standard error.

    Args:
        alphas: Stepsizes (at least three, all positive)
        magnitudes: Positive magnitudes, one per stepsize
        weights: Optional positive weights; the fit is then weighted least squares

    Returns:
        Tuple (slope, stderr)

    Raises:
        InvalidArgumentError: On fewer than three points or non-positive values
    """
    alphas = np.asarray(alphas, dtype=float)
    magnitudes = np.asarray(magnitudes, dtype=float)
    if alphas.shape != magnitudes.shape or alphas.ndim != 1:
        raise InvalidArgumentError("alphas and magnitudes must be 1-D and of equal length")
    if alphas.size < 3:
        raise InvalidArgumentError("a slope fit needs at least three points")
    if np.any(alphas <= 0) or np.any(magnitudes <= 0):
        raise InvalidArgumentError("log-log fits need strictly positive stepsizes and magnitudes")

    x, y = np.log(alphas), np.log(magnitudes)
    if weights is None:
        fit = linregress(x, y)
        return float(fit.slope), float(fit.stderr)

    weights = np.asarray(weights, dtype=float)
    if weights.shape != alphas.shape or np.any(weights <= 0):
        raise InvalidArgumentError("weights must be positive, one per point")
    params, covariance = curve_fit(_line, x, y, p0=(0.0, 0.5), sigma=1.0 / np.sqrt(weights))
    return float(params[1]), float(math.sqrt(max(covariance[1, 1], 0.0)))
