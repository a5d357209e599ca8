"""
Experiment runner: builds the dynamic described by a config and runs one of the five experiment kinds.
"""

import logging
import math
from typing import Any, Dict, List

import numpy as np
import pandas as pd

from ..config.config import ExperimentConfig
from ..models.errors import ConfigError, InvalidArgumentError
from ..models.mdp import classify, gamma0
from ..models.rng import RngStream
from ..models.trajectory import Trajectory
from .data_ingestion import build_mdp, build_noise, build_operator
from .dynamics import QDynamic, SADynamic
from .estimators import (
    build_bias_report,
    empirical_w2_1d,
    empirical_w2_assignment,
    estimate_bias,
    mean_and_stderr,
)
from .output_generator import save_bias_report, save_coupling, save_trajectory, save_w2
from .qlearning import QMode, asynchronous_sampler, synchronous_sampler
from .replica_pool import run_replica_blocks
from .sa_chain import geometric_bound, shared_noise_distances, stepsize_ratio_distances


GENERAL_SAMPLERS = {"synchronous": synchronous_sampler, "asynchronous": asynchronous_sampler}
INDEPENDENT_KEY = 1


def build_mode(section: Dict[str, Any], field: str = "dynamic.mode") -> QMode:
    """
    Build a QMode from ``{"kind": ..., "sampler": ..., "reward_noise": ..., "clip_rewards": ...}``.

    The general mode takes a built-in sampler name ("synchronous" or "asynchronous").
    """
    kind = section.get("kind", "synchronous")
    sampler = None
    if kind == "general":
        name = section.get("sampler", "synchronous")
        if name not in GENERAL_SAMPLERS:
            raise ConfigError(f"unknown sampler '{name}', expected one of {sorted(GENERAL_SAMPLERS)}", f"{field}.sampler")
        sampler = GENERAL_SAMPLERS[name]
    try:
        return QMode(kind, sampler=sampler, reward_noise=section.get("reward_noise", "gaussian"),
                     clip_rewards=bool(section.get("clip_rewards", False)))
    except InvalidArgumentError as e:
        raise ConfigError(str(e), field)


def build_dynamic(config: ExperimentConfig, master: RngStream):
    """
    Build the SADynamic or QDynamic of a config.

    Raises:
        ConfigError: If the dynamic section is invalid
    """
    section = config.get_dynamic()
    if section["type"] == "sa":
        op = build_operator(section["operator"])
        noise = build_noise(section.get("noise", {}), op.dimension)
        theta0 = section.get("theta0")
        if theta0 is not None and np.size(theta0) != op.dimension:
            raise ConfigError(f"expected {op.dimension} entries", "dynamic.theta0")
        return SADynamic(op, noise, theta0)

    mdp = build_mdp(section["mdp"], master)
    q0 = section.get("q0")
    if q0 is not None and np.ndim(q0) > 0 and np.size(q0) != mdp.n_pairs:
        raise ConfigError(f"expected a scalar or {mdp.n_pairs} entries", "dynamic.q0")
    return QDynamic(mdp, build_mode(section.get("mode", {})), q0, tol=float(config.get("q_tol")))


class ExperimentRunner:
    """
    Runs one configured experiment and writes its artifacts.

    Stepsize index e of every kind draws replica r from stream path (e, r) of the master seed.
    """

    def __init__(self, config: ExperimentConfig):
        """
        Initialize the runner.

        Args:
            config: Validated experiment configuration
        """
        self.config = config
        self.master = RngStream(config.get_seed())
        self.output_dir = config.get_output_dir()
        self.threads = config.get_threads()
        self.block_size = config.get_block_size()
        self.dynamic = build_dynamic(config, self.master)

    def run(self) -> Dict[str, str]:
        """
        Run the experiment.

        Returns:
            Dictionary mapping artifact names to written paths
        """
        kind = self.config.get_kind()
        logging.info(f"Running {kind} on {self.dynamic.describe()}")
        if kind in ("bias-sweep", "rr-compare", "q-experiment"):
            return self.run_bias()
        if kind == "coupling":
            return self.run_coupling()
        return self.run_w2_convergence()

    def _classification(self) -> Dict[str, Any]:
        mdp = self.dynamic.mdp
        q_star = self.dynamic.fixed_point
        states, mdp_type = classify(mdp, q_star, float(self.config.get("tie_tol")))
        logging.info(f"MDP type: {mdp_type}")
        return {
            "mdp_type": mdp_type.name,
            "witness": mdp_type.witness,
            "q_star": [float(v) for v in q_star],
            "tied_states": [s.state for s in states if s.tied],
            "rooted_states": [s.state for s in states if s.rooted],
            "gamma0": gamma0(mdp, self.dynamic.mode.expected_weights(mdp)),
        }

    def run_bias(self) -> Dict[str, str]:
        """Bias sweep; rr-compare and q-experiment add the RR estimator."""
        kind = self.config.get_kind()
        beta = self.config.get_beta() if kind != "bias-sweep" else None
        steps = self.config.get_steps()
        replicas = self.config.get_replicas()
        extra = self._classification() if isinstance(self.dynamic, QDynamic) else {}

        entries = []
        for e, alpha in enumerate(self.config.get_alphas()):
            entries.append(estimate_bias(
                self.dynamic, alpha, replicas, steps, self.master.split(e),
                k0_fraction=self.config.get_burn_in_fraction(), apply_rr=beta,
                threads=self.threads, block_size=self.block_size,
            ))
        report = build_bias_report(entries, self.dynamic.norm_tag, extra=extra)
        for estimator, fit in report.slopes.items():
            logging.info(f"{estimator} log-log slope: {fit['slope']}")
        outputs = save_bias_report(report, self.output_dir)
        stride = self.config.get_trajectory_stride()
        if stride is not None:
            outputs.update(self.save_trajectories(stride))
        return outputs

    def save_trajectories(self, stride: int) -> Dict[str, str]:
        """
        Re-run replica 0 of every stepsize and save its iterates every ``stride`` steps.

        The chain uses stream path (e, 0), so it is the first replica of the bias sweep.
        """
        steps = self.config.get_steps()
        mode = str(self.dynamic.mode) if isinstance(self.dynamic, QDynamic) else None
        outputs: Dict[str, str] = {}
        for e, alpha in enumerate(self.config.get_alphas()):
            batch = self.dynamic.run([alpha], steps, [self.master.split(e).split(0)], record_stride=stride)
            trajectory = Trajectory(alpha, batch.records[:, 0, 0, :], stride, steps,
                                    final_state=batch.final[0, 0], mode=mode)
            logging.info(f"Recorded {trajectory}")
            outputs.update(save_trajectory(trajectory, self.output_dir))
        return outputs

    def _coupling_rows(self, variant: str, alpha: float, k: int, distances: np.ndarray,
                       reference: np.ndarray, stride: int) -> List[Dict[str, Any]]:
        mean, stderr = mean_and_stderr(distances)
        return [
            {"variant": variant, "alpha": alpha, "k": k, "step": t, "mean_sq_distance": float(mean[t]),
             "stderr": float(stderr[t]), "reference": float(reference[t])}
            for t in range(0, distances.shape[1], stride)
        ]

    @staticmethod
    def _long_run(distances: np.ndarray, tail_fraction: float) -> Dict[str, float]:
        start = int(math.floor(tail_fraction * (distances.shape[1] - 1)))
        mean, stderr = mean_and_stderr(distances[:, start:].mean(axis=1))
        return {"mean": float(mean), "stderr": float(stderr)}

    def run_coupling(self) -> Dict[str, str]:
        """Shared-noise or stepsize-ratio coupling diagnostics per stepsize."""
        settings = self.config.get_coupling()
        variant = settings["variant"]
        steps = self.config.get_steps()
        replicas = self.config.get_replicas()
        stride = int(settings["record_stride"])
        op, noise = self.dynamic.op, self.dynamic.noise
        theta_star = op.fixed_point

        rows: List[Dict[str, Any]] = []
        summary: Dict[str, Any] = {"variant": variant, "replicas": replicas, "steps": steps, "stepsizes": []}
        for e, alpha in enumerate(self.config.get_alphas()):
            stream = self.master.split(e)

            if variant == "shared-noise":
                theta0_a = settings["theta0_a"] if settings["theta0_a"] is not None else np.ones(op.dimension)
                theta0_b = settings["theta0_b"] if settings["theta0_b"] is not None else -np.ones(op.dimension)

                def task(block: range) -> np.ndarray:
                    return shared_noise_distances(theta0_a, theta0_b, alpha, steps, op, noise,
                                                  stream.splits(block), replica_ids=list(block))

                distances = run_replica_blocks(task, replicas, self.block_size, self.threads)
                bound = distances.mean(axis=0)[0] * geometric_bound(alpha, op.contraction_modulus, steps)
                rows.extend(self._coupling_rows(variant, alpha, 1, distances, bound, stride))
                within = bool(np.all(distances.mean(axis=0) <= bound * (1 + 1e-9) + 1e-300))
                summary["stepsizes"].append({"alpha": alpha, "long_run": self._long_run(distances, settings["tail_fraction"]),
                                             "within_geometric_bound": within})
                logging.info(f"alpha={alpha}: shared-noise coupling within geometric bound: {within}")
                continue

            if theta_star is None:
                raise ConfigError("the stepsize-ratio coupling needs an operator with a known fixed point",
                                  "dynamic.operator")
            k = int(settings["k"])

            def coupled(block: range) -> np.ndarray:
                return stepsize_ratio_distances(alpha, k, steps, op, noise, stream.splits(block), theta_star,
                                                replica_ids=list(block))

            distances = run_replica_blocks(coupled, replicas, self.block_size, self.threads)
            entry = {"alpha": alpha, "k": k, "long_run": self._long_run(distances, settings["tail_fraction"])}
            reference = np.full(distances.shape[1], np.nan)
            if settings["independent_baseline"]:
                def independent(block: range) -> np.ndarray:
                    streams = stream.splits(block)
                    return stepsize_ratio_distances(
                        alpha, k, steps, op, noise, streams, theta_star,
                        independent_streams=[s.split(INDEPENDENT_KEY) for s in streams], replica_ids=list(block),
                    )

                baseline = run_replica_blocks(independent, replicas, self.block_size, self.threads)
                reference = baseline.mean(axis=0)
                entry["independent_long_run"] = self._long_run(baseline, settings["tail_fraction"])
            rows.extend(self._coupling_rows(variant, alpha, k, distances, reference, stride))
            summary["stepsizes"].append(entry)
            logging.info(f"alpha={alpha}: long-run coupled distance {entry['long_run']['mean']:.6g}")

        if variant == "stepsize-ratio":
            ordered = sorted(summary["stepsizes"], key=lambda item: -item["alpha"])
            means = [item["long_run"]["mean"] for item in ordered]
            summary["decreasing_as_alpha_decreases"] = all(a > b for a, b in zip(means, means[1:]))
        return save_coupling(pd.DataFrame(rows), summary, self.output_dir)

    def stationary_samples(self, e: int, alpha: float) -> np.ndarray:
        """One rescaled final state (theta_T - theta*)/sqrt(alpha) per replica, shape (R, d)."""
        steps = self.config.get_steps()
        stream = self.master.split(e)
        theta_star = self.dynamic.fixed_point

        def task(block: range) -> np.ndarray:
            batch = self.dynamic.run([alpha], steps, stream.splits(block), replica_ids=list(block))
            return batch.final[0]

        finals = run_replica_blocks(task, self.config.get_replicas(), self.block_size, self.threads)
        return (finals - theta_star) / math.sqrt(alpha)

    def run_w2_convergence(self) -> Dict[str, str]:
        """W2 between the rescaled stationary samples of consecutive stepsizes."""
        alphas = self.config.get_alphas()
        if len(alphas) < 2:
            raise ConfigError("w2-convergence needs at least two stepsizes", "alphas")
        samples = [self.stationary_samples(e, alpha) for e, alpha in enumerate(alphas)]
        cap = int(self.config.get("assignment_cap"))

        rows = []
        for i in range(len(alphas) - 1):
            xs, ys = samples[i], samples[i + 1]
            if xs.shape[1] == 1:
                estimate = empirical_w2_1d(xs[:, 0], ys[:, 0])
            else:
                estimate = empirical_w2_assignment(xs, ys, self.dynamic.norm_tag, cap)
            logging.info(f"W2(alpha={alphas[i]}, alpha={alphas[i + 1]}) = {estimate.value:.6g}")
            rows.append({"alpha": alphas[i], "alpha_ref": alphas[i + 1], "w2": estimate.value,
                         "method": estimate.method, "n": estimate.n_x})
        return save_w2(pd.DataFrame(rows), self.output_dir)


def run_configured(config: ExperimentConfig) -> Dict[str, str]:
    """Build a runner for ``config`` and run it."""
    return ExperimentRunner(config).run()
