"""
Main application for the SA lab: command-line parsing, experiment runs and MDP descriptions.
"""

import argparse
import logging
import os
import sys
import time
from typing import Any, Dict, List, Optional

import numpy as np

from .config.config import ExperimentConfig, list_presets, load_config
from .models.errors import (
    DivergenceError,
    InvalidArgumentError,
    MdpFormatError,
    NonConvergenceError,
)
from .models.mdp import classify, gamma0, solve_q_star
from .utils.data_ingestion import load_mdp
from .utils.experiment_runner import run_configured
from .utils.output_generator import save_manifest


EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_INVALID_INPUT = 2
EXIT_NUMERICAL = 3


def setup_logging(verbose: bool = False) -> None:
    """
    Set up logging configuration.

    Args:
        verbose: Whether to use verbose (DEBUG) logging
    """
    log_level = logging.DEBUG if verbose else logging.INFO

    logging.basicConfig(
        level=log_level,
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        handlers=[
            logging.StreamHandler()
        ]
    )


def parse_arguments(argv: Optional[List[str]] = None) -> Dict[str, Any]:
    """
    Parse command-line arguments.

    Returns:
        Dictionary of parsed arguments
    """
    parser = argparse.ArgumentParser(description='Constant-stepsize SA and Q-learning experiments')

    parser.add_argument('--config', '-c', type=str, default='config.json',
                        help='Path to an experiment config or a manifest to replay (default: config.json)')

    parser.add_argument('--preset', '-p', type=str,
                        help='Name of a shipped preset experiment (takes precedence over --config)')

    parser.add_argument('--seed', '-s', type=int,
                        help='Master seed (overrides config file)')

    parser.add_argument('--out', '-o', type=str,
                        help='Output directory (overrides config file)')

    parser.add_argument('--threads', '-t', type=int,
                        help='Worker threads (overrides config file)')

    parser.add_argument('--describe-mdp', type=str, metavar='PATH',
                        help='Print q*, optimal actions, tied/rooted flags and the type of an MDP file')

    parser.add_argument('--list-presets', action='store_true',
                        help='List the shipped presets and exit')

    parser.add_argument('--verbose', '-v', action='store_true',
                        help='Enable verbose output')

    return vars(parser.parse_args(argv))


def run_experiment(config: ExperimentConfig) -> Dict[str, str]:
    """
    Run a configured experiment and write its artifacts plus manifest.json.

    Args:
        config: Validated experiment configuration

    Returns:
        Dictionary mapping artifact names (including "manifest.json") to written paths

    Raises:
        ConfigError: If the dynamic cannot be built
        DivergenceError: Naming the replica and stepsize that diverged
    """
    logging.info(f"Configuration: kind={config.get_kind()}, alphas={config.get_alphas()}, "
                 f"steps={config.get_steps()}, replicas={config.get_replicas()}, seed={config.get_seed()}")
    started = time.perf_counter()
    outputs = run_configured(config)
    elapsed = time.perf_counter() - started
    outputs["manifest.json"] = save_manifest(config.to_dict(), outputs, elapsed, config.get_output_dir())
    for name, path in outputs.items():
        logging.info(f"{name} written to {path}")
    return outputs


def describe_mdp(path: str, tie_tol: float = 1e-9) -> str:
    """
    Classification report of an MDP file.

    Lists q*, A*(s) with tied/rooted flags per state, the MDP type and gamma0 for
    D = I and D = diag(kappa_b).

    Raises:
        FileNotFoundError: If the file does not exist
        MdpFormatError: If the file does not parse
    """
    mdp = load_mdp(path)
    q_star = solve_q_star(mdp)
    states, mdp_type = classify(mdp, q_star, tie_tol)
    table = q_star.reshape(mdp.n_states, mdp.n_actions)

    lines = [f"{mdp}", "q*:"]
    for s in range(mdp.n_states):
        values = " ".join(f"{v:.10g}" for v in table[s])
        lines.append(f"  state {s}: {values}")
    for entry in states:
        lines.append(f"state {entry.state}: A*={list(entry.optimal_actions)} "
                     f"tied={entry.tied} rooted={entry.rooted}")
    lines.append(f"type: {mdp_type}")
    lines.append(f"gamma0 (D = I): {gamma0(mdp, np.ones(mdp.n_pairs)):.10g}")
    lines.append(f"gamma0 (D = diag(kappa_b)): {gamma0(mdp, mdp.kappa_b):.10g}")
    return "\n".join(lines)


def exit_code(error: Exception) -> int:
    """Exit status for an error: 2 for bad input, 3 for numerical failures, 1 otherwise."""
    if isinstance(error, (DivergenceError, NonConvergenceError)):
        return EXIT_NUMERICAL
    if isinstance(error, (InvalidArgumentError, MdpFormatError, FileNotFoundError)):
        return EXIT_INVALID_INPUT
    return EXIT_FAILURE


def main(argv: Optional[List[str]] = None) -> int:
    """
    Main entry point for the application.

    Returns:
        Exit code (0 for success, non-zero for error)
    """
    args: Dict[str, Any] = {}
    try:
        # Parse command-line arguments
        args = parse_arguments(argv)

        # Set up logging
        setup_logging(args.get('verbose', False))

        if args.get('list_presets'):
            for name in list_presets():
                print(name)
            return EXIT_OK

        if args.get('describe_mdp'):
            print(describe_mdp(args['describe_mdp']))
            return EXIT_OK

        config = load_config(args.get('config'), args.get('preset'))
        config.override(seed=args.get('seed'), output_dir=args.get('out'), threads=args.get('threads'))
        outputs = run_experiment(config)

        # Print summary
        print("\nExperiment complete!")
        for name, path in outputs.items():
            print(f"{name}: {os.path.abspath(path)}")
        return EXIT_OK

    except Exception as e:
        logging.error(f"Error: {e}")
        if args.get('verbose', False):
            import traceback
            traceback.print_exc()
        return exit_code(e)


if __name__ == "__main__":
    sys.exit(main())
