"""
Configuration module for the SA lab: experiment configs, defaults, validation and presets.
"""

import copy
import json
import logging
import os
from pathlib import Path
from typing import Any, Dict, List, Optional

from ..models.errors import ConfigError


PRESET_DIR = Path(__file__).resolve().parent / "presets"

EXPERIMENT_KINDS = ("bias-sweep", "rr-compare", "q-experiment", "coupling", "w2-convergence")
COUPLING_VARIANTS = ("shared-noise", "stepsize-ratio")
DYNAMIC_TYPES = ("sa", "q")


class ExperimentConfig:
    """Experiment configuration: defaults merged with a user JSON file or dictionary."""

    # Default configuration values
    DEFAULT_CONFIG: Dict[str, Any] = {
        "kind": "bias-sweep",
        "dynamic": None,
        "alphas": [],
        "steps": 100000,
        "replicas": 32,
        "burn_in_fraction": 0.5,  # k0 = floor(fraction * steps)
        "beta": 0.5,              # RR exponent; 1.0 for smooth baselines
        "seed": 0,
        "output_dir": "output",
        "threads": 1,
        "block_size": 16,         # replicas per work unit; fixed so thread count never changes results
        "tie_tol": 1e-9,
        "q_tol": 1e-12,
        "assignment_cap": 256,
        "trajectory_stride": None,  # bias kinds: record replica 0 of every stepsize at this stride
        "coupling": {
            "variant": "shared-noise",
            "k": 2,
            "theta0_a": None,
            "theta0_b": None,
            "independent_baseline": True,
            "record_stride": 1,
            "tail_fraction": 0.5,
        },
    }

    def __init__(self, config_file: Optional[str] = None, data: Optional[Dict[str, Any]] = None):
        """
        Initialize the configuration.

        Args:
            config_file: Path to a JSON experiment config or an emitted manifest (optional)
            data: Configuration dictionary used instead of a file (optional)

        Raises:
            ConfigError: If the file does not parse or a field is invalid
        """
        self.config_data = copy.deepcopy(self.DEFAULT_CONFIG)
        self.source = config_file

        if config_file is not None:
            data = self._load_config(config_file)
        if data is not None:
            self._merge(data)
        self.validate()

    def _load_config(self, config_file: str) -> Dict[str, Any]:
        """
        Load configuration from a JSON file.

        A manifest (a document with ``config`` and ``outputs``) yields its echoed config.
        Relative MDP file references are resolved against the config file's directory.
        """
        if not os.path.exists(config_file):
            raise ConfigError(f"configuration file not found: {config_file}")
        with open(config_file, "r", encoding="utf-8") as f:
            text = f.read()
        try:
            data = json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigError(f"invalid JSON: {e.msg} (column {e.colno})", line=e.lineno)
        if not isinstance(data, dict):
            raise ConfigError("top level must be a JSON object", line=1)
        if "config" in data and "outputs" in data:
            logging.info(f"Replaying manifest {config_file}")
            data = data["config"]

        mdp = (data.get("dynamic") or {}).get("mdp") if isinstance(data.get("dynamic"), dict) else None
        if isinstance(mdp, dict) and isinstance(mdp.get("file"), str) and not os.path.isabs(mdp["file"]):
            candidate = os.path.join(os.path.dirname(os.path.abspath(config_file)), mdp["file"])
            if os.path.exists(candidate):
                mdp["file"] = os.path.normpath(candidate)
        return data

    def _merge(self, data: Dict[str, Any]) -> None:
        unknown = sorted(set(data) - set(self.DEFAULT_CONFIG))
        if unknown:
            raise ConfigError(f"unknown field(s) {unknown}", unknown[0])
        for key, value in data.items():
            if key == "coupling":
                if not isinstance(value, dict):
                    raise ConfigError("must be an object", "coupling")
                extra = sorted(set(value) - set(self.DEFAULT_CONFIG["coupling"]))
                if extra:
                    raise ConfigError(f"unknown field(s) {extra}", f"coupling.{extra[0]}")
                self.config_data["coupling"].update(value)
            else:
                self.config_data[key] = copy.deepcopy(value)

    def _require_number(self, key: str, kind: type, low: float, high: Optional[float] = None,
                        open_low: bool = False) -> None:
        value = self.config_data[key]
        if isinstance(value, bool) or not isinstance(value, (int, float)) or (kind is int and not float(value).is_integer()):
            raise ConfigError(f"expected {kind.__name__}, got {value!r}", key)
        below = value <= low if open_low else value < low
        if below or (high is not None and value > high):
            bound = f"({low}" if open_low else f"[{low}"
            raise ConfigError(f"value {value} outside {bound}, {high if high is not None else 'inf'}]", key)

    def validate(self) -> None:
        """
        Check every field.

        Raises:
            ConfigError: Naming the first offending field
        """
        data = self.config_data
        if data["kind"] not in EXPERIMENT_KINDS:
            raise ConfigError(f"unknown experiment kind '{data['kind']}', expected one of {EXPERIMENT_KINDS}", "kind")

        dynamic = data["dynamic"]
        if not isinstance(dynamic, dict):
            raise ConfigError("required section is missing", "dynamic")
        if dynamic.get("type") not in DYNAMIC_TYPES:
            raise ConfigError(f"expected one of {DYNAMIC_TYPES}", "dynamic.type")
        if dynamic["type"] == "sa" and "operator" not in dynamic:
            raise ConfigError("required field is missing", "dynamic.operator")
        if dynamic["type"] == "q" and "mdp" not in dynamic:
            raise ConfigError("required field is missing", "dynamic.mdp")
        if data["kind"] == "q-experiment" and dynamic["type"] != "q":
            raise ConfigError("q-experiment needs a Q-learning dynamic", "dynamic.type")
        if data["kind"] == "coupling" and dynamic["type"] != "sa":
            raise ConfigError("coupling experiments need an additive-noise dynamic", "dynamic.type")

        alphas = data["alphas"]
        if not isinstance(alphas, list) or not alphas:
            raise ConfigError("expected a non-empty list of stepsizes", "alphas")
        for i, alpha in enumerate(alphas):
            if isinstance(alpha, bool) or not isinstance(alpha, (int, float)) or not 0 < alpha <= 1:
                raise ConfigError(f"stepsize must lie in (0, 1], got {alpha!r}", f"alphas[{i}]")

        self._require_number("steps", int, 1)
        self._require_number("replicas", int, 2)
        self._require_number("burn_in_fraction", float, 0.0, 0.999999)
        self._require_number("beta", float, 0.0, None, open_low=True)
        self._require_number("seed", int, 0, 2 ** 64 - 1)
        self._require_number("threads", int, 1)
        self._require_number("block_size", int, 1)
        self._require_number("tie_tol", float, 0.0, None, open_low=True)
        self._require_number("q_tol", float, 0.0, None, open_low=True)
        self._require_number("assignment_cap", int, 1)
        stride = data["trajectory_stride"]
        if stride is not None and (isinstance(stride, bool) or not isinstance(stride, int) or stride < 1):
            raise ConfigError("must be null or a positive integer", "trajectory_stride")
        if not isinstance(data["output_dir"], str) or not data["output_dir"]:
            raise ConfigError("expected a directory path", "output_dir")

        coupling = data["coupling"]
        if coupling["variant"] not in COUPLING_VARIANTS:
            raise ConfigError(f"expected one of {COUPLING_VARIANTS}", "coupling.variant")
        k = coupling["k"]
        if isinstance(k, bool) or not isinstance(k, int) or k < 1:
            raise ConfigError("k must be a positive integer", "coupling.k")
        stride = coupling["record_stride"]
        if isinstance(stride, bool) or not isinstance(stride, int) or stride < 1:
            raise ConfigError("record_stride must be a positive integer", "coupling.record_stride")
        if not 0.0 <= coupling["tail_fraction"] < 1.0:
            raise ConfigError("tail_fraction must lie in [0, 1)", "coupling.tail_fraction")
        if data["kind"] in ("rr-compare", "q-experiment"):
            for i, alpha in enumerate(alphas):
                if 2 * alpha > 1:
                    raise ConfigError(f"the RR chain runs at 2 alpha = {2 * alpha} > 1", f"alphas[{i}]")

    def get(self, key: str) -> Any:
        """
        Get a configuration value.

        Args:
            key: Configuration key

        Returns:
            The configuration value
        """
        return self.config_data.get(key)

    def get_kind(self) -> str:
        return self.config_data["kind"]

    def get_dynamic(self) -> Dict[str, Any]:
        return self.config_data["dynamic"]

    def get_alphas(self) -> List[float]:
        return [float(alpha) for alpha in self.config_data["alphas"]]

    def get_steps(self) -> int:
        return int(self.config_data["steps"])

    def get_replicas(self) -> int:
        return int(self.config_data["replicas"])

    def get_burn_in_fraction(self) -> float:
        return float(self.config_data["burn_in_fraction"])

    def get_beta(self) -> float:
        return float(self.config_data["beta"])

    def get_seed(self) -> int:
        return int(self.config_data["seed"])

    def get_output_dir(self) -> str:
        """Get the output directory path."""
        return self.config_data["output_dir"]

    def get_threads(self) -> int:
        return int(self.config_data["threads"])

    def get_block_size(self) -> int:
        return int(self.config_data["block_size"])

    def get_trajectory_stride(self) -> Optional[int]:
        stride = self.config_data["trajectory_stride"]
        return None if stride is None else int(stride)

    def get_coupling(self) -> Dict[str, Any]:
        return self.config_data["coupling"]

    def override(self, seed: Optional[int] = None, output_dir: Optional[str] = None,
                 threads: Optional[int] = None) -> "ExperimentConfig":
        """Apply command-line overrides and re-validate."""
        if seed is not None:
            self.config_data["seed"] = seed
        if output_dir is not None:
            self.config_data["output_dir"] = output_dir
        if threads is not None:
            self.config_data["threads"] = threads
        self.validate()
        return self

    def to_dict(self) -> Dict[str, Any]:
        return copy.deepcopy(self.config_data)

    def save_config(self, config_file: str) -> None:
        """
        Save the current configuration to a file.

        Args:
            config_file: Path to save the configuration
        """
        with open(config_file, "w", encoding="utf-8") as f:
            json.dump(self.config_data, f, indent=4)


def list_presets() -> List[str]:
    """Names of the shipped preset experiments."""
    return sorted(path.stem for path in PRESET_DIR.glob("*.json"))


def load_preset(name: str) -> ExperimentConfig:
    """
    Load a shipped preset by name.

    Raises:
        ConfigError: If no preset has that name
    """
    path = PRESET_DIR / f"{name}.json"
    if not path.exists():
        raise ConfigError(f"unknown preset '{name}', available: {', '.join(list_presets())}", "preset")
    return ExperimentConfig(str(path))


def load_config(config_file: Optional[str] = None, preset: Optional[str] = None) -> ExperimentConfig:
    """
    Load an experiment configuration from a preset name or a JSON file.

    Args:
        config_file: Path to a config or manifest JSON (optional)
        preset: Preset name, takes precedence over the file (optional)

    Returns:
        ExperimentConfig instance
    """
    if preset:
        return load_preset(preset)
    if config_file is None:
        raise ConfigError("no configuration given; use --config or --preset")
    return ExperimentConfig(config_file)
