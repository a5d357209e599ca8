"""
Output generator module for the CSV/JSON artifacts and the run manifest.
"""

import hashlib
import json
import os
from pathlib import Path
from typing import Any, Dict

import pandas as pd

from .. import __version__
from ..models.reports import BiasReport
from ..models.trajectory import Trajectory


BIAS_FILE = "bias.csv"
SLOPE_FILE = "slope.json"
COUPLING_FILE = "coupling.csv"
COUPLING_SUMMARY_FILE = "coupling.json"
W2_FILE = "w2.csv"
MANIFEST_FILE = "manifest.json"
TRAJECTORY_FILE = "trajectory_alpha{alpha:g}.csv"

COUPLING_COLUMNS = ["variant", "alpha", "k", "step", "mean_sq_distance", "stderr", "reference"]
W2_COLUMNS = ["alpha", "alpha_ref", "w2", "method", "n"]


def ensure_output_dir(output_dir: str) -> str:
    """Create the output directory (and parents) if needed and return it."""
    Path(output_dir).mkdir(parents=True, exist_ok=True)
    return output_dir


def write_frame(frame: pd.DataFrame, output_dir: str, filename: str) -> str:
    """
    Write a DataFrame as CSV.

    Floats keep their shortest round-trip representation.

    Returns:
        Path to the created file
    """
    path = os.path.join(ensure_output_dir(output_dir), filename)
    frame.to_csv(path, index=False)
    return path


def write_json(data: Dict[str, Any], output_dir: str, filename: str) -> str:
    """Write a JSON document with a trailing newline and return its path."""
    path = os.path.join(ensure_output_dir(output_dir), filename)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        json.dump(data, f, indent=4, allow_nan=False)
        f.write("\n")
    return path


def save_bias_report(report: BiasReport, output_dir: str) -> Dict[str, str]:
    """
    Save a bias report as bias.csv and slope.json.

    Returns:
        Dictionary mapping file names to the created paths
    """
    return {
        BIAS_FILE: write_frame(report.to_frame(), output_dir, BIAS_FILE),
        SLOPE_FILE: write_json(report.to_summary(), output_dir, SLOPE_FILE),
    }


def save_coupling(frame: pd.DataFrame, summary: Dict[str, Any], output_dir: str) -> Dict[str, str]:
    """Save coupling.csv and coupling.json."""
    return {
        COUPLING_FILE: write_frame(frame[COUPLING_COLUMNS], output_dir, COUPLING_FILE),
        COUPLING_SUMMARY_FILE: write_json(summary, output_dir, COUPLING_SUMMARY_FILE),
    }


def save_w2(frame: pd.DataFrame, output_dir: str) -> Dict[str, str]:
    """Save w2.csv."""
    return {W2_FILE: write_frame(frame[W2_COLUMNS], output_dir, W2_FILE)}


def save_trajectory(trajectory: Trajectory, output_dir: str) -> Dict[str, str]:
    """
    Save one recorded chain as trajectory_alpha<alpha>.csv with columns step, component_0, ...

    Returns:
        Dictionary mapping the file name to the created path
    """
    filename = TRAJECTORY_FILE.format(alpha=trajectory.stepsize)
    return {filename: write_frame(trajectory.to_frame(), output_dir, filename)}


def file_digest(path: str) -> str:
    """SHA-256 hex digest of a file."""
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


def save_manifest(config: Dict[str, Any], outputs: Dict[str, str], wall_time: float, output_dir: str) -> str:
    """
    Write manifest.json: the config echo, seed, package version, output digests and wall time.

    Passing the manifest back through ``--config`` replays the run.
    """
    manifest = {
        "version": __version__,
        "seed": config["seed"],
        "config": config,
        "outputs": {name: {"file": os.path.basename(path), "sha256": file_digest(path)}
                    for name, path in sorted(outputs.items())},
        "wall_time_seconds": round(wall_time, 3),
    }
    return write_json(manifest, output_dir, MANIFEST_FILE)
