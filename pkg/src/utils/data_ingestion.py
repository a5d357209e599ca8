"""
Data ingestion module: the MDP text format and construction of dynamics from config sections.
"""

import logging
import os
from typing import Any, Dict, List, Optional

import numpy as np

from ..models.errors import ConfigError, InvalidArgumentError, MdpFormatError
from ..models.mdp import DEFAULT_GAMMA, DEFAULT_REWARD_NOISE_STD, Mdp, make_type_a, random_mdp
from ..models.operators import (
    NoiseSpec,
    OperatorSpec,
    linear_operator,
    log_cosh_1d,
    max_affine,
    scaled_abs_1d,
)
from ..models.rng import RngStream


HEADER_KEYS = ("n_states", "n_actions", "gamma", "reward_noise_std")
SECTIONS = ("P", "r_bar", "kappa_b")

# random MDPs live on their own branch of the master seed, away from replica paths (e, r)
MDP_STREAM_KEY = 2 ** 32


def _format_row(values) -> str:
    return " ".join(repr(float(v)) for v in values)


def format_mdp(mdp: Mdp) -> str:
    """
    Render an MDP in the text format.

    Floats are written in shortest round-trip form, so ``parse_mdp(format_mdp(m))``
    reproduces every entry exactly.
    """
    lines = [
        "# finite discounted MDP",
        f"n_states {mdp.n_states}",
        f"n_actions {mdp.n_actions}",
        f"gamma {mdp.gamma!r}",
        f"reward_noise_std {mdp.reward_noise_std!r}",
        "P",
    ]
    lines.extend(_format_row(row) for row in mdp.P)
    lines.append("r_bar")
    lines.append(_format_row(mdp.r_bar))
    lines.append("kappa_b")
    lines.append(_format_row(mdp.kappa_b))
    return "\n".join(lines) + "\n"


def _parse_floats(text: str, line_no: int) -> List[float]:
    try:
        return [float(token) for token in text.split()]
    except ValueError as e:
        raise MdpFormatError(f"invalid number ({e})", line_no)


def parse_mdp(text: str) -> Mdp:
    """
    Parse the MDP text format.

    Header lines are ``key value`` pairs; the ``P`` section holds one row per
    state-action pair, ``r_bar`` and ``kappa_b`` one line each. Blank lines and
    ``#`` comments are ignored.

    Raises:
        MdpFormatError: With the offending line number
    """
    header: Dict[str, str] = {}
    sections: Dict[str, List[List[float]]] = {}
    current: Optional[str] = None
    last_line = 0

    for line_no, raw in enumerate(text.splitlines(), start=1):
        last_line = line_no
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line in SECTIONS:
            if line in sections:
                raise MdpFormatError(f"duplicate section '{line}'", line_no)
            current = line
            sections[current] = []
            continue
        if current is None:
            parts = line.split()
            if len(parts) != 2 or parts[0] not in HEADER_KEYS:
                raise MdpFormatError(f"expected one of {HEADER_KEYS} followed by a value, got '{line}'", line_no)
            header[parts[0]] = parts[1]
            continue
        sections[current].append(_parse_floats(line, line_no))

    missing = [key for key in HEADER_KEYS[:2] if key not in header]
    if missing:
        raise MdpFormatError(f"missing header field(s) {missing}", last_line)
    try:
        n_states = int(header["n_states"])
        n_actions = int(header["n_actions"])
        gamma = float(header.get("gamma", DEFAULT_GAMMA))
        noise_std = float(header.get("reward_noise_std", DEFAULT_REWARD_NOISE_STD))
    except ValueError as e:
        raise MdpFormatError(f"invalid header value ({e})")
    for name in ("P", "r_bar"):
        if name not in sections:
            raise MdpFormatError(f"missing section '{name}'", last_line)

    n_pairs = n_states * n_actions
    P = sections["P"]
    if len(P) != n_pairs or any(len(row) != n_states for row in P):
        raise MdpFormatError(f"P must have {n_pairs} rows of {n_states} entries")
    r_bar = [v for row in sections["r_bar"] for v in row]
    kappa_b = [v for row in sections.get("kappa_b", []) for v in row] or None

    try:
        return Mdp(n_states, n_actions, P, r_bar, gamma, noise_std, kappa_b)
    except InvalidArgumentError as e:
        raise MdpFormatError(str(e))


def load_mdp(file_path: str) -> Mdp:
    """
    Load an MDP from a text file.

    Raises:
        FileNotFoundError: If the file does not exist
        MdpFormatError: If the file does not parse
    """
    if not os.path.exists(file_path):
        raise FileNotFoundError(f"MDP file not found: {file_path}")
    with open(file_path, "r", encoding="utf-8") as f:
        mdp = parse_mdp(f.read())
    logging.debug(f"Loaded {mdp} from {file_path}")
    return mdp


def save_mdp(mdp: Mdp, file_path: str) -> str:
    """Write an MDP to a text file and return the path."""
    with open(file_path, "w", encoding="utf-8", newline="\n") as f:
        f.write(format_mdp(mdp))
    return file_path


def _require(section: Dict[str, Any], key: str, field: str) -> Any:
    if key not in section:
        raise ConfigError("required field is missing", f"{field}.{key}")
    return section[key]


def build_operator(section: Dict[str, Any], field: str = "dynamic.operator") -> OperatorSpec:
    """
    Build an OperatorSpec from a config section such as ``{"type": "scaled_abs_1d", "b": 0.0}``.

    Supported types: linear (A, b, norm), scaled_abs_1d (b), log_cosh_1d (b),
    max_affine (slopes, intercepts, scale).

    Raises:
        ConfigError: If the type is unknown or a field is missing or invalid
    """
    kind = _require(section, "type", field)
    try:
        if kind == "linear":
            return linear_operator(_require(section, "A", field), section.get("b", 0.0), section.get("norm", "ell2"))
        if kind == "scaled_abs_1d":
            return scaled_abs_1d(section.get("b", 0.0))
        if kind == "log_cosh_1d":
            return log_cosh_1d(section.get("b", 0.0))
        if kind == "max_affine":
            return max_affine(_require(section, "slopes", field), _require(section, "intercepts", field),
                              float(_require(section, "scale", field)))
    except ConfigError:
        raise
    except InvalidArgumentError as e:
        raise ConfigError(str(e), field)
    raise ConfigError(f"unknown operator type '{kind}'", f"{field}.type")


def build_noise(section: Dict[str, Any], dimension: int, field: str = "dynamic.noise") -> NoiseSpec:
    """
    Build a NoiseSpec from ``{"kind": ..., "covariance": ...}``.

    A scalar covariance means ``variance * I``.

    Raises:
        ConfigError: If the section is invalid or does not match the operator dimension
    """
    covariance = section.get("covariance", 1.0)
    if np.ndim(covariance) == 0:
        covariance = float(covariance) * np.eye(dimension)
    try:
        noise = NoiseSpec(section.get("kind", "gaussian"), covariance)
    except InvalidArgumentError as e:
        raise ConfigError(str(e), field)
    if noise.dimension != dimension:
        raise ConfigError(f"noise dimension {noise.dimension} does not match operator dimension {dimension}", field)
    return noise


def build_mdp(section: Dict[str, Any], master: RngStream, field: str = "dynamic.mdp") -> Mdp:
    """
    Build an MDP from one of ``{"file": path}``, ``{"inline": {...}}`` or ``{"random": {...}}``.

    Random MDPs are drawn from the master seed's MDP branch. ``"type_a": true`` applies
    the shared-first-two-actions construction afterwards.

    Raises:
        ConfigError: If the section is invalid
    """
    try:
        if "file" in section:
            mdp = load_mdp(section["file"])
        elif "inline" in section:
            inline = section["inline"]
            mdp = Mdp(
                _require(inline, "n_states", f"{field}.inline"),
                _require(inline, "n_actions", f"{field}.inline"),
                _require(inline, "P", f"{field}.inline"),
                _require(inline, "r_bar", f"{field}.inline"),
                inline.get("gamma", DEFAULT_GAMMA),
                inline.get("reward_noise_std", DEFAULT_REWARD_NOISE_STD),
                inline.get("kappa_b"),
            )
        elif "random" in section:
            spec = section["random"]
            mdp = random_mdp(
                master.split(MDP_STREAM_KEY),
                int(_require(spec, "n_states", f"{field}.random")),
                int(_require(spec, "n_actions", f"{field}.random")),
                float(spec.get("gamma", DEFAULT_GAMMA)),
                float(spec.get("reward_noise_std", DEFAULT_REWARD_NOISE_STD)),
            )
        else:
            raise ConfigError("expected one of 'file', 'inline' or 'random'", field)
        if section.get("type_a", False):
            mdp = make_type_a(mdp)
    except (InvalidArgumentError, FileNotFoundError) as e:
        if isinstance(e, ConfigError):
            raise
        raise ConfigError(str(e), field)
    return mdp
