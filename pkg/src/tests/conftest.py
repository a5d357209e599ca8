"""
Shared fixtures for the test suite.
"""

import math
import os

import pytest

from src.config.config import PRESET_DIR
from src.models.mdp import Mdp
from src.models.operators import NoiseSpec, linear_operator, scaled_abs_1d
from src.models.rng import RngStream


@pytest.fixture
def stream():
    return RngStream(12345)


@pytest.fixture
def chain_mdp():
    """2-state, 1-action chain: state 0 -> state 1 (absorbing), r_bar = (1, 0), gamma = 0.5."""
    return Mdp(2, 1, [[0.0, 1.0], [0.0, 1.0]], [1.0, 0.0], gamma=0.5, reward_noise_std=0.0)


@pytest.fixture
def deterministic_mdp():
    """2 states, 2 actions, one-hot transitions, no reward noise."""
    P = [[0.0, 1.0], [1.0, 0.0], [1.0, 0.0], [0.0, 1.0]]
    return Mdp(2, 2, P, [0.5, 0.1, 0.2, 0.8], gamma=0.9, reward_noise_std=0.0)


@pytest.fixture
def noisy_mdp():
    """3 states, 2 actions with dense transitions and the default reward noise."""
    P = [
        [0.2, 0.5, 0.3],
        [0.4, 0.4, 0.2],
        [0.6, 0.1, 0.3],
        [0.1, 0.1, 0.8],
        [0.3, 0.3, 0.4],
        [0.5, 0.25, 0.25],
    ]
    return Mdp(3, 2, P, [0.7, 0.3, 0.2, 0.9, 0.4, 0.1], gamma=0.9, reward_noise_std=math.sqrt(0.3))


@pytest.fixture
def ar1():
    return linear_operator([[0.5]], [0.0])


@pytest.fixture
def scaled_abs():
    return scaled_abs_1d(0.0)


@pytest.fixture
def unit_noise():
    return NoiseSpec("gaussian", 1.0)


@pytest.fixture
def fixture_path():
    def path(name: str) -> str:
        return os.path.join(str(PRESET_DIR), name)
    return path


def small_sa_config(run_dir: str, **changes) -> dict:
    """A fast rr-compare config on the scaled absolute-value operator."""
    config = {
        "kind": "rr-compare",
        "dynamic": {
            "type": "sa",
            "operator": {"type": "scaled_abs_1d", "b": 0.0},
            "noise": {"kind": "gaussian", "covariance": 1.0},
            "theta0": [1.0],
        },
        "alphas": [0.1, 0.2, 0.4],
        "steps": 2000,
        "replicas": 8,
        "block_size": 4,
        "seed": 7,
        "output_dir": run_dir,
    }
    config.update(changes)
    return config


@pytest.fixture
def sa_config_factory(tmp_path):
    def factory(name: str = "run", **changes) -> dict:
        return small_sa_config(str(tmp_path / name), **changes)
    return factory
