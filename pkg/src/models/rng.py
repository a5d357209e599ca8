"""
Deterministic, splittable random streams.

A stream is identified by ``(seed, path, counter)``. The path is hashed together
with the seed by ``numpy.random.SeedSequence`` into a Philox key, and the counter
addresses Philox blocks (four 64-bit words each). Every output is therefore a
pure function of the identifying triple, which is what lets replicas run on any
worker in any order and still reproduce bit-for-bit.
"""

from typing import Iterable, List, Sequence, Tuple

import numpy as np

from .errors import InvalidArgumentError


WORDS_PER_BLOCK = 4
MAX_SEED = 2 ** 64
_UNIT = 2.0 ** -53


def _words_to_unit(words: np.ndarray) -> np.ndarray:
    """Map 64-bit words to uniforms strictly inside (0, 1) using their top 53 bits."""
    return ((words >> np.uint64(11)).astype(np.float64) + 0.5) * _UNIT


def _validate_probabilities(probs: np.ndarray) -> None:
    if probs.ndim != 1 or probs.size == 0:
        raise InvalidArgumentError("probability vector must be a non-empty 1-D array")
    if not np.all(np.isfinite(probs)) or np.any(probs < 0):
        raise InvalidArgumentError("probability entries must be finite and non-negative")
    if abs(float(probs.sum()) - 1.0) > 1e-9:
        raise InvalidArgumentError(f"probabilities sum to {float(probs.sum())!r}, not 1")


def categorical_from_uniforms(cdf: np.ndarray, uniforms: np.ndarray) -> np.ndarray:
    """
    Inverse-CDF categorical sampling, vectorized over leading axes.

    Args:
        cdf: Cumulative probabilities along the last axis, shape (..., n)
        uniforms: Uniform draws in (0, 1), shape broadcastable to cdf.shape[:-1]

    Returns:
        Integer indices with the same shape as ``uniforms`` broadcast against ``cdf[..., 0]``.
        A CDF whose total is off 1 by rounding is rescaled, and categories without mass
        are never returned.
    """
    total = cdf[..., -1:]
    index = (uniforms[..., None] * total >= cdf).sum(axis=-1)
    # first position reaching the total is the last category with positive mass
    last = (cdf < total).sum(axis=-1)
    return np.minimum(index, last)


class RngStream:
    """
    Counter-based random source addressed by (seed, path, counter).

    The stream is owned by a single worker; only its counter changes as draws are taken.
    """

    def __init__(self, seed: int = 0, path: Sequence[int] = (), counter: int = 0):
        """
        Initialize a stream.

        Args:
            seed: Master seed, an unsigned 64-bit integer
            path: Split keys (non-negative integers) identifying the sub-stream
            counter: Number of Philox blocks already consumed

        Raises:
            InvalidArgumentError: If the seed, a split key or the counter is out of range
        """
        seed = int(seed)
        if not 0 <= seed < MAX_SEED:
            raise InvalidArgumentError(f"seed must be an unsigned 64-bit integer, got {seed}")
        path = tuple(int(key) for key in path)
        if any(key < 0 for key in path):
            raise InvalidArgumentError(f"split keys must be non-negative, got {path}")
        if counter < 0:
            raise InvalidArgumentError("counter must be non-negative")

        self.seed = seed
        self.path: Tuple[int, ...] = path
        self.counter = int(counter)

        key = np.random.SeedSequence(entropy=seed, spawn_key=path).generate_state(2, dtype=np.uint64)
        self._key = key
        self._bitgen = np.random.Philox(key=key, counter=self.counter)

    def split(self, key: int) -> "RngStream":
        """Return the independent child stream at ``path + (key,)``."""
        return RngStream(self.seed, self.path + (int(key),))

    def splits(self, keys: Iterable[int]) -> List["RngStream"]:
        """Return one child stream per key, in order."""
        return [self.split(key) for key in keys]

    def at(self, counter: int) -> "RngStream":
        """Return a fresh stream with the same identity positioned at ``counter``."""
        return RngStream(self.seed, self.path, counter)

    def _blocks(self, n_blocks: int) -> np.ndarray:
        words = self._bitgen.random_raw(n_blocks * WORDS_PER_BLOCK)
        self.counter += n_blocks
        return words

    def draw_steps(self, n_steps: int, n_uniform: int = 0, n_normal: int = 0) -> Tuple[np.ndarray, np.ndarray]:
        """
        Draw the randomness of ``n_steps`` chain steps.

        Each step consumes a fixed number of blocks, ceil((n_uniform + 2*ceil(n_normal/2)) / 4),
        so drawing k steps at once yields exactly what k single-step draws would.
        Normals come from the Box-Muller transform of consecutive uniform pairs
        (cosine branch first, then sine branch).

        Args:
            n_steps: Number of steps
            n_uniform: Uniforms in (0, 1) needed per step
            n_normal: Standard normals needed per step

        Returns:
            Tuple (uniforms of shape (n_steps, n_uniform), normals of shape (n_steps, n_normal))
        """
        pairs = -(-n_normal // 2)
        width = n_uniform + 2 * pairs
        blocks_per_step = max(1, -(-width // WORDS_PER_BLOCK))
        words = self._blocks(n_steps * blocks_per_step).reshape(n_steps, blocks_per_step * WORDS_PER_BLOCK)
        unit = _words_to_unit(words[:, :width])

        uniforms = unit[:, :n_uniform]
        normals = np.empty((n_steps, 2 * pairs))
        if pairs:
            pair_draws = unit[:, n_uniform:width]
            radius = np.sqrt(-2.0 * np.log(pair_draws[:, 0::2]))
            angle = 2.0 * np.pi * pair_draws[:, 1::2]
            normals[:, 0::2] = radius * np.cos(angle)
            normals[:, 1::2] = radius * np.sin(angle)
        return uniforms, normals[:, :n_normal]

    def uniforms(self, n: int) -> np.ndarray:
        """Draw ``n`` uniforms in (0, 1)."""
        return self.draw_steps(1, n_uniform=n)[0][0]

    def normals(self, n: int) -> np.ndarray:
        """Draw ``n`` standard normals."""
        return self.draw_steps(1, n_normal=n)[1][0]

    def standard_normal(self) -> float:
        """Draw one N(0, 1) value; always advances the counter by one block."""
        return float(self.draw_steps(1, n_normal=1)[1][0, 0])

    def sample_categorical(self, probs: Sequence[float]) -> int:
        """
        Draw an index with the given probabilities.

        Raises:
            InvalidArgumentError: If ``probs`` is not a probability vector
        """
        probs = np.asarray(probs, dtype=float)
        _validate_probabilities(probs)
        u = self.uniforms(1)[0]
        return int(categorical_from_uniforms(np.cumsum(probs), np.asarray(u)))

    def sample_dirichlet(self, concentration: Sequence[float]) -> np.ndarray:
        """
        Draw a probability vector from Dirichlet(concentration).

        One block keys a child Philox generator whose gamma sampler produces the
        vector, so the parent counter advances by exactly one block per draw.

        Raises:
            InvalidArgumentError: If any concentration entry is not strictly positive
        """
        concentration = np.asarray(concentration, dtype=float)
        if concentration.ndim != 1 or concentration.size == 0:
            raise InvalidArgumentError("concentration must be a non-empty 1-D vector")
        if not np.all(np.isfinite(concentration)) or np.any(concentration <= 0):
            raise InvalidArgumentError("every concentration entry must be > 0")

        words = self._blocks(1)
        if concentration.size == 1:
            return np.ones(1)
        child = np.random.Generator(np.random.Philox(key=words[:2]))
        draws = child.gamma(concentration)
        return draws / draws.sum()

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, path={self.path}, counter={self.counter})"


def replica_streams(master: RngStream, experiment: int, replicas: Sequence[int]) -> List[RngStream]:
    """
    Streams for the given replicas of one experiment: path ``master.path + (experiment, r)``.

    Args:
        master: Master stream (usually the root stream of the seed)
        experiment: Experiment index (stepsize index within a sweep)
        replicas: Replica indices

    Returns:
        One stream per replica index
    """
    parent = master.split(experiment)
    return [parent.split(r) for r in replicas]
