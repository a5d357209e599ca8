"""
Contractive operators and additive noise models for the SA recursion.

Every ``apply`` map works on arrays of shape ``(..., d)`` so that batches of
replicas (and paired chains at several stepsizes) advance in one call.
"""

from typing import Callable, Optional, Sequence, Tuple

import numpy as np

from .errors import InvalidArgumentError
from .rng import RngStream


NORM_TAGS = ("ell2", "ellinf")
NOISE_KINDS = ("gaussian", "rademacher_scaled")


def norm(x: np.ndarray, norm_tag: str) -> np.ndarray:
    """
    Norm along the last axis.

    Args:
        x: Array of shape (..., d)
        norm_tag: "ell2" or "ellinf"

    Returns:
        Array of shape (...)
    """
    x = np.asarray(x, dtype=float)
    if norm_tag == "ell2":
        return np.sqrt(np.sum(x * x, axis=-1))
    if norm_tag == "ellinf":
        return np.max(np.abs(x), axis=-1)
    raise InvalidArgumentError(f"unknown norm tag '{norm_tag}', expected one of {NORM_TAGS}")


class OperatorSpec:
    """
    A contractive map T on R^d with its norm, contraction modulus and (optionally) fixed point.

    Decomposability of user-supplied maps is the caller's responsibility; only the
    contraction inequality is checked, and only statistically (see ``contraction_violation``).
    """

    def __init__(
        self,
        dimension: int,
        apply: Callable[[np.ndarray], np.ndarray],
        contraction_modulus: float,
        norm_tag: str = "ell2",
        fixed_point: Optional[Sequence[float]] = None,
        name: str = "custom",
        affine: Optional[Tuple[np.ndarray, np.ndarray]] = None,
    ):
        """
        Initialize an operator.

        Args:
            dimension: State dimension d
            apply: Map from arrays of shape (..., d) to arrays of the same shape
            contraction_modulus: Lipschitz constant gamma in (0, 1) w.r.t. the norm
            norm_tag: Norm in which T contracts ("ell2" or "ellinf")
            fixed_point: The fixed point theta* when analytically known
            name: Label used in logs and reports
            affine: The pair (A, b) when T(theta) = A theta + b

        Raises:
            InvalidArgumentError: If any field is out of range
        """
        if int(dimension) < 1:
            raise InvalidArgumentError(f"dimension must be positive, got {dimension}")
        if not 0.0 < contraction_modulus < 1.0:
            raise InvalidArgumentError(f"contraction modulus must lie in (0, 1), got {contraction_modulus}")
        if norm_tag not in NORM_TAGS:
            raise InvalidArgumentError(f"unknown norm tag '{norm_tag}', expected one of {NORM_TAGS}")

        self.dimension = int(dimension)
        self._apply = apply
        self.contraction_modulus = float(contraction_modulus)
        self.norm_tag = norm_tag
        self.name = name
        self.affine = affine
        self.fixed_point = None
        if fixed_point is not None:
            fixed_point = np.asarray(fixed_point, dtype=float).reshape(-1)
            if fixed_point.shape != (self.dimension,):
                raise InvalidArgumentError(
                    f"fixed point has dimension {fixed_point.size}, operator has {self.dimension}"
                )
            self.fixed_point = fixed_point

    def apply(self, theta: np.ndarray) -> np.ndarray:
        """Evaluate T on an array of shape (..., d)."""
        return self._apply(theta)

    def __call__(self, theta: np.ndarray) -> np.ndarray:
        return self._apply(theta)

    def norm(self, x: np.ndarray) -> np.ndarray:
        """The operator's c-norm along the last axis."""
        return norm(x, self.norm_tag)

    def residual(self) -> float:
        """||T(theta*) - theta*||_c, or NaN when no fixed point is declared."""
        if self.fixed_point is None:
            return float("nan")
        return float(self.norm(self.apply(self.fixed_point) - self.fixed_point))

    def __str__(self) -> str:
        return f"OperatorSpec({self.name}, d={self.dimension}, gamma={self.contraction_modulus}, {self.norm_tag})"


def _iterate_fixed_point(apply: Callable[[np.ndarray], np.ndarray], start: np.ndarray,
                         modulus: float, tol: float = 1e-14, max_iters: int = 10_000) -> np.ndarray:
    theta = start
    for _ in range(max_iters):
        nxt = apply(theta)
        if np.max(np.abs(nxt - theta)) <= tol * (1.0 - modulus):
            return nxt
        theta = nxt
    return theta


def linear_operator(A, b, norm_tag: str = "ell2") -> OperatorSpec:
    """
    T(theta) = A theta + b.

    Args:
        A: d x d matrix (a scalar is read as a 1 x 1 matrix)
        b: Offset vector (a scalar is read as a length-1 vector)
        norm_tag: "ell2" uses the spectral norm of A as modulus, "ellinf" the max absolute row sum

    Raises:
        InvalidArgumentError: If A is not a contraction in the requested norm
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    d = A.shape[0]
    if A.shape != (d, d) or b.shape != (d,):
        raise InvalidArgumentError(f"A must be square and match b, got {A.shape} and {b.shape}")

    if norm_tag == "ell2":
        modulus = float(np.linalg.norm(A, 2))
    elif norm_tag == "ellinf":
        modulus = float(np.max(np.sum(np.abs(A), axis=1)))
    else:
        raise InvalidArgumentError(f"unknown norm tag '{norm_tag}'")
    if modulus >= 1.0:
        raise InvalidArgumentError(f"||A|| = {modulus} in {norm_tag}; a contraction needs < 1")

    fixed_point = np.linalg.solve(np.eye(d) - A, b)
    A_t = A.T.copy()

    def apply(theta: np.ndarray) -> np.ndarray:
        return theta @ A_t + b

    # a zero matrix is still a valid (trivially contractive) operator
    return OperatorSpec(d, apply, max(modulus, 1e-12), norm_tag, fixed_point, name="linear", affine=(A, b))


def scaled_abs_1d(b: float = 0.0) -> OperatorSpec:
    """
    T(theta) = -|theta|/2 - b on R, contraction modulus 1/2.

    The fixed point is -2b/3 for b <= 0 and -2b for b > 0.
    """
    b = float(b)
    fixed_point = -2.0 * b / 3.0 if b <= 0 else -2.0 * b

    def apply(theta: np.ndarray) -> np.ndarray:
        return -0.5 * np.abs(theta) - b

    return OperatorSpec(1, apply, 0.5, "ell2", [fixed_point], name="scaled_abs_1d")


def log_cosh_1d(b: float = 0.0) -> OperatorSpec:
    """
    T(theta) = -log(cosh(theta))/2 - b, a smooth counterpart of ``scaled_abs_1d``.

    |T'| = |tanh|/2 < 1/2 and T''(0) = -1/2, so the bias of this dynamic is of order alpha.
    """
    b = float(b)
    log2 = np.log(2.0)

    def apply(theta: np.ndarray) -> np.ndarray:
        return -0.5 * (np.logaddexp(theta, -theta) - log2) - b

    fixed_point = _iterate_fixed_point(apply, np.zeros(1), 0.5)
    return OperatorSpec(1, apply, 0.5, "ell2", fixed_point, name="log_cosh_1d")


def max_affine(slopes, intercepts, scale: float) -> OperatorSpec:
    """
    T(theta)_i = scale * max_j (slopes[i, j] . theta + intercepts[i, j]), contracting in ell-inf.

    This is a g o F instance with g a coordinate-wise max and F affine. The modulus is
    scale * max_{i,j} ||slopes[i, j]||_1.

    Args:
        slopes: Array of shape (d, m, d) of affine piece slopes
        intercepts: Array of shape (d, m) of affine piece intercepts
        scale: Positive contraction scale

    Raises:
        InvalidArgumentError: If shapes disagree or the resulting modulus is not below 1
    """
    slopes = np.asarray(slopes, dtype=float)
    intercepts = np.asarray(intercepts, dtype=float)
    if slopes.ndim != 3 or slopes.shape[0] != slopes.shape[2] or intercepts.shape != slopes.shape[:2]:
        raise InvalidArgumentError(
            f"slopes must be (d, m, d) and intercepts (d, m), got {slopes.shape} and {intercepts.shape}"
        )
    if scale <= 0:
        raise InvalidArgumentError("scale must be positive")
    modulus = float(scale * np.max(np.sum(np.abs(slopes), axis=2)))
    if not 0.0 < modulus < 1.0:
        raise InvalidArgumentError(f"max-affine modulus {modulus} is not in (0, 1)")

    def apply(theta: np.ndarray) -> np.ndarray:
        pieces = np.einsum("...k,imk->...im", theta, slopes) + intercepts
        return scale * np.max(pieces, axis=-1)

    d = slopes.shape[0]
    fixed_point = _iterate_fixed_point(apply, np.zeros(d), modulus)
    return OperatorSpec(d, apply, modulus, "ellinf", fixed_point, name="max_affine")


def contraction_violation(op: OperatorSpec, stream: RngStream, n_pairs: int = 10_000,
                          spread: float = 10.0) -> float:
    """
    Largest excess of ||T(x) - T(y)||_c over gamma * ||x - y||_c on random pairs.

    Pairs are Gaussian around the fixed point (or the origin) with standard deviation ``spread``.
    A non-positive return value means no violation was found.
    """
    center = op.fixed_point if op.fixed_point is not None else np.zeros(op.dimension)
    draws = stream.normals(2 * n_pairs * op.dimension).reshape(2, n_pairs, op.dimension)
    x = center + spread * draws[0]
    y = center + spread * draws[1]
    lhs = op.norm(op.apply(x) - op.apply(y))
    rhs = op.contraction_modulus * op.norm(x - y)
    return float(np.max(lhs - rhs))


class NoiseSpec:
    """
    Zero-mean additive noise with covariance Sigma.

    Gaussian noise is ``L z`` with ``L L^T = Sigma`` (symmetric square root, so singular
    covariances are allowed). Scaled-Rademacher noise uses independent signs scaled by
    the square roots of Sigma's diagonal.
    """

    def __init__(self, kind: str = "gaussian", covariance=1.0):
        """
        Initialize a noise model.

        Args:
            kind: "gaussian" or "rademacher_scaled"
            covariance: d x d symmetric PSD matrix (a scalar is read as a 1 x 1 variance)

        Raises:
            InvalidArgumentError: If the kind is unknown or Sigma is not symmetric PSD
        """
        if kind not in NOISE_KINDS:
            raise InvalidArgumentError(f"unknown noise kind '{kind}', expected one of {NOISE_KINDS}")
        covariance = np.atleast_2d(np.asarray(covariance, dtype=float))
        if covariance.shape[0] != covariance.shape[1]:
            raise InvalidArgumentError(f"covariance must be square, got {covariance.shape}")
        if not np.allclose(covariance, covariance.T, atol=1e-12):
            raise InvalidArgumentError("covariance must be symmetric")
        eigenvalues, eigenvectors = np.linalg.eigh(covariance)
        if eigenvalues.min() < -1e-12:
            raise InvalidArgumentError("covariance must be positive semidefinite")

        self.kind = kind
        self.covariance = covariance
        self.dimension = covariance.shape[0]
        root = eigenvectors * np.sqrt(np.clip(eigenvalues, 0.0, None))
        self._factor_t = (root @ eigenvectors.T).T.copy()
        self._scales = np.sqrt(np.clip(np.diag(covariance), 0.0, None))

    def draws_per_step(self):
        """(uniforms, normals) consumed per chain step."""
        if self.kind == "gaussian":
            return 0, self.dimension
        return self.dimension, 0

    def transform(self, uniforms: np.ndarray, normals: np.ndarray) -> np.ndarray:
        """Turn per-step raw draws (leading axis = steps) into noise vectors."""
        if self.kind == "gaussian":
            return normals @ self._factor_t
        signs = np.where(uniforms < 0.5, -1.0, 1.0)
        return signs * self._scales

    def sample(self, stream: RngStream, n_steps: int) -> np.ndarray:
        """
        Draw ``n_steps`` noise vectors, shape (n_steps, d).

        Drawing in one call or step by step gives the same vectors.
        """
        n_uniform, n_normal = self.draws_per_step()
        uniforms, normals = stream.draw_steps(n_steps, n_uniform, n_normal)
        return self.transform(uniforms, normals)

    def __str__(self) -> str:
        return f"NoiseSpec({self.kind}, d={self.dimension})"
