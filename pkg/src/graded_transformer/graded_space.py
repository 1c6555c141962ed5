"""Graded vector-space algebra: star action, grading matrices, graded norms,
graded activations, and homogeneity checking.

A grading tuple assigns a non-negative grade q_i to each feature dimension.
Linear grading scales dimension i by f(q_i) for a positive weight map f;
exponential grading scales it by base**q_i with base > 1.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import numpy as np

from .errors import (
    DimensionMismatch,
    InvalidSpec,
    NegativeBaseFractionalGrade,
    NonPositiveGrade,
)

LINEAR = "linear"
EXPONENTIAL = "exponential"


@dataclass(frozen=True)
class WeightMap:
    """Named positive map q -> f(q) applied to grades in linear mode.

    Presets: plus_one f(q)=q+1, abs_plus_one f(q)=|q|+1, identity f(q)=q,
    affine(a, b) f(q)=a+b*q.
    """

    name: str = "plus_one"
    a: float = 1.0
    b: float = 1.0

    def values(self, q: np.ndarray) -> np.ndarray:
        q = np.asarray(q, dtype=np.float64)
        if self.name == "plus_one":
            return q + 1.0
        if self.name == "abs_plus_one":
            return np.abs(q) + 1.0
        if self.name == "identity":
            return q.copy()
        if self.name == "affine":
            return self.a + self.b * q
        raise InvalidSpec(f"unknown weight map {self.name!r}")

    def node(self, q_node):
        """Tape expression of the map for learnable grades."""
        from . import autodiff as ad

        if self.name == "plus_one":
            return ad.add(q_node, np.ones((1, q_node.shape[1])))
        if self.name == "abs_plus_one":
            return ad.add(ad.absolute(q_node), np.ones((1, q_node.shape[1])))
        if self.name == "identity":
            return q_node
        if self.name == "affine":
            return ad.add(ad.scale(q_node, self.b), np.full((1, q_node.shape[1]), self.a))
        raise InvalidSpec(f"unknown weight map {self.name!r}")


def affine_map(a: float, b: float) -> WeightMap:
    return WeightMap("affine", a=a, b=b)


@dataclass(frozen=True)
class GradingSpec:
    """How grades become diagonal scale factors.

    mode "linear": weights f(q_i), requiring f(q_i) > 0.
    mode "exponential": weights base**q_i, requiring base > 1.
    """

    mode: str = LINEAR
    weight_map: WeightMap = field(default_factory=WeightMap)
    base: float = 2.0

    def validate(self, grades: np.ndarray) -> None:
        if self.mode == LINEAR:
            w = self.weight_map.values(grades)
            if np.any(w <= 0):
                raise InvalidSpec("linear grading weights must be positive")
        elif self.mode == EXPONENTIAL:
            if not self.base > 1.0:
                raise InvalidSpec(f"exponential base must exceed 1, got {self.base}")
        else:
            raise InvalidSpec(f"unknown grading mode {self.mode!r}")

    def weights(self, grades) -> np.ndarray:
        """Diagonal scale factors for the given grades."""
        grades = as_grades(grades)
        self.validate(grades)
        if self.mode == LINEAR:
            return self.weight_map.values(grades)
        return np.exp(grades * np.log(self.base))


def as_grades(grades, allow_negative: bool = False) -> np.ndarray:
    """Validate and return a grading tuple as a 1-D float64 array."""
    q = np.asarray(grades, dtype=np.float64).reshape(-1)
    if not np.all(np.isfinite(q)):
        raise InvalidSpec("grades must be finite")
    if not allow_negative and np.any(q < 0):
        raise InvalidSpec("grades must be non-negative")
    return q


def star_action(lam: float, grades, x) -> np.ndarray:
    """Scalar action: component i of x scaled by lam**q_i."""
    q = as_grades(grades)
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != q.size:
        raise DimensionMismatch(f"star_action: x dim {x.shape[-1]} vs {q.size} grades")
    fractional = np.any(q != np.round(q))
    if lam <= 0 and fractional:
        raise NegativeBaseFractionalGrade(
            f"base {lam} with fractional grades is undefined"
        )
    if lam < 0:
        factors = np.sign(lam) ** np.round(q).astype(np.int64) * np.abs(lam) ** q
    else:
        factors = np.float_power(lam, q)
    return factors * x


def grading_matrix(grades, spec: GradingSpec) -> np.ndarray:
    """Diagonal d x d matrix of grading weights."""
    return np.diag(spec.weights(grades))


def apply_grading(grades, spec: GradingSpec, x, inverse: bool = False) -> np.ndarray:
    """Scale the columns of a sequence matrix (or one row vector) by the
    grading weights; inverse=True undoes it exactly."""
    q = as_grades(grades)
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        if x.size != q.size:
            raise DimensionMismatch(f"apply_grading: {x.size} vs {q.size}")
    elif x.shape[1] != q.size:
        raise DimensionMismatch(f"apply_grading: {x.shape} vs {q.size} grades")
    w = spec.weights(q)
    return x / w if inverse else x * w


def graded_norm(grades, x) -> float:
    """sqrt(sum_i q_i * x_i**2); requires strictly positive grades."""
    q = as_grades(grades)
    if np.any(q <= 0):
        raise NonPositiveGrade("graded_norm requires q_i > 0")
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    if x.size != q.size:
        raise DimensionMismatch(f"graded_norm: {x.size} vs {q.size}")
    return float(np.sqrt(np.sum(q * x * x)))


def homogeneous_norm(grades, x) -> float:
    """Block norm (sum_j ||x_{d_j}||**(2(r-j+1)))**(1/r) over the r distinct
    grade values d_1 < ... < d_r; zero-norm blocks contribute 0."""
    q = as_grades(grades)
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    if x.size != q.size:
        raise DimensionMismatch(f"homogeneous_norm: {x.size} vs {q.size}")
    distinct = np.unique(q)  # ascending
    r = distinct.size
    total = 0.0
    for j, d in enumerate(distinct, start=1):
        block = x[q == d]
        nb = float(np.linalg.norm(block))
        if nb > 0.0:
            total += nb ** (2 * (r - j + 1))
    return float(total ** (1.0 / r))


def graded_relu(grades, x, sign_preserving: bool = False) -> np.ndarray:
    """Componentwise max{0, |x_i|**(1/q_i)}; the sign-preserving variant
    multiplies by sgn(x_i) before thresholding."""
    q = as_grades(grades)
    if np.any(q <= 0):
        raise NonPositiveGrade("graded_relu requires q_i > 0")
    x = np.asarray(x, dtype=np.float64)
    ax = np.abs(x)
    nonzero = ax > 0
    safe = np.where(nonzero, ax, 1.0)
    powed = np.where(nonzero, safe ** (1.0 / q), 0.0)
    if sign_preserving:
        return np.where(x > 0, powed, 0.0)
    return powed


def exp_activation(grades, x) -> np.ndarray:
    """Componentwise exp(x_i / q_i) - 1."""
    q = as_grades(grades)
    if np.any(q <= 0):
        raise NonPositiveGrade("exp_activation requires q_i > 0")
    x = np.asarray(x, dtype=np.float64)
    return np.exp(x / q) - 1.0


def homogeneity_degree(a, q_in, q_out, tol: float = 1e-9) -> float | None:
    """Degree d such that every nonzero entry a_ij satisfies
    r_i = q_j + d; None when no common degree exists.

    Grade-preserving maps are exactly those with degree 0.
    """
    a = np.asarray(a, dtype=np.float64)
    q_in = as_grades(q_in, allow_negative=True)
    q_out = as_grades(q_out, allow_negative=True)
    if a.shape != (q_out.size, q_in.size):
        raise DimensionMismatch(
            f"homogeneity_degree: matrix {a.shape} vs out {q_out.size}, in {q_in.size}"
        )
    rows, cols = np.nonzero(np.abs(a) > tol)
    if rows.size == 0:
        return 0.0  # zero map is homogeneous of every degree; report 0
    degrees = q_out[rows] - q_in[cols]
    d = degrees[0]
    if np.any(np.abs(degrees - d) > tol):
        return None
    return float(d)


def effective_dimension(grades, delta: float) -> int:
    """Count of dimensions with grades within delta of the maximum."""
    q = as_grades(grades)
    return int(np.sum(q >= q.max() - delta))
