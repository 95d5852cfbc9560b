"""Numeric foundation: weight matrices, scores, factored gradients, ball projection.

Classes are numbered 1..K throughout the package; array positions are the
class number minus one.  All value types are immutable (arrays are marked
read-only) so that operations stay side-effect free.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

NORM_SLACK = 1e-9


class DimensionMismatchError(ValueError):
    """Raised when vector/matrix shapes do not line up."""


def _readonly(a: np.ndarray) -> np.ndarray:
    out = np.asarray(a, dtype=np.float64)
    if out.flags.writeable:
        # copy only when the caller still holds a mutable reference
        out = out.copy()
        out.flags.writeable = False
    return out


@dataclass(frozen=True)
class WeightMatrix:
    """A K x d linear predictor constrained to the Frobenius ball of radius `radius`.

    Row k (0-based position k-1) holds the parameters of class k.
    """

    rows: np.ndarray
    radius: float

    def __post_init__(self) -> None:
        rows = np.asarray(self.rows, dtype=np.float64)
        if rows.ndim != 2:
            raise DimensionMismatchError(f"weights must be 2-d, got shape {rows.shape}")
        k, d = rows.shape
        if k < 2:
            raise ValueError(f"need at least 2 classes, got K={k}")
        if d < 1:
            raise ValueError(f"need at least 1 feature, got d={d}")
        if self.radius < 0:
            raise ValueError(f"radius must be nonnegative, got {self.radius}")
        norm = float(np.linalg.norm(rows))
        if norm > self.radius + NORM_SLACK:
            raise ValueError(
                f"Frobenius norm {norm:.12g} exceeds radius {self.radius:.12g}"
            )
        object.__setattr__(self, "rows", _readonly(rows))

    @property
    def n_classes(self) -> int:
        return self.rows.shape[0]

    @property
    def n_features(self) -> int:
        return self.rows.shape[1]

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.rows))

    @classmethod
    def zeros(cls, n_classes: int, n_features: int, radius: float) -> "WeightMatrix":
        return cls(np.zeros((n_classes, n_features)), radius)


@dataclass(frozen=True)
class Example:
    """A feature vector with its true class label and the stream's norm bound."""

    features: np.ndarray
    label: int
    x_bound: float

    def __post_init__(self) -> None:
        x = np.asarray(self.features, dtype=np.float64)
        if x.ndim != 1:
            raise DimensionMismatchError(f"features must be 1-d, got shape {x.shape}")
        if self.label < 1:
            raise ValueError(f"labels are numbered from 1, got {self.label}")
        if self.x_bound <= 0:
            raise ValueError(f"norm bound must be positive, got {self.x_bound}")
        norm = float(np.linalg.norm(x))
        if norm > self.x_bound + NORM_SLACK:
            raise ValueError(
                f"feature norm {norm:.12g} exceeds bound {self.x_bound:.12g}"
            )
        object.__setattr__(self, "features", _readonly(x))
        object.__setattr__(self, "label", int(self.label))


@dataclass(frozen=True)
class RankedGradient:
    """A gradient of the form `coeffs (x) features`, kept factored.

    The squared norm is ||coeffs||^2 * ||features||^2; the K*d outer product is
    never materialized for norm computations.
    """

    coeffs: np.ndarray
    features: np.ndarray

    def __post_init__(self) -> None:
        coeffs = _readonly(self.coeffs)
        features = _readonly(self.features)
        if coeffs.ndim != 1 or features.ndim != 1:
            raise DimensionMismatchError("gradient factors must be 1-d vectors")
        object.__setattr__(self, "coeffs", coeffs)
        object.__setattr__(self, "features", features)

    def norm_sq(self) -> float:
        c = self.coeffs
        x = self.features
        return float(np.dot(c, c)) * float(np.dot(x, x))

    def scaled(self, factor: float) -> "RankedGradient":
        coeffs = self.coeffs * factor
        coeffs.flags.writeable = False
        return RankedGradient(coeffs, self.features)

    @property
    def is_zero(self) -> bool:
        return not np.any(self.coeffs)

    @classmethod
    def zero(cls, n_classes: int, features: np.ndarray) -> "RankedGradient":
        coeffs = np.zeros(n_classes)
        coeffs.flags.writeable = False
        return cls(coeffs, features)


def class_scores(weights: WeightMatrix, x: np.ndarray) -> np.ndarray:
    """Return the score vector s with s_k = <row k, x>."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (weights.n_features,):
        raise DimensionMismatchError(
            f"feature vector has shape {x.shape}, expected ({weights.n_features},)"
        )
    return weights.rows @ x


def top2(scores: np.ndarray) -> tuple[int, float, float]:
    """Return (best class, top score, runner-up score).

    Ties break toward the lowest class number; classes are numbered 1..K.
    """
    s = np.asarray(scores, dtype=np.float64)
    if s.ndim != 1 or s.shape[0] < 2:
        raise ValueError(f"need at least 2 scores, got shape {s.shape}")
    values = s.tolist()
    best_pos = 0
    top = values[0]
    for pos in range(1, len(values)):
        if values[pos] > top:
            top = values[pos]
            best_pos = pos
    second = -np.inf
    for pos, value in enumerate(values):
        if pos != best_pos and value > second:
            second = value
    return best_pos + 1, top, second


def project_rows(rows: np.ndarray, radius: float) -> np.ndarray:
    """Projection of a raw row array onto the Frobenius ball of ``radius``."""
    norm = float(np.linalg.norm(rows))
    if norm <= radius:
        return rows
    return rows * (radius / norm)


def project_ball(weights: WeightMatrix, radius: float | None = None) -> WeightMatrix:
    """Euclidean projection onto the Frobenius ball of ``radius``.

    ``radius`` defaults to the matrix's own bound.  Interior points are
    returned unchanged; exterior points are scaled radially so the result
    lands exactly on the sphere.
    """
    if radius is None:
        radius = weights.radius
    norm = weights.norm
    if norm <= radius:
        if radius == weights.radius:
            return weights
        return WeightMatrix(weights.rows, radius)
    return WeightMatrix(weights.rows * (radius / norm), radius)


def apply_gradient_step(
    weights: WeightMatrix, grad: RankedGradient, eta: float
) -> WeightMatrix:
    """Projected gradient step: project_ball(W - eta * coeffs (x) features)."""
    if eta <= 0:
        raise ValueError(f"step size must be positive, got {eta}")
    if grad.coeffs.shape != (weights.n_classes,):
        raise DimensionMismatchError(
            f"gradient has {grad.coeffs.shape[0]} coefficients, "
            f"expected {weights.n_classes}"
        )
    if grad.features.shape != (weights.n_features,):
        raise DimensionMismatchError(
            f"gradient features have shape {grad.features.shape}, "
            f"expected ({weights.n_features},)"
        )
    if grad.is_zero:
        return weights
    stepped = weights.rows - eta * grad.coeffs[:, None] * grad.features[None, :]
    projected = project_rows(stepped, weights.radius)
    projected.flags.writeable = False  # freshly allocated here, safe to share
    return WeightMatrix(projected, weights.radius)
