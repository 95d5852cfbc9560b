"""Synthetic stream generators and stream-file ingestion.

Generated streams come with the generating matrix as a known comparator, so
regret audits can be evaluated against a concrete feasible predictor.  The
stream file format is UTF-8 text, one example per line::

    label,f1,f2,...,fd

with decimal floats, labels numbered from 1, and ``#``-prefixed comment lines
skipped.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .linalg import NORM_SLACK, Example, WeightMatrix

logger = logging.getLogger(__name__)

MAX_REJECTION_ATTEMPTS = 1_000_000
_BATCH = 1024


class StreamFormatError(ValueError):
    """Malformed stream file; the message carries the offending line number."""


class StreamGenerationError(RuntimeError):
    """Rejection sampling failed to reach the requested margin."""


@dataclass(frozen=True)
class StreamSpec:
    kind: str  # "separable" | "label_noise"
    n_classes: int
    n_features: int
    x_bound: float
    u_norm: float
    horizon: int
    margin: float = 0.0
    noise_rate: float = 0.0
    rng_seed: int = 0

    def __post_init__(self) -> None:
        if self.kind not in ("separable", "label_noise"):
            raise ValueError(f"unknown stream kind: {self.kind!r}")
        if self.margin < 0.0:
            raise ValueError(f"margin must be nonnegative, got {self.margin}")
        if not 0.0 <= self.noise_rate <= 1.0:
            raise ValueError(f"noise rate must lie in [0, 1], got {self.noise_rate}")
        if self.n_classes < 2 or self.n_features < 1:
            raise ValueError("need at least 2 classes and 1 feature")
        if self.x_bound <= 0 or self.u_norm <= 0:
            raise ValueError("x_bound and u_norm must be positive")
        if self.horizon < 0:
            raise ValueError(f"horizon must be nonnegative, got {self.horizon}")


@dataclass(frozen=True)
class LabeledStream:
    examples: tuple[Example, ...]
    n_classes: int
    x_bound: float
    comparator: WeightMatrix | None = None
    spec: StreamSpec | None = None

    def __len__(self) -> int:
        return len(self.examples)


def generate(spec: StreamSpec) -> LabeledStream:
    """Sample a stream whose labels come from a hidden linear predictor.

    The comparator has independent standard-normal entries scaled to norm
    ``u_norm``; features are uniform on the radius-``x_bound`` sphere.
    Separable streams rejection-sample until the comparator's top-two score
    gap reaches ``margin``; label-noise streams then resample each label to a
    uniformly random other class with probability ``noise_rate``.
    """
    rng = np.random.default_rng(spec.rng_seed)
    raw = rng.standard_normal((spec.n_classes, spec.n_features))
    u_star = raw * (spec.u_norm / float(np.linalg.norm(raw)))
    comparator = WeightMatrix(u_star, radius=spec.u_norm)

    accepted_x: list[np.ndarray] = []
    accepted_y: list[int] = []
    attempts = 0
    while len(accepted_x) < spec.horizon:
        if attempts >= MAX_REJECTION_ATTEMPTS:
            raise StreamGenerationError(
                f"no margin-{spec.margin} example found within "
                f"{MAX_REJECTION_ATTEMPTS} attempts"
            )
        xs = rng.standard_normal((_BATCH, spec.n_features))
        xs *= spec.x_bound / np.linalg.norm(xs, axis=1, keepdims=True)
        scores = xs @ u_star.T
        top2 = np.partition(scores, spec.n_classes - 2, axis=1)[:, -2:]
        margins = top2[:, 1] - top2[:, 0]
        attempts += _BATCH
        for idx in np.flatnonzero(margins >= spec.margin):
            if len(accepted_x) == spec.horizon:
                break
            accepted_x.append(xs[idx])
            accepted_y.append(int(np.argmax(scores[idx])) + 1)

    if spec.kind == "label_noise" and spec.noise_rate > 0.0:
        k = spec.n_classes
        for i in range(len(accepted_y)):
            if rng.random() < spec.noise_rate:
                shift = int(rng.integers(1, k))
                accepted_y[i] = (accepted_y[i] - 1 + shift) % k + 1

    examples = tuple(
        Example(features=x, label=y, x_bound=spec.x_bound)
        for x, y in zip(accepted_x, accepted_y)
    )
    return LabeledStream(
        examples=examples,
        n_classes=spec.n_classes,
        x_bound=spec.x_bound,
        comparator=comparator,
        spec=spec,
    )


def load_stream(
    path: str, x_bound: float, norm_policy: str = "strict"
) -> LabeledStream:
    """Parse a stream file; the class count is inferred as the largest label."""
    if norm_policy not in ("strict", "rescale"):
        raise ValueError(f"unknown norm policy: {norm_policy!r}")
    examples: list[Example] = []
    n_features: int | None = None
    with open(path, "r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            parts = stripped.split(",")
            if len(parts) < 2:
                raise StreamFormatError(
                    f"{path}:{lineno}: expected 'label,f1,...', got {stripped!r}"
                )
            try:
                label = int(parts[0])
            except ValueError as exc:
                raise StreamFormatError(
                    f"{path}:{lineno}: label {parts[0]!r} is not an integer"
                ) from exc
            if label < 1:
                raise StreamFormatError(
                    f"{path}:{lineno}: labels are numbered from 1, got {label}"
                )
            try:
                features = np.array([float(v) for v in parts[1:]], dtype=np.float64)
            except ValueError as exc:
                raise StreamFormatError(
                    f"{path}:{lineno}: malformed feature value"
                ) from exc
            if n_features is None:
                n_features = features.shape[0]
            elif features.shape[0] != n_features:
                raise StreamFormatError(
                    f"{path}:{lineno}: expected {n_features} features, "
                    f"got {features.shape[0]}"
                )
            norm = float(np.linalg.norm(features))
            if norm > x_bound + NORM_SLACK:
                if norm_policy == "rescale":
                    logger.warning(
                        "%s:%d: feature norm %.6g exceeds %.6g; rescaling",
                        path, lineno, norm, x_bound,
                    )
                    features = features * (x_bound / norm)
                else:
                    raise StreamFormatError(
                        f"{path}:{lineno}: feature norm {norm:.6g} exceeds "
                        f"bound {x_bound:.6g}"
                    )
            examples.append(Example(features=features, label=label, x_bound=x_bound))
    if not examples:
        raise StreamFormatError(f"{path}: empty stream, class count undefined")
    n_classes = max(e.label for e in examples)
    return LabeledStream(
        examples=tuple(examples), n_classes=n_classes, x_bound=x_bound
    )


def write_stream(stream: LabeledStream, path: str) -> None:
    """Write examples in the `label,f1,...,fd` format (full float precision)."""
    with open(path, "w", encoding="utf-8") as handle:
        handle.write("# label,f1,...,fd\n")
        for example in stream.examples:
            values = ",".join(repr(float(v)) for v in example.features)
            handle.write(f"{example.label},{values}\n")
