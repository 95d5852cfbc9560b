"""Reference learners for comparison curves.

* Multiclass Perceptron (full information): on a mistake, pull the true
  class's row toward x and push the predicted row away.  No projection, no
  learning rate.
* Banditron (one-bit feedback): explore with an epsilon-greedy mixture and
  apply the importance-weighted Perceptron-style update, which is unbiased
  for the full-information update under the sampling distribution.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class BaselineConfig:
    kind: str  # "perceptron" | "banditron"
    n_classes: int
    n_features: int
    gamma: float | None = None  # banditron exploration rate
    rng_seed: int = 0

    def __post_init__(self) -> None:
        if self.kind not in ("perceptron", "banditron"):
            raise ValueError(f"unknown baseline kind: {self.kind!r}")
        if self.n_classes < 2 or self.n_features < 1:
            raise ValueError("need at least 2 classes and 1 feature")
        if self.kind == "banditron":
            if self.gamma is None or not 0.0 < self.gamma < 1.0:
                raise ValueError(f"banditron needs gamma in (0, 1), got {self.gamma}")


class Perceptron:
    def __init__(self, config: BaselineConfig) -> None:
        if config.kind != "perceptron":
            raise ValueError("config is not a perceptron config")
        self.config = config
        self.weights = np.zeros((config.n_classes, config.n_features))

    def step(self, x: np.ndarray, y_true: int) -> tuple[int, bool]:
        """Predict argmax (lowest class wins ties); update on mistakes only."""
        scores = self.weights @ x
        y_pred = int(np.argmax(scores)) + 1
        mistake = y_pred != y_true
        if mistake:
            self.weights[y_true - 1] += x
            self.weights[y_pred - 1] -= x
        return y_pred, mistake


class Banditron:
    def __init__(self, config: BaselineConfig) -> None:
        if config.kind != "banditron":
            raise ValueError("config is not a banditron config")
        self.config = config
        self.weights = np.zeros((config.n_classes, config.n_features))
        self._rng = np.random.default_rng(config.rng_seed)

    def exploration_probs(self, y_star: int) -> np.ndarray:
        k = self.config.n_classes
        probs = np.full(k, self.config.gamma / k)
        probs[y_star - 1] += 1.0 - self.config.gamma
        return probs

    def step(self, x: np.ndarray, y_true: int) -> tuple[int, bool]:
        """Sample from the epsilon-greedy mixture; learn from the bit only.

        Row y' gains bit / p(y') * x and row y* loses x, so the expected
        update over y' ~ p equals x (x) (e_y - e_{y*}).
        """
        scores = self.weights @ x
        y_star = int(np.argmax(scores)) + 1
        probs = self.exploration_probs(y_star)
        u = self._rng.random()
        acc = 0.0
        y_pred = self.config.n_classes
        for pos, p in enumerate(probs):
            acc += p
            if u < acc:
                y_pred = pos + 1
                break
        bit = y_pred == y_true
        apply_banditron_update(
            self.weights, x, y_star, y_pred, bit, float(probs[y_pred - 1])
        )
        return y_pred, bit


def apply_banditron_update(
    weights: np.ndarray,
    x: np.ndarray,
    y_star: int,
    y_pred: int,
    bit: bool,
    p_pred: float,
) -> None:
    """In-place factored update; touches at most two rows (O(Kd) worst case)."""
    if bit:
        weights[y_pred - 1] += x / p_pred
    weights[y_star - 1] -= x
