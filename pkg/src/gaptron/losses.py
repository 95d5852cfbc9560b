"""Surrogate losses, gradients, margins, gap maps, and bandit estimators.

Three loss families are supported:

* logistic: -log2 of the softmax probability of the true class,
* hinge: a variant of the multiclass hinge whose zero branch is selected by
  whether the current predictor is confidently correct (runner-up margin
  above ``beta``),
* smooth hinge: 1 - 2m below margin 0, (1 - m)^2 on (0, 1], then 0.

All gradients have the factored form ``coeffs (x) features`` and are returned
as :class:`~gaptron.linalg.RankedGradient`.  Everything here is a pure
function; class labels are numbered 1..K.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .linalg import RankedGradient, WeightMatrix, class_scores, top2

LN2 = math.log(2.0)


class LossFamily(enum.Enum):
    LOGISTIC = "logistic"
    HINGE = "hinge"
    SMOOTH_HINGE = "smooth_hinge"


def default_beta(n_classes: int) -> float:
    """Hinge confidence threshold used by the theory: 1/K."""
    return 1.0 / n_classes


@dataclass(frozen=True)
class MarginInfo:
    """Margin quantities of one (scores, label) pair.

    ``m_star`` is the top-minus-runner-up score, which equals
    ``max_k m(W, k)`` because only the argmax class has a nonnegative margin.
    ``runner_up`` is the best class other than the true label (the class a
    hinge gradient pushes away from).
    """

    scores: np.ndarray
    y_star: int
    m_star: float
    margin: float
    runner_up: int


@dataclass(frozen=True)
class SoftmaxInfo:
    """Softmax probabilities and their maximum."""

    probs: np.ndarray
    p_star: float


def softmax(scores: np.ndarray) -> SoftmaxInfo:
    """Stable softmax (max-subtracted before exponentiation)."""
    s = np.asarray(scores, dtype=np.float64)
    shifted = s - s.max()
    exps = np.exp(shifted)
    probs = exps / exps.sum()
    return SoftmaxInfo(probs=probs, p_star=float(probs.max()))


def _scan_top2(values: list[float]) -> tuple[int, float, int, float]:
    """Argmax position (lowest wins ties), its value, and the best of the rest."""
    best_pos = 0
    top = values[0]
    for pos in range(1, len(values)):
        if values[pos] > top:
            top = values[pos]
            best_pos = pos
    second_pos = -1
    second = -np.inf
    for pos, value in enumerate(values):
        if pos != best_pos and value > second:
            second = value
            second_pos = pos
    return best_pos, top, second_pos, second


def _as_score_vector(scores: np.ndarray) -> np.ndarray:
    s = np.asarray(scores, dtype=np.float64)
    if s.ndim != 1 or s.shape[0] < 2:
        raise ValueError(f"need at least 2 scores, got shape {s.shape}")
    return s


def margin_info(scores: np.ndarray, label: int) -> MarginInfo:
    """Compute y*, m*, the true label's margin, and the runner-up class."""
    s = _as_score_vector(scores)
    values = s.tolist()
    best_pos, top, second_pos, second = _scan_top2(values)
    y_star = best_pos + 1
    m_star = top - second
    if label == y_star:
        margin = m_star
        runner_up = second_pos + 1
    else:
        margin = values[label - 1] - top
        runner_up = y_star
    return MarginInfo(
        scores=s, y_star=y_star, m_star=m_star, margin=margin, runner_up=runner_up
    )


def prediction_margins(scores: np.ndarray) -> MarginInfo:
    """Margin quantities of the predicted (argmax) label itself."""
    s = _as_score_vector(scores)
    best_pos, top, second_pos, second = _scan_top2(s.tolist())
    m_star = top - second
    return MarginInfo(
        scores=s,
        y_star=best_pos + 1,
        m_star=m_star,
        margin=m_star,
        runner_up=second_pos + 1,
    )


def _basis_diff(n_classes: int, plus: int, minus: int, scale: float = 1.0) -> np.ndarray:
    c = np.zeros(n_classes)
    c[plus - 1] += scale
    c[minus - 1] -= scale
    c.flags.writeable = False
    return c


def logistic_loss_grad(
    weights: WeightMatrix, x: np.ndarray, label: int
) -> tuple[float, RankedGradient]:
    """Loss -log2(softmax prob of the label); gradient (probs - e_y)/ln2 (x) x."""
    scores = class_scores(weights, x)
    info = softmax(scores)
    loss = -float(np.log2(info.probs[label - 1]))
    coeffs = info.probs.copy()
    coeffs[label - 1] -= 1.0
    coeffs /= LN2
    coeffs.flags.writeable = False
    return loss, RankedGradient(coeffs, x)


def hinge_loss_grad(
    weights: WeightMatrix, x: np.ndarray, label: int, beta: float
) -> tuple[float, RankedGradient]:
    """Multiclass hinge with a confidence cutoff.

    A confidently correct prediction (y* = y and m* > beta) zeroes both loss
    and gradient; otherwise the loss is max(1 - m(W, y), 0) with gradient
    (e_runner_up - e_y) (x) x.
    """
    if not 0.0 < beta < 1.0:
        raise ValueError(f"beta must lie in (0, 1), got {beta}")
    scores = class_scores(weights, x)
    info = margin_info(scores, label)
    if info.y_star == label and info.m_star > beta:
        return 0.0, RankedGradient.zero(weights.n_classes, x)
    loss = max(1.0 - info.margin, 0.0)
    coeffs = _basis_diff(weights.n_classes, info.runner_up, label)
    return loss, RankedGradient(coeffs, x)


def smooth_hinge_loss_grad(
    weights: WeightMatrix, x: np.ndarray, label: int
) -> tuple[float, RankedGradient]:
    """Smooth multiclass hinge: 1 - 2m for m <= 0, (1 - m)^2 on (0, 1], else 0."""
    scores = class_scores(weights, x)
    info = margin_info(scores, label)
    m = info.margin
    k = weights.n_classes
    if m <= 0.0:
        loss = 1.0 - 2.0 * m
        coeffs = _basis_diff(k, info.runner_up, label, scale=2.0)
        return loss, RankedGradient(coeffs, x)
    if m <= 1.0:
        # m > 0 forces y to be the argmax, so m == m_star here.
        loss = (1.0 - m) ** 2
        if m == 1.0:
            return loss, RankedGradient.zero(k, x)
        coeffs = _basis_diff(k, info.runner_up, label, scale=2.0 * (1.0 - m))
        return loss, RankedGradient(coeffs, x)
    return 0.0, RankedGradient.zero(k, x)


def loss_grad(
    kind: LossFamily,
    weights: WeightMatrix,
    x: np.ndarray,
    label: int,
    beta: float | None = None,
) -> tuple[float, RankedGradient]:
    """Dispatch to the loss family; ``beta`` is only consulted for the hinge."""
    if kind is LossFamily.LOGISTIC:
        return logistic_loss_grad(weights, x, label)
    if kind is LossFamily.HINGE:
        if beta is None:
            beta = default_beta(weights.n_classes)
        return hinge_loss_grad(weights, x, label, beta)
    if kind is LossFamily.SMOOTH_HINGE:
        return smooth_hinge_loss_grad(weights, x, label)
    raise ValueError(f"unknown loss family: {kind!r}")


def gap_map(
    kind: LossFamily,
    stats: SoftmaxInfo | MarginInfo,
    beta: float | None = None,
) -> float:
    """Uniform-exploration mass as a function of the prediction's confidence.

    logistic:      1 - 1[p* >= 0.5] * p*
    hinge:         1 - m*  when m* <= beta, else 0
    smooth hinge:  (1 - min(1, m*))^2

    The result always lies in [0, 1]: an unclamped hinge expression
    1 - max(1[m* > beta], m*) would go negative for m* > 1, while every use
    of the map requires a probability mass.
    """
    if kind is LossFamily.LOGISTIC:
        if not isinstance(stats, SoftmaxInfo):
            raise TypeError("logistic gap map needs SoftmaxInfo")
        p_star = stats.p_star
        return 1.0 - p_star if p_star >= 0.5 else 1.0
    if not isinstance(stats, MarginInfo):
        raise TypeError(f"{kind.value} gap map needs MarginInfo")
    m_star = stats.m_star
    if kind is LossFamily.HINGE:
        if beta is None:
            raise ValueError("hinge gap map needs beta")
        return 1.0 - m_star if m_star <= beta else 0.0
    if kind is LossFamily.SMOOTH_HINGE:
        return (1.0 - min(1.0, m_star)) ** 2
    raise ValueError(f"unknown loss family: {kind!r}")


def bandit_loss_grad(
    kind: LossFamily,
    weights: WeightMatrix,
    x: np.ndarray,
    y_true: int,
    y_pred: int,
    p_pred: float,
    beta: float | None = None,
) -> tuple[float, RankedGradient]:
    """Importance-weighted loss/gradient estimate from one-bit feedback.

    A wrong guess reveals nothing: the estimate is (0, 0).  A correct guess
    reveals the label, and the full-information pair is scaled by 1/p_pred,
    which makes the estimator unbiased under y_pred ~ p'.
    """
    if p_pred <= 0.0:
        raise ValueError(f"prediction probability must be positive, got {p_pred}")
    if y_pred != y_true:
        return 0.0, RankedGradient.zero(weights.n_classes, x)
    loss, grad = loss_grad(kind, weights, x, y_true, beta)
    w = 1.0 / p_pred
    return loss * w, grad.scaled(w)
