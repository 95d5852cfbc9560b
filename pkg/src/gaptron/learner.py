"""The randomized mixture learner: prediction distribution, sampling, OGD update.

Each round the learner scores the classes, turns its confidence into an
exploration mass ``a`` through the loss family's gap map, and predicts from

    p' = (1 - max(a, gamma)) * e_{y*} + max(a, gamma) * uniform.

Full-information feedback reveals the label; bandit feedback reveals only
whether the sampled guess was right, and losses/gradients are importance
weighted.  The weight matrix follows projected online gradient descent inside
the Frobenius ball of radius ``radius``.

Learning rate and exploration rate default to the settings under which the
per-round surrogate gap

    (1 - a) * 1[y* != y] + a * (K-1)/K - loss(W_t) + (eta/2) * ||g_t||^2

is provably nonpositive; the update emits this quantity (and, under bandit
feedback, its exact conditional expectation) as a per-round audit record.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass

import numpy as np

from .linalg import (
    NORM_SLACK,
    RankedGradient,
    WeightMatrix,
    apply_gradient_step,
    class_scores,
)
from .losses import (
    LossFamily,
    default_beta,
    gap_map,
    loss_grad,
    margin_info,
    prediction_margins,
    softmax,
)

logger = logging.getLogger(__name__)

SNAPSHOT_FLOAT = "%.17g"


class FeedbackMode(enum.Enum):
    FULL_INFO = "full_info"
    BANDIT = "bandit"


class ConfigError(ValueError):
    """Invalid learner configuration."""


class FeedbackMismatchError(ValueError):
    """Feedback object does not match the configured regime or protocol."""


class FeatureNormError(ValueError):
    """Feature vector violates the norm bound under the strict policy."""


@dataclass(frozen=True)
class GaptronConfig:
    loss: LossFamily
    feedback: FeedbackMode
    n_classes: int
    n_features: int
    radius: float
    x_bound: float
    horizon: int | None = None
    beta: float | None = None
    eta_override: float | None = None
    gamma_override: float | None = None
    rng_seed: int = 0
    norm_policy: str = "strict"  # or "rescale"

    def __post_init__(self) -> None:
        if self.n_classes < 2:
            raise ConfigError(f"need at least 2 classes, got {self.n_classes}")
        if self.n_features < 1:
            raise ConfigError(f"need at least 1 feature, got {self.n_features}")
        if self.radius <= 0:
            raise ConfigError(f"radius must be positive, got {self.radius}")
        if self.x_bound <= 0:
            raise ConfigError(f"x_bound must be positive, got {self.x_bound}")
        if self.feedback is FeedbackMode.BANDIT:
            if self.horizon is None or self.horizon < 1:
                raise ConfigError("bandit feedback requires a horizon of at least 1")
        if self.beta is not None and not 0.0 < self.beta < 1.0:
            raise ConfigError(f"beta must lie in (0, 1), got {self.beta}")
        if self.eta_override is not None and self.eta_override <= 0:
            raise ConfigError("eta override must be positive")
        if self.gamma_override is not None and not 0.0 <= self.gamma_override <= 1.0:
            raise ConfigError("gamma override must lie in [0, 1]")
        if self.norm_policy not in ("strict", "rescale"):
            raise ConfigError(f"unknown norm policy: {self.norm_policy!r}")
        if self.loss is LossFamily.HINGE and self.beta is None:
            object.__setattr__(self, "beta", default_beta(self.n_classes))

    @property
    def theorem_settings(self) -> bool:
        """True when the derived rates and default beta are in force."""
        beta_ok = self.loss is not LossFamily.HINGE or self.beta == default_beta(
            self.n_classes
        )
        return self.eta_override is None and self.gamma_override is None and beta_ok


def derive_hyperparams(config: GaptronConfig) -> tuple[float, float]:
    """Learning and exploration rates under which the gap audits are nonpositive.

    Full information uses gamma = 0 and
        logistic:     eta = ln2 / (2 K X^2)
        hinge:        eta = (1 - beta) / (K X^2)
        smooth hinge: eta = 1 / (4 K X^2)

    Bandit feedback needs the horizon T:
        hinge:        gamma = min(1, sqrt(K^4 X^2 D^2 / (2 (K-1)^2 T))),
                      eta = gamma (1 - beta) / (K^2 X^2)
        smooth hinge: gamma = min(1, sqrt(2 K^2 X^2 D^2 / T)),
                      eta = gamma / (4 K^2 X^2)
        logistic:     the better of two regimes, compared by their regret
                      expressions: gamma = 0 with
                      eta = ln2 e^{-2DX} / (2 K^2 X^2), versus
                      gamma = min(1, sqrt(K^2 X^2 D^2 / (ln2 T))) with
                      eta = ln2 ((1-gamma) e^{-2DX} + gamma) / (2 K^2 X^2).

    Overrides bypass the corresponding derivation.
    """
    k = config.n_classes
    x2 = config.x_bound**2
    ln2 = math.log(2.0)
    if config.feedback is FeedbackMode.FULL_INFO:
        gamma = 0.0
        if config.loss is LossFamily.LOGISTIC:
            eta = ln2 / (2.0 * k * x2)
        elif config.loss is LossFamily.HINGE:
            eta = (1.0 - config.beta) / (k * x2)
        else:
            eta = 1.0 / (4.0 * k * x2)
    else:
        t = float(config.horizon)
        d_ball = config.radius
        kxd = k * config.x_bound * d_ball
        if config.loss is LossFamily.HINGE:
            gamma = min(1.0, math.sqrt(k**4 * x2 * d_ball**2 / (2.0 * (k - 1) ** 2 * t)))
            eta = gamma * (1.0 - config.beta) / (k**2 * x2)
        elif config.loss is LossFamily.SMOOTH_HINGE:
            gamma = min(1.0, math.sqrt(2.0 * k**2 * x2 * d_ball**2 / t))
            eta = gamma / (4.0 * k**2 * x2)
        else:
            decay = math.exp(-2.0 * d_ball * config.x_bound)
            regret_zero = kxd * kxd / (decay * ln2)
            regret_pos = kxd * max(2.0 * kxd / ln2, 2.0 * math.sqrt(t / ln2))
            if regret_zero <= regret_pos:
                gamma = 0.0
                eta = ln2 * decay / (2.0 * k**2 * x2)
            else:
                gamma = min(1.0, math.sqrt(kxd**2 / (ln2 * t)))
                eta = ln2 * ((1.0 - gamma) * decay + gamma) / (2.0 * k**2 * x2)
    if config.eta_override is not None:
        eta = config.eta_override
    if config.gamma_override is not None:
        gamma = config.gamma_override
    return eta, gamma


@dataclass(frozen=True)
class PredictionDistribution:
    """The mixture over class labels played in one round."""

    probs: np.ndarray
    y_star: int
    a: float
    mix: float

    def __post_init__(self) -> None:
        total = float(self.probs.sum())
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"probabilities sum to {total!r}, expected 1")

    def prob_of(self, label: int) -> float:
        return float(self.probs[label - 1])

    @classmethod
    def build(cls, n_classes: int, y_star: int, a: float, gamma: float):
        mix = max(a, gamma)
        probs = np.full(n_classes, mix / n_classes)
        probs[y_star - 1] += 1.0 - mix
        return cls(probs=probs, y_star=y_star, a=a, mix=mix)


@dataclass(frozen=True)
class RoundAudit:
    """Everything logged about one round.

    Fields that cannot be computed (no true label under bandit feedback, or
    no comparator supplied) are None.  ``surrogate_gap`` subtracts the
    full-information loss at W_t even under bandit feedback; its conditional
    expectation over the sampled label is ``conditional_gap``.
    """

    t: int
    a: float
    mix: float
    expected_mistake: float | None
    realized_mistake: float
    learner_loss: float
    comparator_loss: float | None
    grad_norm_sq: float
    surrogate_gap: float | None
    conditional_gap: float | None


@dataclass(frozen=True)
class FullInfoFeedback:
    label: int


@dataclass(frozen=True)
class BanditFeedback:
    correct: bool
    true_label: int | None = None  # audit-only; the update never reads it


@dataclass
class _PendingRound:
    x: np.ndarray
    dist: PredictionDistribution
    y_pred: int
    m_star: float


class Gaptron:
    """Single-owner mutable learner state; one instance per trajectory.

    ``predict`` and ``update`` must strictly alternate.  Exactly one uniform
    variate is drawn per round (inverse CDF over the class distribution in
    class order), so trajectories replay exactly under a fixed seed, and
    full-information weight trajectories do not depend on the seed at all.
    """

    def __init__(
        self, config: GaptronConfig, initial_weights: np.ndarray | None = None
    ) -> None:
        self.config = config
        self.eta, self.gamma = derive_hyperparams(config)
        if initial_weights is None:
            self.weights = WeightMatrix.zeros(
                config.n_classes, config.n_features, config.radius
            )
        else:
            self.weights = WeightMatrix(initial_weights, config.radius)
        self.t = 0
        self._rng = np.random.default_rng(config.rng_seed)
        self._pending: _PendingRound | None = None

    # ------------------------------------------------------------------ round

    def predict(self, x: np.ndarray) -> tuple[PredictionDistribution, int]:
        """Form the mixture for ``x`` and sample a label from it."""
        if self._pending is not None:
            raise FeedbackMismatchError("update() must be called before the next predict()")
        x = self._admit(x)
        scores = class_scores(self.weights, x)
        stats = prediction_margins(scores)
        y_star = stats.y_star
        m_star = stats.m_star
        if self.config.loss is LossFamily.LOGISTIC:
            a = gap_map(LossFamily.LOGISTIC, softmax(scores))
        else:
            a = gap_map(self.config.loss, stats, beta=self.config.beta)
        dist = PredictionDistribution.build(self.config.n_classes, y_star, a, self.gamma)
        u = self._rng.random()
        y_pred = _sample_inverse_cdf(dist.probs, u)
        self._pending = _PendingRound(x=x, dist=dist, y_pred=y_pred, m_star=m_star)
        return dist, y_pred

    def update(
        self,
        feedback: FullInfoFeedback | BanditFeedback,
        comparator: WeightMatrix | None = None,
    ) -> RoundAudit:
        """Consume feedback for the pending round, step the weights, audit."""
        if self._pending is None:
            raise FeedbackMismatchError("predict() must be called before update()")
        pending = self._pending
        if self.config.feedback is FeedbackMode.FULL_INFO:
            if not isinstance(feedback, FullInfoFeedback):
                raise FeedbackMismatchError("full-information learner expects FullInfoFeedback")
            audit = self._update_full_info(pending, feedback.label, comparator)
        else:
            if not isinstance(feedback, BanditFeedback):
                raise FeedbackMismatchError("bandit learner expects BanditFeedback")
            audit = self._update_bandit(pending, feedback, comparator)
        self._pending = None
        self.t += 1
        return audit

    def _update_full_info(self, pending, y_true, comparator):
        self._check_label(y_true)
        dist = pending.dist
        loss, grad = loss_grad(
            self.config.loss, self.weights, pending.x, y_true, self.config.beta
        )
        gap = self._gap_term(dist, pending, y_true, loss, grad.norm_sq())
        comparator_loss = self._comparator_loss(pending, comparator, y_true)
        audit = RoundAudit(
            t=self.t + 1,
            a=dist.a,
            mix=dist.mix,
            expected_mistake=1.0 - dist.prob_of(y_true),
            realized_mistake=float(pending.y_pred != y_true),
            learner_loss=loss,
            comparator_loss=comparator_loss,
            grad_norm_sq=grad.norm_sq(),
            surrogate_gap=gap,
            conditional_gap=None,
        )
        self.weights = apply_gradient_step(self.weights, grad, self.eta)
        return audit

    def _update_bandit(self, pending, feedback, comparator):
        dist = pending.dist
        y_pred = pending.y_pred
        if feedback.true_label is not None:
            self._check_label(feedback.true_label)
            if (feedback.true_label == y_pred) != feedback.correct:
                raise FeedbackMismatchError(
                    "feedback bit contradicts the supplied true label"
                )
        full_at_pred = None
        if feedback.correct:
            # a correct guess reveals the label: importance-weight the
            # full-information pair at y_pred by 1 / p'(y_pred)
            full_at_pred = loss_grad(
                self.config.loss, self.weights, pending.x, y_pred, self.config.beta
            )
            weight = 1.0 / dist.prob_of(y_pred)
            est_loss = full_at_pred[0] * weight
            est_grad = full_at_pred[1].scaled(weight)
        else:
            est_loss = 0.0
            est_grad = RankedGradient.zero(self.config.n_classes, pending.x)

        y_true = feedback.true_label
        expected_mistake = None
        gap = None
        cond_gap = None
        comparator_loss = None
        if y_true is not None:
            expected_mistake = 1.0 - dist.prob_of(y_true)
            if feedback.correct:
                full_loss, full_grad = full_at_pred
            else:
                full_loss, full_grad = loss_grad(
                    self.config.loss, self.weights, pending.x, y_true, self.config.beta
                )
            gap = self._gap_term(dist, pending, y_true, full_loss, est_grad.norm_sq())
            cond_gap = self._conditional_gap(pending, y_true, full_loss, full_grad)
            comparator_loss = self._comparator_loss(pending, comparator, y_true)
        audit = RoundAudit(
            t=self.t + 1,
            a=dist.a,
            mix=dist.mix,
            expected_mistake=expected_mistake,
            realized_mistake=float(not feedback.correct),
            learner_loss=est_loss,
            comparator_loss=comparator_loss,
            grad_norm_sq=est_grad.norm_sq(),
            surrogate_gap=gap,
            conditional_gap=cond_gap,
        )
        self.weights = apply_gradient_step(self.weights, est_grad, self.eta)
        return audit

    # ------------------------------------------------------------------ audits

    def conditional_gap(self, x: np.ndarray, y_true: int) -> float:
        """Exact conditional expectation of the surrogate gap over the sampled label.

        Simulation-only: the true label is an input.  Pure (no sampling, no
        state change); only meaningful under bandit feedback.
        """
        if self.config.feedback is not FeedbackMode.BANDIT:
            raise FeedbackMismatchError("conditional_gap applies to bandit feedback only")
        self._check_label(y_true)
        x = self._admit(x)
        scores = class_scores(self.weights, x)
        stats = prediction_margins(scores)
        if self.config.loss is LossFamily.LOGISTIC:
            a = gap_map(LossFamily.LOGISTIC, softmax(scores))
        else:
            a = gap_map(self.config.loss, stats, beta=self.config.beta)
        dist = PredictionDistribution.build(
            self.config.n_classes, stats.y_star, a, self.gamma
        )
        pending = _PendingRound(x=x, dist=dist, y_pred=0, m_star=stats.m_star)
        return self._conditional_gap(pending, y_true)

    def _conditional_gap(self, pending, y_true, full_loss=None, full_grad=None):
        """Expectation over the K outcomes of the realized gap.

        Only the y_true outcome carries loss or gradient mass, and its
        importance weight cancels one factor of its probability, so the
        K-term sum collapses to

            base - loss(W_t) + (eta/2) ||grad(W_t)||^2 / p'(y_true)

        with base the exploration terms.  A zero p'(y_true) means the label
        is never revealed: only base remains.
        """
        dist = pending.dist
        k = self.config.n_classes
        base = (1.0 - dist.a) * float(dist.y_star != y_true) + dist.a * (k - 1) / k
        p_true = dist.prob_of(y_true)
        if p_true == 0.0:
            return base
        if full_loss is None:
            full_loss, full_grad = loss_grad(
                self.config.loss, self.weights, pending.x, y_true, self.config.beta
            )
        return base - full_loss + 0.5 * self.eta * full_grad.norm_sq() / p_true

    def _gap_term(self, dist, pending, y_true, full_loss, grad_norm_sq):
        k = self.config.n_classes
        return (
            (1.0 - dist.a) * float(dist.y_star != y_true)
            + dist.a * (k - 1) / k
            - full_loss
            + 0.5 * self.eta * grad_norm_sq
        )

    def _comparator_loss(self, pending, comparator, y_true):
        """Round-t loss of a fixed comparator.

        The hinge's zero branch is selected by the learner's state (confident
        and correct), which zeroes the round's loss function for every
        argument; the other families have no state-coupled branch.
        """
        if comparator is None:
            return None
        if self.config.loss is LossFamily.HINGE:
            if pending.dist.y_star == y_true and pending.m_star > self.config.beta:
                return 0.0
            info = margin_info(class_scores(comparator, pending.x), y_true)
            return max(1.0 - info.margin, 0.0)
        return loss_grad(
            self.config.loss, comparator, pending.x, y_true, self.config.beta
        )[0]

    # ------------------------------------------------------------------ io

    def snapshot(self) -> str:
        """Flat text record: K d D loss feedback eta gamma t, then the weights.

        Reals carry 17 significant digits so float64 values round-trip exactly.
        """
        header = " ".join(
            [
                str(self.config.n_classes),
                str(self.config.n_features),
                SNAPSHOT_FLOAT % self.config.radius,
                self.config.loss.value,
                self.config.feedback.value,
                SNAPSHOT_FLOAT % self.eta,
                SNAPSHOT_FLOAT % self.gamma,
                str(self.t),
            ]
        )
        body = " ".join(SNAPSHOT_FLOAT % v for v in self.weights.rows.ravel())
        return header + "\n" + body + "\n"

    @classmethod
    def restore(
        cls,
        text: str,
        *,
        x_bound: float,
        horizon: int | None = None,
        rng_seed: int = 0,
        beta: float | None = None,
        norm_policy: str = "strict",
    ) -> "Gaptron":
        """Rebuild a learner from :meth:`snapshot` plus the non-snapshot settings."""
        tokens = text.split()
        if len(tokens) < 8:
            raise ValueError("snapshot record is truncated")
        k, d = int(tokens[0]), int(tokens[1])
        radius = float(tokens[2])
        loss = LossFamily(tokens[3])
        feedback = FeedbackMode(tokens[4])
        eta, gamma = float(tokens[5]), float(tokens[6])
        t = int(tokens[7])
        values = [float(v) for v in tokens[8:]]
        if len(values) != k * d:
            raise ValueError(
                f"snapshot holds {len(values)} weight values, expected {k * d}"
            )
        config = GaptronConfig(
            loss=loss,
            feedback=feedback,
            n_classes=k,
            n_features=d,
            radius=radius,
            x_bound=x_bound,
            horizon=horizon,
            beta=beta,
            eta_override=eta,
            gamma_override=gamma,
            rng_seed=rng_seed,
            norm_policy=norm_policy,
        )
        learner = cls(config, initial_weights=np.array(values).reshape(k, d))
        learner.t = t
        return learner

    # ------------------------------------------------------------------ misc

    def _admit(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        norm = float(np.linalg.norm(x))
        bound = self.config.x_bound
        if norm <= bound + NORM_SLACK:
            return x
        if self.config.norm_policy == "rescale":
            logger.warning(
                "feature norm %.6g exceeds bound %.6g; rescaling", norm, bound
            )
            return x * (bound / norm)
        raise FeatureNormError(
            f"feature norm {norm:.12g} exceeds bound {bound:.12g}"
        )

    def _check_label(self, label: int) -> None:
        if not 1 <= label <= self.config.n_classes:
            raise ValueError(
                f"label {label} outside 1..{self.config.n_classes}"
            )


def _sample_inverse_cdf(probs: np.ndarray, u: float) -> int:
    """Inverse-CDF draw over classes in class order; returns a 1-based label."""
    acc = 0.0
    for pos, p in enumerate(probs):
        acc += p
        if u < acc:
            return pos + 1
    return len(probs)
